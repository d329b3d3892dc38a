#pragma once

// Experiment modes behind the gtseq command line. Every mode returns its
// rows in grid order, independent of the worker count.

#include <gtseq/config.hpp>
#include <gtseq/estimators.hpp>
#include <gtseq/model.hpp>
#include <gtseq/parallel.hpp>
#include <gtseq/plans.hpp>
#include <gtseq/records.hpp>
#include <gtseq/series.hpp>

#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace gtseq {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitIo = 2;
inline constexpr int kExitNumeric = 3;

struct RunResult {
  std::vector<EstimateRecord> records;
  int exit_code = kExitOk;
};

/// Replicates are simulated in fixed blocks so results never depend on scheduling.
inline constexpr long kReplicateBlock = 4096;

/// Maximum number of individual violation rows per scanned estimator.
inline constexpr std::size_t kMaxViolationRows = 1000;

/// Sampling distribution and true parameters at one grid point.
struct PointSetup {
  GridPoint point;
  std::vector<double> mu;          // non-reference class probabilities
  std::vector<double> step_probs;  // mu followed by the reference class
  std::vector<double> target;      // true prevalence components
  EstimateRecord base;             // parameter columns filled in
};

inline EstimateRecord parameter_record(const GridPoint& gp, bool with_p = true) {
  EstimateRecord r;
  if (with_p) r.p = join_numbers(gp.p);
  r.k = gp.k;
  r.c = gp.c;
  r.pi0 = join_numbers(gp.errors.pi0);
  r.pi1 = join_numbers(gp.errors.pi1);
  return r;
}

inline PointSetup setup_point(const ExperimentConfig& cfg, const GridPoint& gp) {
  PointSetup s;
  s.point = gp;
  s.base = parameter_record(gp);
  if (cfg.diseases == 1) {
    OneDiseaseModel<double> m(gp.p[0], gp.k, gp.c, gp.errors.pi0[0], gp.errors.pi1[0]);
    const double theta = theta_one(m);
    s.mu = {theta};
    s.target = {gp.p[0]};
  } else {
    std::optional<MisclassModel<double>> mm;
    if (!gp.errors.perfect()) mm = misclass_of(gp.errors);
    TwoDiseaseModel<double> m(gp.p[0], gp.p[1], gp.p[2], gp.k, gp.c, mm);
    const Cells<double> cls = mm ? eta_two(m) : theta_two(m);
    s.mu = {cls[k10], cls[k01], cls[k11]};
    const auto p = m.p();
    s.target.assign(p.begin(), p.end());
  }
  s.step_probs = s.mu;
  double rest = 1.0;
  for (double m : s.mu) rest -= m;
  s.step_probs.push_back(rest);
  return s;
}

inline EstimatorSpec estimator_spec(const ExperimentConfig& cfg, EstimatorId id, const GridPoint& gp) {
  EstimatorSpec spec;
  spec.id = id;
  spec.k = gp.k;
  spec.c = gp.c;
  spec.order = cfg.order;
  if (cfg.diseases == 1) {
    spec.pi0 = gp.errors.pi0[0];
    spec.pi1 = gp.errors.pi1[0];
  } else if (!gp.errors.perfect()) {
    spec.misclass = misclass_of(gp.errors);
  }
  return spec;
}

/// Grid points with distinct (k, c, error rates), for modes that do not depend on p.
inline std::vector<GridPoint> distinct_designs(const ExperimentConfig& cfg) {
  std::vector<GridPoint> out;
  for (const auto& gp : enumerate_grid(cfg)) {
    bool seen = false;
    for (const auto& o : out) seen = seen || (o.k == gp.k && o.c == gp.c && o.errors == gp.errors);
    if (!seen) out.push_back(gp);
  }
  return out;
}

inline std::uint64_t grid_seed(std::uint64_t seed, std::size_t grid_index) {
  return mix64(seed ^ mix64(0x6a09e667f3bcc909ULL + grid_index));
}

inline bool outside_unit(double v) { return v < -1e-12 || v > 1.0 + 1e-12; }

namespace detail {

struct ComponentMoments {
  Accumulator<double> sum_d;   // estimate - target
  Accumulator<double> sum_d2;  // (estimate - target)^2
  long improper = 0;
};

struct EstimatorMoments {
  long evaluated = 0;
  long clamped = 0;
  long failed = 0;
  std::string failure;
  std::vector<ComponentMoments> comp;
};

struct BlockResult {
  std::vector<EstimatorMoments> est;
  std::string walk_failure;
};

inline void note_failure(EstimatorMoments& m, const std::string& what) {
  ++m.failed;
  if (m.failure.empty()) m.failure = what;
}

}  // namespace detail

/// Monte Carlo bias / MSE of each estimator at each grid point.
inline RunResult run_bench(const ExperimentConfig& cfg, int threads = 1) {
  RunResult res;
  if (cfg.replicates == 0) return res;
  const auto grid = enumerate_grid(cfg);
  struct PointWork {
    PointSetup setup;
    std::vector<std::shared_ptr<const Estimator>> est;
    std::vector<EstimatorId> ids;
    SamplingPlan plan = SamplingPlan::inverse(1, 1);
    std::string setup_failure;
  };
  std::vector<PointWork> work;
  for (const auto& gp : grid) {
    PointWork w;
    w.setup = setup_point(cfg, gp);
    w.plan = SamplingPlan::inverse(static_cast<int>(w.setup.mu.size()), gp.c);
    w.ids = estimators_for(cfg, gp.errors);
    for (EstimatorId id : w.ids) {
      try {
        w.est.push_back(std::make_shared<const Estimator>(estimator_spec(cfg, id, gp)));
      } catch (const std::exception& ex) {
        w.est.push_back(nullptr);
        if (w.setup_failure.empty()) w.setup_failure = ex.what();
      }
    }
    work.push_back(std::move(w));
  }

  const long blocks = (cfg.replicates + kReplicateBlock - 1) / kReplicateBlock;
  const std::size_t tasks = grid.size() * static_cast<std::size_t>(blocks);
  std::vector<detail::BlockResult> results(tasks);

  parallel_for(tasks, threads, [&](std::size_t task) {
    const std::size_t g = task / static_cast<std::size_t>(blocks);
    const long b = static_cast<long>(task % static_cast<std::size_t>(blocks));
    const PointWork& w = work[g];
    auto& out = results[task];
    out.est.resize(w.est.size());
    for (std::size_t e = 0; e < w.est.size(); ++e) {
      out.est[e].comp.resize(w.est[e] ? static_cast<std::size_t>(w.est[e]->components()) : 0);
    }
    const std::uint64_t seed = grid_seed(cfg.seed, g);
    const long first = b * kReplicateBlock;
    const long last = std::min(cfg.replicates, first + kReplicateBlock);
    const int t = static_cast<int>(w.setup.mu.size());
    std::vector<double> value(4);
    for (long r = first; r < last; ++r) {
      WalkOutcome walk;
      try {
        walk = simulate(w.plan, w.setup.step_probs, seed, static_cast<std::uint64_t>(r));
      } catch (const StepCapExceeded& ex) {
        out.walk_failure = ex.what();
        return;
      }
      std::span<const int> x(walk.terminal.data(), static_cast<std::size_t>(t));
      for (std::size_t e = 0; e < w.est.size(); ++e) {
        if (!w.est[e]) continue;
        auto& m = out.est[e];
        const int comps = w.est[e]->components();
        unsigned flags = 0;
        try {
          flags = (*w.est[e])(x, std::span<double>(value.data(), static_cast<std::size_t>(comps)));
        } catch (const std::exception& ex) {
          detail::note_failure(m, ex.what());
          continue;
        }
        ++m.evaluated;
        if (flags & kFlagClamped) ++m.clamped;
        for (int j = 0; j < comps; ++j) {
          const double d = value[j] - w.setup.target[j];
          m.comp[j].sum_d.add(d);
          m.comp[j].sum_d2.add(d * d);
          if (outside_unit(value[j])) ++m.comp[j].improper;
        }
      }
    }
  });

  for (std::size_t g = 0; g < grid.size(); ++g) {
    const PointWork& w = work[g];
    std::string walk_failure;
    for (long b = 0; b < blocks; ++b) {
      const auto& br = results[g * static_cast<std::size_t>(blocks) + b];
      if (walk_failure.empty() && !br.walk_failure.empty()) walk_failure = br.walk_failure;
    }
    for (std::size_t e = 0; e < w.ids.size(); ++e) {
      const std::vector<std::string> names =
          is_two_disease(w.ids[e]) ? std::vector<std::string>{"p00", "p10", "p01", "p11"} : std::vector<std::string>{"p"};
      detail::EstimatorMoments total;
      total.comp.resize(names.size());
      for (long b = 0; b < blocks && w.est[e]; ++b) {
        const auto& m = results[g * static_cast<std::size_t>(blocks) + b].est[e];
        total.evaluated += m.evaluated;
        total.clamped += m.clamped;
        total.failed += m.failed;
        if (total.failure.empty()) total.failure = m.failure;
        for (std::size_t j = 0; j < names.size(); ++j) {
          total.comp[j].sum_d.add(m.comp[j].sum_d.value());
          total.comp[j].sum_d2.add(m.comp[j].sum_d2.value());
          total.comp[j].improper += m.comp[j].improper;
        }
      }
      for (std::size_t j = 0; j < names.size(); ++j) {
        EstimateRecord r = w.setup.base;
        r.estimator = std::string(to_string(w.ids[e]));
        r.component = names[j];
        r.target = w.setup.target[j];
        if (misspecified(w.ids[e], grid[g].errors)) r.flags.push_back("misspecified");
        std::string failure;
        if (!w.est[e]) failure = "error:setup";
        else if (!walk_failure.empty()) failure = "error:step-cap";
        else if (total.failed > 0) failure = "error:evaluation:" + std::to_string(total.failed);
        if (!failure.empty()) {
          r.flags.push_back(failure);
          res.exit_code = kExitNumeric;
          res.records.push_back(std::move(r));
          continue;
        }
        const long n = total.evaluated;
        r.replicates = n;
        if (n > 0) {
          const double bias = total.comp[j].sum_d.value() / static_cast<double>(n);
          const double mse = total.comp[j].sum_d2.value() / static_cast<double>(n);
          r.estimate = w.setup.target[j] + bias;
          r.bias = bias;
          r.mse = mse;
          if (n > 1) {
            const double var = std::max(0.0, (total.comp[j].sum_d2.value() - n * bias * bias) / static_cast<double>(n - 1));
            r.se = std::sqrt(var / static_cast<double>(n));
          }
        }
        if (total.clamped > 0) r.flags.push_back("clamped:" + std::to_string(total.clamped));
        if (total.comp[j].improper > 0) r.flags.push_back("improper:" + std::to_string(total.comp[j].improper));
        res.records.push_back(std::move(r));
      }
    }
  }
  return res;
}

/// Truncated expectations of the unbiased estimators against their targets.
inline RunResult run_verify(const ExperimentConfig& cfg, int threads = 1) {
  RunResult res;
  const auto grid = enumerate_grid(cfg);
  struct Job {
    std::size_t g;
    EstimatorId id;
  };
  std::vector<PointSetup> setups;
  std::vector<Job> jobs;
  for (const auto& gp : grid) {
    setups.push_back(setup_point(cfg, gp));
    for (EstimatorId id : estimators_for(cfg, gp.errors)) {
      if (is_unbiased(id)) jobs.push_back({gp.index, id});
    }
  }
  std::vector<std::vector<EstimateRecord>> rows(jobs.size());
  std::vector<int> codes(jobs.size(), kExitOk);
  parallel_for(jobs.size(), threads, [&](std::size_t i) {
    const auto& job = jobs[i];
    const auto& s = setups[job.g];
    EstimateRecord base = s.base;
    base.estimator = std::string(to_string(job.id));
    std::vector<std::string> names;
    try {
      Estimator est(estimator_spec(cfg, job.id, s.point));
      names = est.component_names();
      ExpectationOptions opt;
      opt.tol = cfg.verify_tol;
      opt.max_total = cfg.verify_max_total;
      opt.sup_bound = est.sup_bound();
      if (job.id == EstimatorId::UbTwoMisclassSeries) opt.max_total = std::min(opt.max_total, cfg.order);
      auto r = truncated_expectation([&](std::span<const int> x, std::span<double> out) { est(x, out); },
                                     est.components(), s.point.c, s.mu, opt);
      for (std::size_t j = 0; j < names.size(); ++j) {
        EstimateRecord row = base;
        row.component = names[j];
        row.estimate = r.value[j];
        row.target = s.target[j];
        row.tail = r.tail_bound;
        if (misspecified(job.id, s.point.errors)) row.flags.push_back("misspecified");
        if (!r.certified) row.flags.push_back("uncertified-tail");
        const double accept = r.certified ? cfg.verify_accept : cfg.verify_accept_uncertified;
        const double err = std::abs(r.value[j] - s.target[j]);
        if (!r.converged) {
          row.flags.push_back("not-converged:" + std::to_string(r.total_reached));
          codes[i] = kExitNumeric;
        }
        if (!(err <= accept + r.tail_bound)) {
          row.flags.push_back("mismatch");
          codes[i] = kExitNumeric;
        }
        rows[i].push_back(std::move(row));
      }
    } catch (const std::exception& ex) {
      EstimateRecord row = base;
      row.flags.push_back("error:evaluation");
      rows[i].push_back(std::move(row));
      codes[i] = kExitNumeric;
    }
  });
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    for (auto& r : rows[i]) res.records.push_back(std::move(r));
    res.exit_code = std::max(res.exit_code, codes[i]);
  }
  return res;
}

/// Sample points where the estimators leave the parameter space.
inline RunResult run_scan(const ExperimentConfig& cfg, int threads = 1) {
  RunResult res;
  for (const auto& gp : distinct_designs(cfg)) {
    for (EstimatorId id : estimators_for(cfg, gp.errors)) {
      EstimateRecord base = parameter_record(gp, false);
      base.estimator = std::string(to_string(id));
      EstimateRecord summary = base;
      int bound = cfg.scan_bound;
      if (id == EstimatorId::UbTwoMisclassSeries && bound > cfg.order) {
        bound = cfg.order;
        summary.flags.push_back("bound-capped:" + std::to_string(bound));
      }
      summary.flags.push_back("bound:" + std::to_string(bound));
      std::vector<PropernessViolation> found;
      try {
        Estimator est(estimator_spec(cfg, id, gp));
        found = scan_properness(est, bound, cfg.scan_tolerance, threads);
      } catch (const std::exception&) {
        summary.flags.push_back("error:evaluation");
        res.exit_code = kExitNumeric;
        res.records.push_back(std::move(summary));
        continue;
      }
      summary.estimate = static_cast<double>(found.size());
      if (found.size() > kMaxViolationRows) summary.flags.push_back("listing-truncated");
      res.records.push_back(std::move(summary));
      for (std::size_t i = 0; i < found.size() && i < kMaxViolationRows; ++i) {
        EstimateRecord r = base;
        r.component = found[i].component;
        r.sample = join_ints(found[i].sample);
        r.estimate = found[i].value;
        r.flags.push_back("improper:" + std::string(to_string(found[i].bound)));
        res.records.push_back(std::move(r));
      }
    }
  }
  return res;
}

/// Estimates at the configured sample points.
inline RunResult run_estimate(const ExperimentConfig& cfg, int /*threads*/ = 1) {
  RunResult res;
  for (const auto& gp : distinct_designs(cfg)) {
    for (EstimatorId id : estimators_for(cfg, gp.errors)) {
      EstimateRecord base = parameter_record(gp, false);
      base.estimator = std::string(to_string(id));
      std::optional<Estimator> est;
      try {
        est.emplace(estimator_spec(cfg, id, gp));
      } catch (const std::exception&) {
        EstimateRecord r = base;
        r.flags.push_back("error:setup");
        res.records.push_back(std::move(r));
        res.exit_code = kExitNumeric;
        continue;
      }
      const auto names = est->component_names();
      for (const auto& x : cfg.samples) {
        std::vector<double> value(names.size());
        unsigned flags = 0;
        std::string failure;
        try {
          flags = (*est)(x, value);
        } catch (const InsufficientOrderError&) {
          failure = "error:insufficient-order";
        } catch (const std::exception&) {
          failure = "error:evaluation";
        }
        for (std::size_t j = 0; j < names.size(); ++j) {
          EstimateRecord r = base;
          r.component = names[j];
          r.sample = join_ints(x);
          if (misspecified(id, gp.errors)) r.flags.push_back("misspecified");
          if (!failure.empty()) {
            r.flags.push_back(failure);
            res.exit_code = kExitNumeric;
          } else {
            r.estimate = value[j];
            if (flags & kFlagClamped) r.flags.push_back("clamped");
            if (outside_unit(value[j])) r.flags.push_back("improper");
          }
          res.records.push_back(std::move(r));
        }
      }
    }
  }
  return res;
}

/// Identifiability of each configured error model.
inline RunResult run_identify(const ExperimentConfig& cfg, int /*threads*/ = 1) {
  RunResult res;
  std::vector<ErrorRates> seen;
  for (const auto& e : cfg.errors) {
    if (std::find(seen.begin(), seen.end(), e) != seen.end()) continue;
    seen.push_back(e);
    EstimateRecord r;
    r.estimator = "IDENTIFY";
    r.pi0 = join_numbers(e.pi0);
    r.pi1 = join_numbers(e.pi1);
    bool ok = false;
    if (cfg.diseases == 1) {
      r.component = "nu";
      r.estimate = e.pi0[0] + e.pi1[0] - 1.0;
      ok = *r.estimate != 0.0;
    } else {
      r.component = "det_phi";
      auto report = identifiable(misclass_of(e));
      const double nu1 = e.pi0[0] + e.pi1[0] - 1.0;
      const double nu2 = e.pi0[1] + e.pi1[1] - 1.0;
      r.estimate = report.det_phi;
      r.target = (nu1 * nu2) * (nu1 * nu2);
      ok = report.identifiable;
    }
    r.flags.push_back(ok ? "identifiable" : "not-identifiable");
    res.records.push_back(std::move(r));
  }
  return res;
}

/// Empirical terminal distribution of the inverse sampling walk against pmf_imn.
inline RunResult run_simulate(const ExperimentConfig& cfg, int threads = 1) {
  RunResult res;
  if (cfg.replicates == 0) return res;
  const auto grid = enumerate_grid(cfg);
  const long blocks = (cfg.replicates + kReplicateBlock - 1) / kReplicateBlock;
  std::vector<PointSetup> setups;
  for (const auto& gp : grid) setups.push_back(setup_point(cfg, gp));
  const int t = cfg.diseases == 1 ? 1 : 3;
  const GradedLayout layout(t, cfg.simulate_max_total);
  const std::size_t tasks = grid.size() * static_cast<std::size_t>(blocks);
  std::vector<std::vector<long>> counts(tasks);
  std::vector<std::string> failures(tasks);
  parallel_for(tasks, threads, [&](std::size_t task) {
    const std::size_t g = task / static_cast<std::size_t>(blocks);
    const long b = static_cast<long>(task % static_cast<std::size_t>(blocks));
    const auto& s = setups[g];
    const auto plan = SamplingPlan::inverse(t, s.point.c);
    counts[task].assign(layout.size(), 0);
    const std::uint64_t seed = grid_seed(cfg.seed, g);
    const long last = std::min(cfg.replicates, (b + 1) * kReplicateBlock);
    for (long r = b * kReplicateBlock; r < last; ++r) {
      WalkOutcome walk;
      try {
        walk = simulate(plan, s.step_probs, seed, static_cast<std::uint64_t>(r));
      } catch (const StepCapExceeded& ex) {
        failures[task] = ex.what();
        return;
      }
      std::span<const int> x(walk.terminal.data(), static_cast<std::size_t>(t));
      int n = 0;
      for (int v : x) n += v;
      if (n <= cfg.simulate_max_total) ++counts[task][layout.rank(x)];
    }
  });
  for (std::size_t g = 0; g < grid.size(); ++g) {
    std::vector<long> total(layout.size(), 0);
    bool failed = false;
    for (long b = 0; b < blocks; ++b) {
      const std::size_t task = g * static_cast<std::size_t>(blocks) + b;
      failed = failed || !failures[task].empty();
      for (std::size_t i = 0; i < total.size(); ++i) total[i] += counts[task][i];
    }
    if (failed) {
      EstimateRecord r = setups[g].base;
      r.estimator = "IMN";
      r.component = "pmf";
      r.flags.push_back("error:step-cap");
      res.records.push_back(std::move(r));
      res.exit_code = kExitNumeric;
      continue;
    }
    const double reps = static_cast<double>(cfg.replicates);
    for (std::size_t i = 0; i < layout.size(); ++i) {
      auto x = layout.at(i);
      EstimateRecord r = setups[g].base;
      r.estimator = "IMN";
      r.component = "pmf";
      r.sample = join_ints(std::vector<int>(x.begin(), x.end()));
      r.replicates = cfg.replicates;
      const double pmf = pmf_imn(x, setups[g].point.c, setups[g].mu);
      const double freq = static_cast<double>(total[i]) / reps;
      r.estimate = freq;
      r.target = pmf;
      r.bias = freq - pmf;
      r.se = std::sqrt(pmf * (1.0 - pmf) / reps);
      if (std::abs(freq - pmf) > 4.0 * *r.se) r.flags.push_back("outside-4se");
      res.records.push_back(std::move(r));
    }
  }
  return res;
}

inline RunResult run_experiment(const ExperimentConfig& cfg, int threads = 1) {
  switch (cfg.mode) {
    case Mode::Estimate: return run_estimate(cfg, threads);
    case Mode::VerifyUnbiased: return run_verify(cfg, threads);
    case Mode::ScanProperness: return run_scan(cfg, threads);
    case Mode::Identify: return run_identify(cfg, threads);
    case Mode::Simulate: return run_simulate(cfg, threads);
    case Mode::Bench: return run_bench(cfg, threads);
  }
  return {};
}

}  // namespace gtseq
