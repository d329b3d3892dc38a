#pragma once

// Experiment configuration: an INI-style `key = value` grammar.
// See docs/config.md for the full key reference.

#include <gtseq/estimators.hpp>
#include <gtseq/model.hpp>
#include <gtseq/records.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace gtseq {

/// A configuration problem, tagged with the 1-based line it refers to (0 if none).
class ValidationError : public std::runtime_error {
 public:
  ValidationError(int line, const std::string& what)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

enum class Mode { Estimate, VerifyUnbiased, ScanProperness, Identify, Simulate, Bench };

inline constexpr std::array<Mode, 6> kAllModes = {Mode::Estimate, Mode::VerifyUnbiased, Mode::ScanProperness,
                                                  Mode::Identify, Mode::Simulate,       Mode::Bench};

inline std::string_view to_string(Mode m) {
  switch (m) {
    case Mode::Estimate: return "estimate";
    case Mode::VerifyUnbiased: return "verify-unbiased";
    case Mode::ScanProperness: return "scan-properness";
    case Mode::Identify: return "identify";
    case Mode::Simulate: return "simulate";
    case Mode::Bench: return "bench";
  }
  return "?";
}

inline std::optional<Mode> parse_mode(std::string_view text) {
  for (Mode m : kAllModes) {
    if (to_string(m) == text) return m;
  }
  return std::nullopt;
}

/// Error rates of one grid entry, one value per disease.
struct ErrorRates {
  std::vector<double> pi0;
  std::vector<double> pi1;

  bool perfect() const {
    for (double v : pi0) if (v != 1.0) return false;
    for (double v : pi1) if (v != 1.0) return false;
    return true;
  }
  bool operator==(const ErrorRates&) const = default;
};

struct ExperimentConfig {
  Mode mode = Mode::Bench;
  int diseases = 1;
  /// One entry per prevalence grid value: {p} or {p10, p01, p11}.
  std::vector<std::vector<double>> p;
  std::vector<int> k;
  std::vector<int> c;
  std::vector<ErrorRates> errors;
  /// Empty selects the defaults for the disease count.
  std::vector<EstimatorId> estimators;

  std::uint64_t seed = 0;
  long replicates = 100000;
  int order = 64;
  OutputFormat format = OutputFormat::Csv;
  std::string out;
  int threads = 0;  // 0: not set

  int scan_bound = 1000;
  double scan_tolerance = 1e-12;

  double verify_tol = 1e-10;
  int verify_max_total = 5000;
  double verify_accept = 1e-8;
  double verify_accept_uncertified = 1e-6;

  /// Sample points for estimate mode: {y} or {z10, z01, z11}.
  std::vector<std::vector<int>> samples;

  int simulate_max_total = 6;

  std::vector<std::string> warnings;
};

struct GridPoint {
  std::size_t index = 0;
  std::vector<double> p;
  int k = 1;
  int c = 1;
  ErrorRates errors;
};

/// Parameter grid in row-major order: p slowest, then k, c, error rates.
inline std::vector<GridPoint> enumerate_grid(const ExperimentConfig& cfg) {
  std::vector<GridPoint> out;
  for (const auto& p : cfg.p) {
    for (int k : cfg.k) {
      for (int c : cfg.c) {
        for (const auto& e : cfg.errors) {
          out.push_back({out.size(), p, k, c, e});
        }
      }
    }
  }
  return out;
}

inline MisclassModel<double> misclass_of(const ErrorRates& e) {
  return indep_misclass<double>({e.pi0[0], e.pi1[0], e.pi0[1], e.pi1[1]});
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto* ws = " \t\r";
  auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

struct Entry {
  std::string value;
  int line = 0;
};

class EntryReader {
 public:
  EntryReader(const std::map<std::string, Entry>& entries) : entries_(entries) {}

  const Entry* find(const std::string& key) const {
    auto it = entries_.find(key);
    return it == entries_.end() ? nullptr : &it->second;
  }

  const Entry& require(const std::string& key) const {
    if (const Entry* e = find(key)) return *e;
    const auto dot = key.find('.');
    throw ValidationError(0, "missing required key '" + key.substr(dot + 1) + "' in [" + key.substr(0, dot) + "]");
  }

 private:
  const std::map<std::string, Entry>& entries_;
};

template <class T>
T parse_integer(std::string_view text, int line, const std::string& key) {
  T v{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size()) {
    throw ValidationError(line, "'" + key + "': expected an integer, got '" + std::string(text) + "'");
  }
  return v;
}

inline double parse_real(std::string_view text, int line, const std::string& key) {
  std::string s(text);
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (s.empty() || used != s.size() || !std::isfinite(v)) {
    throw ValidationError(line, "'" + key + "': expected a number, got '" + s + "'");
  }
  return v;
}

inline std::vector<double> parse_tuple(std::string_view item, std::size_t arity, int line, const std::string& key) {
  auto parts = split(item, ':');
  if (parts.size() != arity) {
    throw ValidationError(line, "'" + key + "': expected " + std::to_string(arity) + " colon-separated value(s), got '" +
                                    std::string(item) + "'");
  }
  std::vector<double> out;
  for (auto part : parts) out.push_back(parse_real(part, line, key));
  return out;
}

}  // namespace detail

inline std::vector<EstimatorId> default_estimators(int diseases, bool perfect) {
  if (diseases == 1) {
    return {perfect ? EstimatorId::UbOnePerfect : EstimatorId::UbOneMisclass, EstimatorId::MleOne};
  }
  return {perfect ? EstimatorId::UbTwoPerfect : EstimatorId::UbTwoMisclassSeries, EstimatorId::MleTwo};
}

/// Estimators to run at a grid point: the configured list, or the defaults
/// matched to whether the point has misclassification.
inline std::vector<EstimatorId> estimators_for(const ExperimentConfig& cfg, const ErrorRates& e) {
  if (!cfg.estimators.empty()) return cfg.estimators;
  return default_estimators(cfg.diseases, e.perfect());
}

/// True when the estimator assumes a different error model than the grid point.
inline bool misspecified(EstimatorId id, const ErrorRates& e) {
  switch (id) {
    case EstimatorId::UbOnePerfect:
    case EstimatorId::UbTwoPerfect:
    case EstimatorId::MleTwo:
      return !e.perfect();
    default:
      return false;
  }
}

inline ExperimentConfig parse_config(std::string_view text) {
  // (section, key) schema; keys before the first section header may come from [run] or [model]
  static const std::map<std::string, std::vector<std::string>> schema = {
      {"run", {"mode", "seed", "replicates", "order", "format", "out", "threads", "estimators"}},
      {"model", {"diseases", "p", "k", "c", "pi0", "pi1"}},
      {"estimate", {"samples"}},
      {"scan", {"bound", "tolerance"}},
      {"verify", {"tol", "max_total", "accept", "accept_uncertified"}},
      {"simulate", {"max_total"}},
  };
  auto section_has = [&](const std::string& section, const std::string& key) {
    const auto& keys = schema.at(section);
    return std::find(keys.begin(), keys.end(), key) != keys.end();
  };

  std::map<std::string, detail::Entry> entries;  // "section.key"
  std::string section;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto eol = text.find('\n', pos);
    std::string_view raw = text.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
    pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
    ++line_no;
    if (auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
    auto line = detail::trim(raw);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ValidationError(line_no, "malformed section header '" + std::string(line) + "'");
      section = std::string(detail::trim(line.substr(1, line.size() - 2)));
      if (!schema.count(section)) throw ValidationError(line_no, "unknown section [" + section + "]");
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ValidationError(line_no, "expected 'key = value', got '" + std::string(line) + "'");
    }
    std::string key(detail::trim(line.substr(0, eq)));
    std::string value(detail::trim(line.substr(eq + 1)));
    if (key.empty()) throw ValidationError(line_no, "empty key");
    std::string owner = section;
    if (owner.empty()) {
      if (section_has("run", key)) {
        owner = "run";
      } else if (section_has("model", key)) {
        owner = "model";
      } else {
        throw ValidationError(line_no, "unknown key '" + key + "' (outside any section only [run] and [model] keys are allowed)");
      }
    } else if (!section_has(owner, key)) {
      throw ValidationError(line_no, "unknown key '" + key + "' in section [" + owner + "]");
    }
    if (value.empty()) throw ValidationError(line_no, "'" + key + "': empty value");
    auto [it, fresh] = entries.emplace(owner + "." + key, detail::Entry{value, line_no});
    if (!fresh) {
      throw ValidationError(line_no, "duplicate key '" + key + "' (first set on line " + std::to_string(it->second.line) + ")");
    }
  }

  detail::EntryReader in(entries);
  ExperimentConfig cfg;

  {
    const auto& e = in.require("run.mode");
    auto m = parse_mode(e.value);
    if (!m) throw ValidationError(e.line, "unknown mode '" + e.value + "'");
    cfg.mode = *m;
  }
  if (const auto* e = in.find("run.seed")) cfg.seed = detail::parse_integer<std::uint64_t>(e->value, e->line, "seed");
  if (const auto* e = in.find("run.replicates")) {
    cfg.replicates = detail::parse_integer<long>(e->value, e->line, "replicates");
    if (cfg.replicates < 0) throw ValidationError(e->line, "replicates must be >= 0");
  }
  if (const auto* e = in.find("run.order")) {
    cfg.order = detail::parse_integer<int>(e->value, e->line, "order");
    if (cfg.order < 1) throw ValidationError(e->line, "order must be >= 1");
  }
  if (const auto* e = in.find("run.format")) {
    if (e->value == "csv") {
      cfg.format = OutputFormat::Csv;
    } else if (e->value == "jsonl") {
      cfg.format = OutputFormat::Jsonl;
    } else {
      throw ValidationError(e->line, "format must be csv or jsonl, got '" + e->value + "'");
    }
  }
  if (const auto* e = in.find("run.out")) cfg.out = e->value;
  if (const auto* e = in.find("run.threads")) {
    cfg.threads = detail::parse_integer<int>(e->value, e->line, "threads");
    if (cfg.threads < 1) throw ValidationError(e->line, "threads must be >= 1");
  }

  if (const auto* e = in.find("model.diseases")) {
    cfg.diseases = detail::parse_integer<int>(e->value, e->line, "diseases");
    if (cfg.diseases != 1 && cfg.diseases != 2) throw ValidationError(e->line, "diseases must be 1 or 2");
  }
  const std::size_t p_arity = cfg.diseases == 1 ? 1 : 3;
  const std::size_t pi_arity = static_cast<std::size_t>(cfg.diseases);

  const auto& p_entry = in.require("model.p");
  for (auto item : detail::split(p_entry.value, ',')) {
    auto v = detail::parse_tuple(item, p_arity, p_entry.line, "p");
    for (double x : v) {
      if (!(x > 0.0 && x < 1.0)) throw ValidationError(p_entry.line, "p: every prevalence must lie in (0,1)");
    }
    if (p_arity == 3 && !(1.0 - v[0] - v[1] - v[2] > 0.0)) {
      throw ValidationError(p_entry.line, "p: p10 + p01 + p11 must be < 1");
    }
    cfg.p.push_back(std::move(v));
  }

  auto int_list = [&](const std::string& key, std::vector<int>& out) {
    const auto& e = in.require("model." + key);
    for (auto item : detail::split(e.value, ',')) {
      int v = detail::parse_integer<int>(item, e.line, key);
      if (v < 1) throw ValidationError(e.line, key + " must be >= 1 (got " + std::to_string(v) + ")");
      out.push_back(v);
    }
  };
  int_list("k", cfg.k);
  int_list("c", cfg.c);

  {
    const auto* e0 = in.find("model.pi0");
    const auto* e1 = in.find("model.pi1");
    std::vector<std::vector<double>> pi0, pi1;
    auto read = [&](const detail::Entry* e, const std::string& key, std::vector<std::vector<double>>& out) {
      if (!e) return;
      for (auto item : detail::split(e->value, ',')) {
        auto v = detail::parse_tuple(item, pi_arity, e->line, key);
        for (double x : v) {
          if (!(x > 0.0 && x <= 1.0)) throw ValidationError(e->line, key + ": error rates must lie in (0,1]");
        }
        out.push_back(std::move(v));
      }
    };
    read(e0, "pi0", pi0);
    read(e1, "pi1", pi1);
    if (pi0.empty() && pi1.empty()) {
      pi0.assign(1, std::vector<double>(pi_arity, 1.0));
    }
    if (pi0.empty()) pi0.assign(pi1.size(), std::vector<double>(pi_arity, 1.0));
    if (pi1.empty()) pi1.assign(pi0.size(), std::vector<double>(pi_arity, 1.0));
    if (pi0.size() != pi1.size()) {
      throw ValidationError(e1 ? e1->line : 0, "pi0 and pi1 lists are paired entrywise and must have equal length");
    }
    for (std::size_t i = 0; i < pi0.size(); ++i) cfg.errors.push_back({pi0[i], pi1[i]});
  }

  if (const auto* e = in.find("run.estimators")) {
    for (auto item : detail::split(e->value, ',')) {
      auto id = parse_estimator_id(item);
      if (!id) throw ValidationError(e->line, "unknown estimator '" + std::string(item) + "'");
      if ((is_two_disease(*id) ? 2 : 1) != cfg.diseases) {
        throw ValidationError(e->line, "estimator " + std::string(item) + " does not match diseases = " +
                                           std::to_string(cfg.diseases));
      }
      if (cfg.mode == Mode::VerifyUnbiased && !is_unbiased(*id)) {
        throw ValidationError(e->line, "verify-unbiased accepts unbiased estimators only, got " + std::string(item));
      }
      cfg.estimators.push_back(*id);
    }
  }

  if (const auto* e = in.find("scan.bound")) {
    cfg.scan_bound = detail::parse_integer<int>(e->value, e->line, "bound");
    if (cfg.scan_bound < 0) throw ValidationError(e->line, "bound must be >= 0");
  }
  if (const auto* e = in.find("scan.tolerance")) {
    cfg.scan_tolerance = detail::parse_real(e->value, e->line, "tolerance");
    if (cfg.scan_tolerance < 0) throw ValidationError(e->line, "tolerance must be >= 0");
  }
  auto positive_real = [&](const std::string& key, double& out) {
    if (const auto* e = in.find(key)) {
      out = detail::parse_real(e->value, e->line, key);
      if (!(out > 0.0)) throw ValidationError(e->line, key + " must be > 0");
    }
  };
  positive_real("verify.tol", cfg.verify_tol);
  positive_real("verify.accept", cfg.verify_accept);
  positive_real("verify.accept_uncertified", cfg.verify_accept_uncertified);
  if (const auto* e = in.find("verify.max_total")) {
    cfg.verify_max_total = detail::parse_integer<int>(e->value, e->line, "max_total");
    if (cfg.verify_max_total < 0) throw ValidationError(e->line, "max_total must be >= 0");
  }
  if (const auto* e = in.find("simulate.max_total")) {
    cfg.simulate_max_total = detail::parse_integer<int>(e->value, e->line, "max_total");
    if (cfg.simulate_max_total < 0) throw ValidationError(e->line, "max_total must be >= 0");
  }
  if (const auto* e = in.find("estimate.samples")) {
    for (auto item : detail::split(e->value, ',')) {
      auto parts = detail::split(item, ':');
      if (parts.size() != p_arity) {
        throw ValidationError(e->line, "samples: expected " + std::to_string(p_arity) +
                                           " colon-separated count(s), got '" + std::string(item) + "'");
      }
      std::vector<int> pt;
      for (auto part : parts) {
        int v = detail::parse_integer<int>(part, e->line, "samples");
        if (v < 0) throw ValidationError(e->line, "samples: counts must be >= 0");
        pt.push_back(v);
      }
      cfg.samples.push_back(std::move(pt));
    }
  } else if (cfg.mode == Mode::Estimate) {
    in.require("estimate.samples");
  }

  // Every grid point goes through the model constructors. Identify mode is
  // exactly the place where nu = 0 must be reportable, so it skips that check.
  const int pi_line = [&] {
    if (const auto* e = in.find("model.pi0")) return e->line;
    if (const auto* e = in.find("model.pi1")) return e->line;
    return p_entry.line;
  }();
  for (const auto& gp : enumerate_grid(cfg)) {
    try {
      if (cfg.diseases == 1) {
        const bool skip_nu = cfg.mode == Mode::Identify;
        OneDiseaseModel<double> m(gp.p[0], gp.k, gp.c, skip_nu ? 1.0 : gp.errors.pi0[0], skip_nu ? 1.0 : gp.errors.pi1[0]);
        if (!skip_nu) {
          for (const auto& w : m.warnings()) {
            if (std::find(cfg.warnings.begin(), cfg.warnings.end(), w) == cfg.warnings.end()) cfg.warnings.push_back(w);
          }
        }
      } else {
        std::optional<MisclassModel<double>> mm;
        if (!gp.errors.perfect()) mm = misclass_of(gp.errors);
        TwoDiseaseModel<double> m(gp.p[0], gp.p[1], gp.p[2], gp.k, gp.c, mm);
        if (mm && cfg.mode != Mode::Identify && !identifiable(*mm).identifiable) {
          throw IdentifiabilityError("misclassification matrix is singular: joint prevalences are not identifiable");
        }
      }
    } catch (const IdentifiabilityError& ex) {
      throw ValidationError(pi_line, ex.what());
    } catch (const DomainError& ex) {
      throw ValidationError(p_entry.line, ex.what());
    }
  }
  return cfg;
}

}  // namespace gtseq
