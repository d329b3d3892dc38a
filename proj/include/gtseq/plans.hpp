#pragma once

// Sampling plans as stopping sets for lattice random walks, the inverse
// multinomial pmf, walk simulation, path counting, truncated expectations,
// and the computational diagnostics for plans on which no unbiased
// estimator of p can exist.
//
// Coordinate layout: for t + 1 dimensions, axes 0 .. t-1 count the t
// non-reference classes and axis t counts the reference class (negative
// pools). In two dimensions a point is (x, y) = (positives, negatives).

#include "gtseq/numeric.hpp"

#include <Eigen/Dense>
#include <boost/math/special_functions/beta.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace gtseq {

using LatticePoint = std::vector<int>;

class StepCapExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class PlanFormatError : public std::runtime_error {
 public:
  PlanFormatError(int line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

class SamplingPlan {
 public:
  /// Stop when coordinate `axis` reaches `count`.
  struct CoordinateRule {
    int axis;
    int count;
  };
  /// Stop after `total` steps (fixed binomial / multinomial sampling).
  struct TotalRule {
    int total;
  };
  using PointSet = std::set<LatticePoint>;

  /// IMN_t(c): sample until c reference-class observations.
  static SamplingPlan inverse(int t, int c) { return coordinate_rule(t + 1, t, c); }

  static SamplingPlan coordinate_rule(int dim, int axis, int count) {
    check_dim(dim);
    if (axis < 0 || axis >= dim) throw DomainError("coordinate rule axis out of range");
    if (count < 1) throw DomainError("coordinate rule count must be >= 1");
    return SamplingPlan(dim, CoordinateRule{axis, count});
  }

  static SamplingPlan fixed_total(int dim, int total) {
    check_dim(dim);
    if (total < 0) throw DomainError("fixed plan total must be >= 0");
    return SamplingPlan(dim, TotalRule{total});
  }

  static SamplingPlan from_points(int dim, PointSet points) {
    check_dim(dim);
    if (points.empty()) throw DomainError("explicit plan needs at least one boundary point");
    for (const auto& p : points) {
      if (static_cast<int>(p.size()) != dim) throw DomainError("boundary point dimension mismatch");
      if (std::any_of(p.begin(), p.end(), [](int v) { return v < 0; })) {
        throw DomainError("boundary coordinates must be nonnegative");
      }
    }
    return SamplingPlan(dim, std::move(points));
  }

  int dim() const { return dim_; }
  bool rule_based() const { return !std::holds_alternative<PointSet>(rule_); }
  const PointSet* points() const { return std::get_if<PointSet>(&rule_); }
  const CoordinateRule* coordinate() const { return std::get_if<CoordinateRule>(&rule_); }
  const TotalRule* total_rule() const { return std::get_if<TotalRule>(&rule_); }

  bool is_boundary(std::span<const int> x) const {
    if (auto* r = coordinate()) return x[r->axis] == r->count;
    if (auto* r = total_rule()) return std::accumulate(x.begin(), x.end(), 0) == r->total;
    return points()->count(LatticePoint(x.begin(), x.end())) > 0;
  }

  /// True when every walk stops within a bounded number of steps.
  bool is_finite() const {
    if (coordinate()) return false;
    if (total_rule()) return true;
    const PointSet& pts = *points();
    int top = 0;
    for (const auto& p : pts) top = std::max(top, std::accumulate(p.begin(), p.end(), 0));
    // a walk still running at total `top` can never stop
    bool escapes = false;
    for_each_reachable(top, [&](const LatticePoint& x, int total) {
      if (total == top && !is_boundary(x)) escapes = true;
    });
    return !escapes;
  }

  /// Boundary points of a finite plan that some walk actually reaches.
  std::vector<LatticePoint> finite_boundary() const {
    if (!is_finite()) throw DomainError("plan is not finite");
    std::vector<LatticePoint> out;
    int top = 0;
    if (auto* r = total_rule()) {
      top = r->total;
    } else {
      for (const auto& p : *points()) top = std::max(top, std::accumulate(p.begin(), p.end(), 0));
    }
    for_each_reachable(top, [&](const LatticePoint& x, int) {
      if (is_boundary(x)) out.push_back(x);
    });
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  using Rule = std::variant<CoordinateRule, TotalRule, PointSet>;

  SamplingPlan(int dim, Rule rule) : dim_(dim), rule_(std::move(rule)) {}

  static void check_dim(int dim) {
    if (dim < 2) throw DomainError("sampling plans need dimension >= 2");
  }

  // Visits every point with total <= top reachable from the origin without an
  // earlier boundary hit (boundary points included, not expanded).
  template <class F>
  void for_each_reachable(int top, F&& visit) const {
    std::set<LatticePoint> frontier{LatticePoint(dim_, 0)};
    for (int total = 0; total <= top && !frontier.empty(); ++total) {
      std::set<LatticePoint> next;
      for (const auto& x : frontier) {
        visit(x, total);
        if (is_boundary(x)) continue;
        for (int i = 0; i < dim_; ++i) {
          LatticePoint y = x;
          ++y[i];
          next.insert(std::move(y));
        }
      }
      frontier = std::move(next);
    }
  }

  int dim_;
  Rule rule_;
};

// ---------------------------------------------------------------------------
// Inverse multinomial pmf

namespace detail {

inline void check_mu(std::span<const double> mu, std::span<const int> x) {
  if (mu.size() != x.size()) throw DomainError("pmf_imn: x and mu dimensions differ");
  double total = 0.0;
  for (double m : mu) {
    if (!(m >= 0.0)) throw DomainError("pmf_imn: probabilities must be nonnegative");
    total += m;
  }
  if (!(total < 1.0)) throw DomainError("pmf_imn: probabilities must sum to less than 1");
}

}  // namespace detail

/// P(X = x) for X ~ IMN_t(c, mu): multinomial(c + |x| - 1; c - 1, x) mu0^c prod mu_i^x_i.
inline double pmf_imn(std::span<const int> x, int c, std::span<const double> mu) {
  if (c < 1) throw DomainError("pmf_imn: c must be >= 1");
  detail::check_mu(mu, x);
  double mu0 = 1.0 - std::accumulate(mu.begin(), mu.end(), 0.0);
  int n = 0;
  double log_p = c * std::log(mu0) - std::lgamma(static_cast<double>(c));
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] < 0) throw DomainError("pmf_imn: counts must be nonnegative");
    if (x[i] == 0) continue;
    if (mu[i] == 0.0) return 0.0;
    log_p += x[i] * std::log(mu[i]) - std::lgamma(x[i] + 1.0);
    n += x[i];
  }
  log_p += std::lgamma(static_cast<double>(c + n));
  return std::exp(log_p);
}

inline double pmf_imn(std::initializer_list<int> x, int c, std::initializer_list<double> mu) {
  return pmf_imn(std::span<const int>(x.begin(), x.size()), c, std::span<const double>(mu.begin(), mu.size()));
}

/// Exact-rational pmf.
inline Rational pmf_imn_exact(std::span<const int> x, int c, std::span<const Rational> mu) {
  if (c < 1) throw DomainError("pmf_imn: c must be >= 1");
  Rational mu0(1);
  for (const auto& m : mu) {
    if (m < 0) throw DomainError("pmf_imn: probabilities must be nonnegative");
    mu0 -= m;
  }
  if (!(mu0 > 0)) throw DomainError("pmf_imn: probabilities must sum to less than 1");
  // multinomial coefficient as a product of binomials
  BigInt coef = 1;
  int n = c - 1;
  Rational mono = ipow(mu0, c);
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (int m = 1; m <= x[i]; ++m) {
      ++n;
      coef = coef * n / m;  // stays integral: running product of binomials
    }
    mono *= ipow(mu[i], x[i]);
  }
  return Rational(coef) * mono;
}

// ---------------------------------------------------------------------------
// Simulation

struct WalkOutcome {
  LatticePoint terminal;
  long steps = 0;
};

inline constexpr long kDefaultStepCap = 10'000'000;

/// One random walk from the origin until the plan's boundary. The outcome is
/// a pure function of (seed, replicate_index).
inline WalkOutcome simulate(const SamplingPlan& plan, std::span<const double> step_probs, std::uint64_t seed,
                            std::uint64_t replicate_index, long step_cap = kDefaultStepCap) {
  if (static_cast<int>(step_probs.size()) != plan.dim()) throw DomainError("simulate: step_probs dimension mismatch");
  double total = 0.0;
  for (double p : step_probs) {
    if (!(p >= 0.0)) throw DomainError("simulate: step probabilities must be nonnegative");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-12) throw DomainError("simulate: step probabilities must sum to 1");

  std::mt19937_64 rng(mix64(seed ^ mix64(replicate_index)));
  std::vector<double> cumulative(step_probs.size());
  std::partial_sum(step_probs.begin(), step_probs.end(), cumulative.begin());
  const int last = plan.dim() - 1;

  WalkOutcome out{LatticePoint(plan.dim(), 0), 0};
  while (!plan.is_boundary(out.terminal)) {
    if (out.steps >= step_cap) {
      throw StepCapExceeded("simulate: no boundary hit after " + std::to_string(step_cap) + " steps");
    }
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    int axis = 0;
    while (axis < last && !(u < cumulative[axis])) ++axis;
    // never step along a zero-probability axis because of rounding in the cumulative sum
    while (step_probs[axis] == 0.0 && axis > 0) --axis;
    ++out.terminal[axis];
    ++out.steps;
  }
  return out;
}

inline WalkOutcome simulate(const SamplingPlan& plan, std::initializer_list<double> step_probs, std::uint64_t seed,
                            std::uint64_t replicate_index, long step_cap = kDefaultStepCap) {
  return simulate(plan, std::span<const double>(step_probs.begin(), step_probs.size()), seed, replicate_index,
                  step_cap);
}

// ---------------------------------------------------------------------------
// Path counting

/// Number of lattice walks from the origin that first meet the boundary at `point`.
inline BigInt path_count(const SamplingPlan& plan, std::span<const int> point) {
  if (static_cast<int>(point.size()) != plan.dim()) throw DomainError("path_count: dimension mismatch");
  if (!plan.is_boundary(point)) throw DomainError("path_count: point is not a boundary point");
  const int d = plan.dim();
  // mixed-radix box [0, point]; predecessors always have a smaller flat index
  std::vector<std::size_t> stride(d);
  std::size_t size = 1;
  for (int i = d - 1; i >= 0; --i) {
    stride[i] = size;
    size *= static_cast<std::size_t>(point[i]) + 1;
  }
  std::vector<BigInt> count(size);
  std::vector<char> stops(size);
  LatticePoint x(d, 0);
  for (std::size_t flat = 0; flat < size; ++flat) {
    std::size_t rem = flat;
    for (int i = 0; i < d; ++i) {
      x[i] = static_cast<int>(rem / stride[i]);
      rem %= stride[i];
    }
    stops[flat] = plan.is_boundary(x);
    if (flat == 0) {
      count[0] = 1;
      continue;
    }
    BigInt k = 0;
    for (int i = 0; i < d; ++i) {
      if (x[i] == 0) continue;
      std::size_t pred = flat - stride[i];
      if (!stops[pred]) k += count[pred];
    }
    count[flat] = std::move(k);
  }
  return count[size - 1];
}

inline BigInt path_count(const SamplingPlan& plan, std::initializer_list<int> point) {
  return path_count(plan, std::span<const int>(point.begin(), point.size()));
}

// ---------------------------------------------------------------------------
// Truncated expectation

struct ExpectationOptions {
  double tol = 1e-10;
  int max_total = 5000;
  /// Known bound on |estimator|; certifies the tail as sup * P(total > N).
  std::optional<double> sup_bound;
  /// Shell window for the decay-ratio diagnostic of unbounded estimators.
  int decay_window = 10;
};

struct ExpectationResult {
  std::vector<double> value;
  /// Certified bound if `certified`, otherwise a geometric extrapolation of the shell terms.
  double tail_bound = 0.0;
  bool certified = false;
  /// Tail estimate fell below tol before max_total.
  bool converged = false;
  int total_reached = -1;
  /// P(total > total_reached)
  double tail_mass = 1.0;
  /// Per-shell decay ratio of the largest shell contribution (uncertified mode).
  double decay_ratio = 0.0;
};

/// P(T > n) for the total non-reference count T of IMN_t(c, mu).
inline double imn_total_tail(int c, double mu0, int n) {
  if (n < 0) return 1.0;
  return boost::math::ibetac(static_cast<double>(c), static_cast<double>(n) + 1.0, mu0);
}

/// Visits every x with x.size() parts summing to n, last coordinate fastest.
template <class F>
void for_each_composition(int n, std::vector<int>& x, F&& visit) {
  const int t = static_cast<int>(x.size());
  std::fill(x.begin(), x.end(), 0);
  x[t - 1] = n;
  while (true) {
    visit(std::span<const int>(x));
    // odometer over the first t - 1 coordinates; the last takes the remainder
    int i = t - 2;
    while (i >= 0) {
      int head = 0;
      for (int j = 0; j <= i; ++j) head += x[j];
      if (head < n) {
        ++x[i];
        break;
      }
      x[i] = 0;
      --i;
    }
    if (i < 0) return;
    int used = 0;
    for (int j = 0; j < t - 1; ++j) used += x[j];
    x[t - 1] = n - used;
  }
}

/// Sum of estimate * pmf over sample points shell by shell (shell n = all x
/// with |x| = n) until the tail is below tol or max_total is reached.
/// `estimator(x, out)` writes `components` values.
template <class F>
ExpectationResult truncated_expectation(F&& estimator, int components, int c, std::span<const double> mu,
                                        const ExpectationOptions& opt = {}) {
  if (c < 1) throw DomainError("truncated_expectation: c must be >= 1");
  const int t = static_cast<int>(mu.size());
  if (t < 1) throw DomainError("truncated_expectation: need at least one non-reference class");
  {
    std::vector<int> probe(t, 0);
    detail::check_mu(mu, probe);
  }
  const double mu0 = 1.0 - std::accumulate(mu.begin(), mu.end(), 0.0);
  std::vector<double> log_mu(t);
  for (int i = 0; i < t; ++i) log_mu[i] = mu[i] > 0.0 ? std::log(mu[i]) : -INFINITY;

  std::vector<double> log_fact(static_cast<std::size_t>(opt.max_total) + c + 1);
  for (std::size_t m = 0; m < log_fact.size(); ++m) log_fact[m] = std::lgamma(static_cast<double>(m) + 1.0);
  const double log_head = c * std::log(mu0) - log_fact[c - 1];

  std::vector<Accumulator<double>> total(components);
  std::vector<double> shell(components);
  std::vector<double> out(components);
  std::vector<double> shell_size;  // max |shell contribution| per shell
  std::vector<int> x(t, 0);

  ExpectationResult res;
  for (int n = 0; n <= opt.max_total; ++n) {
    std::vector<Accumulator<double>> shell_acc(components);
    const double log_shell = log_fact[c + n - 1] + log_head;
    for_each_composition(n, x, [&](std::span<const int> pt) {
      double lp = log_shell;
      for (int i = 0; i < t; ++i) {
        if (pt[i] == 0) continue;
        if (mu[i] == 0.0) return;
        lp += pt[i] * log_mu[i] - log_fact[pt[i]];
      }
      const double w = std::exp(lp);
      estimator(pt, std::span<double>(out));
      for (int j = 0; j < components; ++j) shell_acc[j].add(out[j] * w);
    });
    double size = 0.0;
    for (int j = 0; j < components; ++j) {
      shell[j] = shell_acc[j].value();
      total[j].add(shell[j]);
      size = std::max(size, std::abs(shell[j]));
    }
    shell_size.push_back(size);
    res.total_reached = n;
    res.tail_mass = imn_total_tail(c, mu0, n);

    if (opt.sup_bound) {
      res.certified = true;
      res.tail_bound = *opt.sup_bound * res.tail_mass;
      if (res.tail_bound <= opt.tol) {
        res.converged = true;
        break;
      }
    } else {
      const int w = opt.decay_window;
      if (n >= w && shell_size[n - w] > 0.0 && size > 0.0) {
        res.decay_ratio = std::pow(size / shell_size[n - w], 1.0 / w);
        if (res.decay_ratio < 1.0) {
          res.tail_bound = size * res.decay_ratio / (1.0 - res.decay_ratio);
          if (res.tail_bound <= opt.tol && res.tail_mass <= 1e-3) {
            res.converged = true;
            break;
          }
        } else {
          res.tail_bound = INFINITY;
        }
      } else if (n >= w && size == 0.0 && res.tail_mass <= opt.tol) {
        res.tail_bound = 0.0;
        res.converged = true;
        break;
      }
    }
  }
  res.value.resize(components);
  for (int j = 0; j < components; ++j) res.value[j] = total[j].value();
  return res;
}

// ---------------------------------------------------------------------------
// Diagnostics for two-dimensional plans

struct AxisCheck {
  int count_on_axis = 0;
  bool passes = false;
};

/// Boundary points on the y axis (x = 0) that a walk can reach. An unbiased
/// estimator of p requires exactly one.
inline AxisCheck axis_boundary_check(const SamplingPlan& plan) {
  if (plan.dim() != 2) throw DomainError("axis_boundary_check: needs a two-dimensional plan");
  AxisCheck out;
  if (auto* r = plan.coordinate()) {
    out.count_on_axis = r->axis == 1 ? 1 : 0;
  } else if (plan.total_rule()) {
    out.count_on_axis = 1;
  } else {
    int top = 0;
    for (const auto& p : *plan.points()) top = std::max(top, p[1]);
    // the walk along the axis stops at its first boundary point
    for (int y = 0; y <= top; ++y) {
      if (plan.is_boundary(LatticePoint{0, y})) {
        out.count_on_axis = 1;
        break;
      }
    }
  }
  out.passes = out.count_on_axis == 1;
  return out;
}

/// q = h(theta) = ((pi1 - theta) / nu)^(1/k)
struct QTarget {
  int k = 1;
  double pi0 = 1.0;
  double pi1 = 1.0;

  double operator()(double theta) const {
    return std::pow((pi1 - theta) / (pi0 + pi1 - 1.0), 1.0 / k);
  }
};

struct PolyFitResult {
  double max_residual = 0.0;
  std::vector<LatticePoint> points;
  std::vector<double> coefficients;  // estimator value f at each boundary point
  int rank = 0;
  bool rank_deficient = false;
};

/// Least-squares fit of sum_b f(b) K(b) theta^x (1 - theta)^y to h(theta) on
/// a Chebyshev grid over [1 - pi0 + delta, pi1 - delta]. A finite plan admits
/// an unbiased estimator of h only if the residual vanishes.
inline PolyFitResult poly_representability(const SamplingPlan& plan, const QTarget& target, int grid_size = 200,
                                           double delta = 0.05) {
  if (plan.dim() != 2) throw DomainError("poly_representability: needs a two-dimensional plan");
  if (grid_size < 2) throw DomainError("poly_representability: grid too small");
  PolyFitResult res;
  res.points = plan.finite_boundary();
  const double lo = 1.0 - target.pi0 + delta;
  const double hi = target.pi1 - delta;
  if (!(lo < hi)) throw DomainError("poly_representability: empty theta domain");

  const Eigen::Index rows = grid_size;
  const Eigen::Index cols = static_cast<Eigen::Index>(res.points.size());
  Eigen::MatrixXd design(rows, cols);
  Eigen::VectorXd h(rows);
  std::vector<double> weight(res.points.size());
  for (std::size_t b = 0; b < res.points.size(); ++b) weight[b] = path_count(plan, res.points[b]).convert_to<double>();
  const double pi = std::acos(-1.0);
  for (Eigen::Index j = 0; j < rows; ++j) {
    const double theta = 0.5 * (lo + hi) + 0.5 * (hi - lo) * std::cos(pi * (2.0 * j + 1.0) / (2.0 * rows));
    h(j) = target(theta);
    for (Eigen::Index b = 0; b < cols; ++b) {
      const auto& p = res.points[b];
      design(j, b) = weight[b] * std::pow(theta, p[0]) * std::pow(1.0 - theta, p[1]);
    }
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  res.rank = static_cast<int>(qr.rank());
  res.rank_deficient = res.rank < cols;
  Eigen::VectorXd f = qr.solve(h);
  res.max_residual = (design * f - h).cwiseAbs().maxCoeff();
  res.coefficients.assign(f.data(), f.data() + f.size());
  return res;
}

// ---------------------------------------------------------------------------
// Plan files: "dim <d>" then one boundary point per line; "#" starts a comment.

inline SamplingPlan parse_plan(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  int dim = -1;
  SamplingPlan::PointSet points;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    std::string first;
    if (!(fields >> first)) continue;
    if (dim < 0) {
      if (first != "dim" || !(fields >> dim) || dim < 2) throw PlanFormatError(line_no, "expected 'dim <d>' with d >= 2");
      std::string extra;
      if (fields >> extra) throw PlanFormatError(line_no, "trailing text after dim");
      continue;
    }
    LatticePoint p;
    std::istringstream values(line);
    std::string tok;
    while (values >> tok) {
      std::size_t used = 0;
      int v = -1;
      try {
        v = std::stoi(tok, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != tok.size() || v < 0) throw PlanFormatError(line_no, "'" + tok + "' is not a nonnegative integer");
      p.push_back(v);
    }
    if (static_cast<int>(p.size()) != dim) {
      throw PlanFormatError(line_no, "expected " + std::to_string(dim) + " coordinates");
    }
    points.insert(std::move(p));
  }
  if (dim < 0) throw PlanFormatError(line_no, "missing 'dim' header");
  if (points.empty()) throw PlanFormatError(line_no, "no boundary points");
  return SamplingPlan::from_points(dim, std::move(points));
}

inline std::string format_plan(const SamplingPlan& plan) {
  std::vector<LatticePoint> pts;
  if (plan.points()) {
    pts.assign(plan.points()->begin(), plan.points()->end());
  } else {
    pts = plan.finite_boundary();
  }
  std::ostringstream out;
  out << "dim " << plan.dim() << '\n';
  for (const auto& p : pts) {
    for (std::size_t i = 0; i < p.size(); ++i) out << (i ? " " : "") << p[i];
    out << '\n';
  }
  return out.str();
}

}  // namespace gtseq
