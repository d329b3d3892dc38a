#pragma once

// Closed-form unbiased prevalence estimators under inverse (binomial and
// multinomial) sampling, plug-in MLE baselines, and the properness scanner.

#include "gtseq/model.hpp"
#include "gtseq/numeric.hpp"
#include "gtseq/parallel.hpp"
#include "gtseq/series.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace gtseq {

using SamplePoint3 = std::array<int, 3>;

// ---------------------------------------------------------------------------
// One disease, perfect test

/// Unbiased estimate of q = 1 - p after y positive pools.
/// The displayed prefactor 1/(1 - 1/(k(c+y))) cancels the i = y factor of the
/// product; the cancelled form is also defined at k = c = 1.
template <class S = double>
S qhat_one_perfect(int y, int c, int k) {
  S q(1);
  for (int i = 0; i < y; ++i) q *= S(1) - S(1) / (S(k) * S(c + i));
  return q;
}

template <class S = double>
S ub_one_perfect(int y, int c, int k) {
  return S(1) - qhat_one_perfect<S>(y, c, k);
}

// ---------------------------------------------------------------------------
// One disease, known misclassification

/// The sum multiplying (pi1/nu)^(1/k) in the unbiased estimate of q:
///   sum_i C(y,i) pi1^-(y-i) (c+i-1)!/(c+y-1)! prod_{l=0}^{y-i-1} (l - 1/k).
/// Terms are generated downward from i = y (term 1) by their exact ratio.
template <class S>
S misclass_one_sum(int y, int c, int k, const S& pi1) {
  const S xi = S(1) / S(k);
  Accumulator<S> acc;
  S term(1);
  acc.add(term);
  for (int i = y - 1; i >= 0; --i) {
    term = term * S(i + 1) / S(y - i) / pi1 / S(c + i) * (S(y - i - 1) - xi);
    if (term == S(0)) break;  // k = 1: every lower term carries the zero factor (1 - 1/k)
    acc.add(term);
  }
  return acc.value();
}

/// Unbiased (improper) estimate of p under misclassification. Floats are
/// accumulated in long double; rationals require (pi1/nu)^(1/k) rational.
template <class S = double>
S ub_one_misclass(int y, int c, int k, const S& pi0, const S& pi1) {
  const S nu = pi0 + pi1 - S(1);
  if (!(nu > S(0))) throw IdentifiabilityError("ub_one_misclass: requires nu = pi0 + pi1 - 1 > 0");
  if constexpr (is_exact_v<S>) {
    return S(1) - kth_root(S(pi1 / nu), k) * misclass_one_sum<S>(y, c, k, pi1);
  } else {
    using L = long double;
    const L pref = std::pow(static_cast<L>(pi1) / static_cast<L>(nu), L(1) / L(k));
    return static_cast<S>(L(1) - pref * misclass_one_sum<L>(y, c, k, static_cast<L>(pi1)));
  }
}

// ---------------------------------------------------------------------------
// Two diseases, perfect test

namespace detail {

/// prod_{j=0}^{m-1} (1 - xi/(c + s + j))
template <class S>
S shifted_product(int m, int s, int c, int k) {
  S out(1);
  for (int j = 0; j < m; ++j) out *= S(1) - S(1) / (S(k) * S(c + s + j));
  return out;
}

}  // namespace detail

/// Unbiased estimate of (p00, p10, p01, p11) from z = (z10, z01, z11).
/// As in the one-disease case the prefactor cancels the last product factor.
template <class S = double>
Cells<S> ub_two_perfect(const SamplePoint3& z, int c, int k) {
  const int n = z[0] + z[1] + z[2];
  S p00 = detail::shifted_product<S>(n, 0, c, k);
  S p10 = detail::shifted_product<S>(n - z[0], z[0], c, k) - p00;
  S p01 = detail::shifted_product<S>(n - z[1], z[1], c, k) - p00;
  return {p00, p10, p01, S(S(1) - p00 - p10 - p01)};
}

// ---------------------------------------------------------------------------
// Two diseases, known misclassification (series construction)

/// Unbiased estimates for all sample points up to `order`, from one series build.
class UbTwoMisclassSeries {
 public:
  UbTwoMisclassSeries(int k, int c, const MisclassModel<double>& misclass, int order)
      : c_(c), g_(build_g_two<double>(k, c, misclass, order)) {}

  int order() const { return g_[0].order(); }

  Cells<double> operator()(const SamplePoint3& z) const {
    Cells<double> out{};
    Accumulator<double> sum;
    for (int a = 0; a < 3; ++a) {
      out[a] = series_estimator(g_[a], c_, std::span<const int>(z));
      sum.add(out[a]);
    }
    out[k11] = 1.0 - sum.value();
    return out;
  }

 private:
  int c_;
  std::array<TruncatedSeries<double>, 4> g_;
};

inline Cells<double> ub_two_misclass(const SamplePoint3& z, const TwoDiseaseModel<double>& model, int order) {
  if (!model.misclass()) throw DomainError("ub_two_misclass: model has no misclassification table");
  if (z[0] + z[1] + z[2] > order) throw InsufficientOrderError("ub_two_misclass: sample total exceeds series order");
  return UbTwoMisclassSeries(model.k(), model.c(), *model.misclass(), order)(z);
}

// ---------------------------------------------------------------------------
// Plug-in MLE baselines

struct MleOneResult {
  double p_hat = 0.0;
  bool clamped = false;
};

inline MleOneResult mle_one(int y, int c, int k, double pi0 = 1.0, double pi1 = 1.0) {
  const double nu = pi0 + pi1 - 1.0;
  if (!(nu > 0.0)) throw IdentifiabilityError("mle_one: requires nu > 0");
  const double theta = static_cast<double>(y) / static_cast<double>(c + y);
  if (theta >= pi1) return {1.0, true};
  const double p = 1.0 - std::pow((pi1 - theta) / nu, 1.0 / k);
  if (p < 0.0) return {0.0, true};
  if (p > 1.0) return {1.0, true};
  return {p, false};
}

struct MleTwoResult {
  Cells<double> p_hat{};
  bool clamped = false;
};

inline MleTwoResult mle_two(const SamplePoint3& z, int c, int k) {
  const double total = static_cast<double>(c + z[0] + z[1] + z[2]);
  const double t10 = z[0] / total, t01 = z[1] / total, t11 = z[2] / total;
  MleTwoResult out;
  auto root = [&](double r) {
    if (r <= 0.0) {
      out.clamped = true;
      return 0.0;
    }
    return std::pow(r, 1.0 / k);
  };
  auto unit = [&](double v) {
    if (v < 0.0 || v > 1.0) out.clamped = true;
    return std::clamp(v, 0.0, 1.0);
  };
  const double p00 = unit(root(1.0 - t10 - t01 - t11));
  double p10 = unit(root(1.0 - t01 - t11) - p00);
  double p01 = unit(root(1.0 - t10 - t11) - p00);
  double head = p00 + p10 + p01;
  if (head > 1.0) {
    out.clamped = true;
    out.p_hat = {p00 / head, p10 / head, p01 / head, 0.0};
  } else {
    out.p_hat = {p00, p10, p01, 1.0 - head};
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dispatch

enum class EstimatorId { UbOnePerfect, UbOneMisclass, UbTwoPerfect, UbTwoMisclassSeries, MleOne, MleTwo };

inline constexpr std::array<EstimatorId, 6> kAllEstimators = {
    EstimatorId::UbOnePerfect, EstimatorId::UbOneMisclass, EstimatorId::UbTwoPerfect,
    EstimatorId::UbTwoMisclassSeries, EstimatorId::MleOne, EstimatorId::MleTwo};

inline std::string_view to_string(EstimatorId id) {
  switch (id) {
    case EstimatorId::UbOnePerfect: return "UB_ONE_PERFECT";
    case EstimatorId::UbOneMisclass: return "UB_ONE_MISCLASS";
    case EstimatorId::UbTwoPerfect: return "UB_TWO_PERFECT";
    case EstimatorId::UbTwoMisclassSeries: return "UB_TWO_MISCLASS_SERIES";
    case EstimatorId::MleOne: return "MLE_ONE";
    case EstimatorId::MleTwo: return "MLE_TWO";
  }
  return "?";
}

inline std::optional<EstimatorId> parse_estimator_id(std::string_view text) {
  for (EstimatorId id : kAllEstimators) {
    if (to_string(id) == text) return id;
  }
  return std::nullopt;
}

inline bool is_two_disease(EstimatorId id) {
  return id == EstimatorId::UbTwoPerfect || id == EstimatorId::UbTwoMisclassSeries || id == EstimatorId::MleTwo;
}

inline bool is_unbiased(EstimatorId id) { return id != EstimatorId::MleOne && id != EstimatorId::MleTwo; }

struct EstimatorSpec {
  EstimatorId id = EstimatorId::UbOnePerfect;
  int k = 1;
  int c = 1;
  double pi0 = 1.0;  // one disease
  double pi1 = 1.0;
  std::optional<MisclassModel<double>> misclass;  // two diseases
  int order = 64;                                  // series-based estimators
};

enum EstimateFlag : unsigned { kFlagNone = 0u, kFlagClamped = 1u };

/// Immutable, thread-safe evaluator for one estimator configuration.
class Estimator {
 public:
  /// Prefix products are tabulated up to this total; larger samples fall back to direct products.
  static constexpr int kTableSize = 1 << 16;

  explicit Estimator(EstimatorSpec spec) : spec_(std::move(spec)) {
    if (spec_.k < 1 || spec_.c < 1) throw DomainError("estimator: k and c must be >= 1");
    switch (spec_.id) {
      case EstimatorId::UbOnePerfect:
      case EstimatorId::UbTwoPerfect:
        if (spec_.k > 1) {
          auto table = std::make_shared<std::vector<double>>(kTableSize + 1);
          (*table)[0] = 1.0;
          for (int j = 0; j < kTableSize; ++j) {
            (*table)[j + 1] = (*table)[j] * (1.0 - 1.0 / (static_cast<double>(spec_.k) * (spec_.c + j)));
          }
          prefix_ = std::move(table);
        }
        break;
      case EstimatorId::UbOneMisclass:
      case EstimatorId::MleOne:
        if (!(spec_.pi0 + spec_.pi1 - 1.0 > 0.0)) throw IdentifiabilityError("estimator: requires pi0 + pi1 > 1");
        break;
      case EstimatorId::UbTwoMisclassSeries:
        series_ = std::make_shared<const UbTwoMisclassSeries>(
            spec_.k, spec_.c, spec_.misclass.value_or(MisclassModel<double>::identity()), spec_.order);
        break;
      case EstimatorId::MleTwo:
        break;
    }
  }

  const EstimatorSpec& spec() const { return spec_; }
  EstimatorId id() const { return spec_.id; }
  int dim() const { return is_two_disease(spec_.id) ? 3 : 1; }
  int components() const { return is_two_disease(spec_.id) ? 4 : 1; }

  std::vector<std::string> component_names() const {
    if (!is_two_disease(spec_.id)) return {"p"};
    return {"p00", "p10", "p01", "p11"};
  }

  /// Largest |estimate| over all sample points, where known analytically.
  std::optional<double> sup_bound() const {
    switch (spec_.id) {
      case EstimatorId::UbOnePerfect:
      case EstimatorId::MleOne:
      case EstimatorId::MleTwo:
        return 1.0;
      case EstimatorId::UbTwoPerfect:
        // p00, p10, p01 lie in [0, 1]; p11 = 1 - A10 - A01 + p00 lies in (-1, 2)
        return 2.0;
      default:
        return std::nullopt;
    }
  }

  /// Evaluates the estimate at sample point x into out[0 .. components()).
  unsigned operator()(std::span<const int> x, std::span<double> out) const {
    switch (spec_.id) {
      case EstimatorId::UbOnePerfect:
        out[0] = 1.0 - product(x[0], 0);
        return kFlagNone;
      case EstimatorId::UbOneMisclass:
        out[0] = ub_one_misclass<double>(x[0], spec_.c, spec_.k, spec_.pi0, spec_.pi1);
        return kFlagNone;
      case EstimatorId::MleOne: {
        auto r = mle_one(x[0], spec_.c, spec_.k, spec_.pi0, spec_.pi1);
        out[0] = r.p_hat;
        return r.clamped ? kFlagClamped : kFlagNone;
      }
      case EstimatorId::UbTwoPerfect: {
        const int n = x[0] + x[1] + x[2];
        const double p00 = product(n, 0);
        const double p10 = product(n - x[0], x[0]) - p00;
        const double p01 = product(n - x[1], x[1]) - p00;
        out[0] = p00;
        out[1] = p10;
        out[2] = p01;
        out[3] = 1.0 - p00 - p10 - p01;
        return kFlagNone;
      }
      case EstimatorId::UbTwoMisclassSeries: {
        auto v = (*series_)({x[0], x[1], x[2]});
        std::copy(v.begin(), v.end(), out.begin());
        return kFlagNone;
      }
      case EstimatorId::MleTwo: {
        auto r = mle_two({x[0], x[1], x[2]}, spec_.c, spec_.k);
        std::copy(r.p_hat.begin(), r.p_hat.end(), out.begin());
        return r.clamped ? kFlagClamped : kFlagNone;
      }
    }
    return kFlagNone;
  }

  std::vector<double> operator()(std::span<const int> x) const {
    std::vector<double> out(components());
    (*this)(x, out);
    return out;
  }

 private:
  // prod_{j=0}^{m-1} (1 - 1/(k(c + s + j)))
  double product(int m, int s) const {
    if (m == 0) return 1.0;
    if (spec_.k == 1) {
      // telescopes to (c + s - 1) / (c + s + m - 1)
      return static_cast<double>(spec_.c + s - 1) / static_cast<double>(spec_.c + s + m - 1);
    }
    if (s + m <= kTableSize) return (*prefix_)[s + m] / (*prefix_)[s];
    return detail::shifted_product<double>(m, s, spec_.c, spec_.k);
  }

  EstimatorSpec spec_;
  std::shared_ptr<const std::vector<double>> prefix_;
  std::shared_ptr<const UbTwoMisclassSeries> series_;
};

// ---------------------------------------------------------------------------
// Properness scanning

enum class BoundKind { BelowZero, AboveOne, SimplexSumAboveOne };

inline std::string_view to_string(BoundKind b) {
  switch (b) {
    case BoundKind::BelowZero: return "below-0";
    case BoundKind::AboveOne: return "above-1";
    case BoundKind::SimplexSumAboveOne: return "simplex-sum-gt-1";
  }
  return "?";
}

struct PropernessViolation {
  std::vector<int> sample;
  std::string component;
  double value = 0.0;
  BoundKind bound = BoundKind::BelowZero;
};

namespace detail {

template <class S>
void check_components(std::span<const int> x, std::span<const S> values, const std::vector<std::string>& names,
                      const S& tol, std::vector<PropernessViolation>& out) {
  std::vector<int> sample(x.begin(), x.end());
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] < S(0) - tol) {
      out.push_back({sample, names[i], to_double(values[i]), BoundKind::BelowZero});
    } else if (values[i] > S(1) + tol) {
      out.push_back({sample, names[i], to_double(values[i]), BoundKind::AboveOne});
    }
  }
  if (values.size() == 4) {
    S head = values[0] + values[1] + values[2];
    if (head > S(1) + tol) out.push_back({sample, "p00+p10+p01", to_double(head), BoundKind::SimplexSumAboveOne});
  }
}

}  // namespace detail

/// Every component outside [0,1] (and every two-disease p00+p10+p01 > 1) over
/// all sample points with total count <= bound, in lexicographic order.
/// `tolerance` absorbs float rounding of exact boundary values.
inline std::vector<PropernessViolation> scan_properness(const Estimator& est, int bound, double tolerance = 1e-12,
                                                        int threads = 1) {
  if (bound < 0) return {};
  const auto names = est.component_names();
  // one task per leading coordinate value keeps the lexicographic merge trivial
  std::vector<std::vector<PropernessViolation>> parts(static_cast<std::size_t>(bound) + 1);
  if (est.dim() == 1) {
    parts.assign(1, {});
    std::vector<double> v(1);
    for (int y = 0; y <= bound; ++y) {
      int x[1] = {y};
      est(x, v);
      detail::check_components<double>(x, v, names, tolerance, parts[0]);
    }
  } else {
    parallel_for(parts.size(), threads, [&](std::size_t task) {
      const int z10 = static_cast<int>(task);
      std::vector<double> v(4);
      for (int z01 = 0; z10 + z01 <= bound; ++z01) {
        for (int z11 = 0; z10 + z01 + z11 <= bound; ++z11) {
          int x[3] = {z10, z01, z11};
          est(x, v);
          detail::check_components<double>(x, v, names, tolerance, parts[task]);
        }
      }
    });
  }
  std::vector<PropernessViolation> out;
  for (auto& p : parts) out.insert(out.end(), std::make_move_iterator(p.begin()), std::make_move_iterator(p.end()));
  return out;
}

/// Exact-rational scan for the closed-form estimators. UB_ONE_MISCLASS needs a
/// rational (pi1/nu)^(1/k).
inline std::vector<PropernessViolation> scan_properness_exact(EstimatorId id, int c, int k, const Rational& pi0,
                                                              const Rational& pi1, int bound) {
  std::vector<PropernessViolation> out;
  const Rational zero(0);
  switch (id) {
    case EstimatorId::UbOnePerfect: {
      Rational q(1);
      for (int y = 0; y <= bound; ++y) {
        if (y > 0) q *= Rational(1) - Rational(1) / Rational(k * (c + y - 1));
        Rational p = Rational(1) - q;
        int x[1] = {y};
        detail::check_components<Rational>(x, std::span<const Rational>(&p, 1), {"p"}, zero, out);
      }
      break;
    }
    case EstimatorId::UbOneMisclass: {
      for (int y = 0; y <= bound; ++y) {
        Rational p = ub_one_misclass<Rational>(y, c, k, pi0, pi1);
        int x[1] = {y};
        detail::check_components<Rational>(x, std::span<const Rational>(&p, 1), {"p"}, zero, out);
      }
      break;
    }
    case EstimatorId::UbTwoPerfect: {
      const std::vector<std::string> names = {"p00", "p10", "p01", "p11"};
      for (int a = 0; a <= bound; ++a) {
        for (int b = 0; a + b <= bound; ++b) {
          for (int d = 0; a + b + d <= bound; ++d) {
            auto v = ub_two_perfect<Rational>({a, b, d}, c, k);
            int x[3] = {a, b, d};
            detail::check_components<Rational>(x, std::span<const Rational>(v), names, zero, out);
          }
        }
      }
      break;
    }
    default:
      throw DomainError("scan_properness_exact: only closed-form unbiased estimators are supported");
  }
  return out;
}

}  // namespace gtseq
