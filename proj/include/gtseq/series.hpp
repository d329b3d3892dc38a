#pragma once

// Truncated multivariate power series and the coefficient-to-estimator map
// for inverse multinomial sampling.
//
// Under IMN_t(c, mu), the unique unbiased estimator of h(mu) at sample x is
//   f(x) = a_x * prod(x_i!) * (c-1)! / (c + |x| - 1)!
// where a_x is the Taylor coefficient of g(mu) = h(mu) / mu0^c at mu^x.
// Every h needed here is a signed sum of products of affine-form powers, so
// g is assembled from expand_affine_power and series_mul alone.

#include "gtseq/model.hpp"
#include "gtseq/numeric.hpp"

#include <algorithm>
#include <cstdint>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <vector>

namespace gtseq {

/// Enumeration of all multi-indices of dimension `dim` with total degree
/// <= `order`, graded by degree. Within one degree the first coordinate is
/// descending. Every prefix [0, offset(d + 1)) holds exactly the indices of
/// degree <= d.
class GradedLayout {
 public:
  GradedLayout(int dim, int order) : dim_(dim), order_(order) {
    if (dim < 1) throw DomainError("series dimension must be >= 1");
    if (order < 0) throw DomainError("series order must be >= 0");
    const int n_max = order + dim + 1;
    binom_.assign(static_cast<std::size_t>(n_max + 1) * (dim + 1), 0);
    for (int n = 0; n <= n_max; ++n) {
      for (int r = 0; r <= dim && r <= n; ++r) {
        binom_at(n, r) = (r == 0 || r == n) ? 1 : binom_at(n - 1, r - 1) + (r <= n - 1 ? binom_at(n - 1, r) : 0);
      }
    }
    offsets_.resize(order + 2);
    for (int d = 0; d <= order + 1; ++d) offsets_[d] = d == 0 ? 0 : binom(d - 1 + dim, dim);
    exps_.reserve(size() * dim);
    std::vector<int> x(dim, 0);
    for (int d = 0; d <= order; ++d) emit(x, 0, d);
  }

  int dim() const { return dim_; }
  int order() const { return order_; }
  std::size_t size() const { return offsets_[order_ + 1]; }
  /// Number of indices with degree < d.
  std::size_t offset(int d) const { return offsets_[std::min(d, order_ + 1)]; }

  std::span<const int> at(std::size_t r) const { return {exps_.data() + r * dim_, static_cast<std::size_t>(dim_)}; }
  int degree(std::size_t r) const {
    auto x = at(r);
    return std::accumulate(x.begin(), x.end(), 0);
  }

  std::size_t rank(std::span<const int> x) const {
    int d = std::accumulate(x.begin(), x.end(), 0);
    std::size_t r = offsets_[d];
    int rem = d;
    for (int i = 0; i + 1 < dim_; ++i) {
      int room = rem - x[i];
      if (room > 0) r += binom(room - 1 + dim_ - 1 - i, dim_ - 1 - i);
      rem -= x[i];
    }
    return r;
  }

 private:
  std::uint64_t binom(int n, int r) const { return binom_[static_cast<std::size_t>(n) * (dim_ + 1) + r]; }
  std::uint64_t& binom_at(int n, int r) { return binom_[static_cast<std::size_t>(n) * (dim_ + 1) + r]; }

  void emit(std::vector<int>& x, int i, int rem) {
    if (i == dim_ - 1) {
      x[i] = rem;
      exps_.insert(exps_.end(), x.begin(), x.end());
      return;
    }
    for (int v = rem; v >= 0; --v) {
      x[i] = v;
      emit(x, i + 1, rem - v);
    }
  }

  int dim_;
  int order_;
  std::vector<std::uint64_t> binom_;
  std::vector<std::size_t> offsets_;
  std::vector<int> exps_;
};

template <class S = double>
class TruncatedSeries {
 public:
  TruncatedSeries(int dim, int order)
      : layout_(std::make_shared<const GradedLayout>(dim, order)), coeffs_(layout_->size(), S(0)) {}

  static TruncatedSeries constant(int dim, int order, const S& value) {
    TruncatedSeries s(dim, order);
    s.coeffs_[0] = value;
    return s;
  }

  int dim() const { return layout_->dim(); }
  int order() const { return layout_->order(); }
  const GradedLayout& layout() const { return *layout_; }

  /// Coefficient of mu^x; indices of degree above the order are unknown.
  const S& coeff(std::span<const int> x) const { return coeffs_[checked_rank(x)]; }
  const S& coeff(std::initializer_list<int> x) const { return coeff(std::span<const int>(x.begin(), x.size())); }
  void set(std::span<const int> x, S value) { coeffs_[checked_rank(x)] = std::move(value); }
  void set(std::initializer_list<int> x, S value) { set(std::span<const int>(x.begin(), x.size()), std::move(value)); }

  const S& coeff_at(std::size_t rank) const { return coeffs_[rank]; }
  S& coeff_at(std::size_t rank) { return coeffs_[rank]; }

  /// Same coefficients through degree n <= order.
  TruncatedSeries truncated(int n) const {
    if (n > order()) throw InsufficientOrderError("cannot raise truncation order");
    TruncatedSeries out(dim(), n);
    std::copy_n(coeffs_.begin(), out.coeffs_.size(), out.coeffs_.begin());
    return out;
  }

  TruncatedSeries& operator+=(const TruncatedSeries& o) { return combine(o, S(1)); }
  TruncatedSeries& operator-=(const TruncatedSeries& o) { return combine(o, S(-1)); }
  TruncatedSeries& operator*=(const S& k) {
    for (auto& v : coeffs_) v *= k;
    return *this;
  }

  friend TruncatedSeries operator+(TruncatedSeries a, const TruncatedSeries& b) { return a += b; }
  friend TruncatedSeries operator-(TruncatedSeries a, const TruncatedSeries& b) { return a -= b; }
  friend TruncatedSeries operator*(TruncatedSeries a, const S& k) { return a *= k; }
  friend TruncatedSeries operator*(const S& k, TruncatedSeries a) { return a *= k; }
  friend TruncatedSeries operator*(const TruncatedSeries& a, const TruncatedSeries& b) { return series_mul(a, b); }

  friend bool operator==(const TruncatedSeries& a, const TruncatedSeries& b) {
    return a.dim() == b.dim() && a.order() == b.order() && a.coeffs_ == b.coeffs_;
  }

  /// Cauchy product truncated to min(a.order, b.order).
  friend TruncatedSeries series_mul(const TruncatedSeries& a, const TruncatedSeries& b) {
    if (a.dim() != b.dim()) throw DomainError("series_mul: dimension mismatch");
    const int n = std::min(a.order(), b.order());
    TruncatedSeries out(a.dim(), n);
    const GradedLayout& la = *a.layout_;
    const GradedLayout& lb = *b.layout_;
    const GradedLayout& lo = *out.layout_;
    std::vector<int> sum(a.dim());
    for (std::size_t i = 0; i < la.offset(n + 1); ++i) {
      const S& ai = a.coeffs_[i];
      if (ai == S(0)) continue;
      auto xi = la.at(i);
      const int di = la.degree(i);
      const std::size_t jmax = lb.offset(n - di + 1);
      for (std::size_t j = 0; j < jmax; ++j) {
        const S& bj = b.coeffs_[j];
        if (bj == S(0)) continue;
        auto xj = lb.at(j);
        for (int d = 0; d < a.dim(); ++d) sum[d] = xi[d] + xj[d];
        out.coeffs_[lo.rank(sum)] += ai * bj;
      }
    }
    return out;
  }

 private:
  std::size_t checked_rank(std::span<const int> x) const {
    if (static_cast<int>(x.size()) != dim()) throw DomainError("multi-index dimension mismatch");
    int total = 0;
    for (int v : x) {
      if (v < 0) throw DomainError("multi-index entries must be nonnegative");
      total += v;
    }
    if (total > order()) {
      throw InsufficientOrderError("multi-index of degree " + std::to_string(total) + " exceeds series order " +
                                   std::to_string(order()));
    }
    return layout_->rank(x);
  }

  TruncatedSeries& combine(const TruncatedSeries& o, const S& sign) {
    if (dim() != o.dim()) throw DomainError("series addition: dimension mismatch");
    if (o.order() < order()) *this = truncated(o.order());
    for (std::size_t r = 0; r < coeffs_.size(); ++r) coeffs_[r] += sign * o.coeffs_[r];
    return *this;
  }

  std::shared_ptr<const GradedLayout> layout_;
  std::vector<S> coeffs_;
};

/// Rational exponent num/den, den > 0.
struct Exponent {
  long num = 1;
  long den = 1;
};

/// (intercept + sum_i linear[i] * mu_i)^exponent
template <class S = double>
struct AffinePowerSpec {
  S intercept{1};
  std::vector<S> linear;
  Exponent exponent;
};

/// Generalized binomial expansion of an affine power through total degree N.
/// Exact for rational scalars provided intercept^exponent is rational.
template <class S>
TruncatedSeries<S> expand_affine_power(const AffinePowerSpec<S>& spec, int order) {
  if (!(spec.intercept > S(0))) throw DomainError("expand_affine_power: intercept must be positive");
  if (spec.exponent.den <= 0) throw DomainError("expand_affine_power: exponent denominator must be positive");
  const int dim = static_cast<int>(spec.linear.size());
  TruncatedSeries<S> out(dim, order);

  S lead;
  if (spec.intercept == S(1)) {
    lead = S(1);
  } else if constexpr (is_exact_v<S>) {
    lead = kth_root(ipow(spec.intercept, spec.exponent.num), static_cast<int>(spec.exponent.den));
  } else {
    using std::pow;
    lead = pow(spec.intercept, S(spec.exponent.num) / S(spec.exponent.den));
  }
  const S xi = S(spec.exponent.num) / S(spec.exponent.den);

  // generalized binomial coefficients C(xi, d)
  std::vector<S> gbin(order + 1);
  gbin[0] = S(1);
  for (int d = 1; d <= order; ++d) gbin[d] = gbin[d - 1] * (xi - S(d - 1)) / S(d);

  // powers of the normalized slopes
  std::vector<std::vector<S>> pw(dim, std::vector<S>(order + 1));
  for (int i = 0; i < dim; ++i) {
    S slope = spec.linear[i] / spec.intercept;
    pw[i][0] = S(1);
    for (int e = 1; e <= order; ++e) pw[i][e] = pw[i][e - 1] * slope;
  }

  const GradedLayout& layout = out.layout();
  for (std::size_t r = 0; r < layout.size(); ++r) {
    auto x = layout.at(r);
    S term = lead;
    int running = 0;
    int d = 0;
    for (int i = 0; i < dim; ++i) {
      for (int e = 1; e <= x[i]; ++e) {
        ++running;
        term = term * S(running) / S(e);  // multinomial coefficient, built incrementally
      }
      term *= pw[i][x[i]];
      d += x[i];
    }
    out.coeff_at(r) = term * gbin[d];
  }
  return out;
}

/// prod(x_i!) * (c-1)! / (c + |x| - 1)!, as a running product of small ratios.
template <class S>
S inverse_multinomial_weight(int c, std::span<const int> x) {
  S ratio(1);
  int n = c - 1;
  for (int xi : x) {
    for (int m = 1; m <= xi; ++m) {
      ++n;
      ratio = ratio * S(m) / S(n);
    }
  }
  return ratio;
}

/// Unbiased estimate at sample point x from the Taylor series of g.
template <class S>
S series_estimator(const TruncatedSeries<S>& g, int c, std::span<const int> x) {
  if (c < 1) throw DomainError("stop count c must be >= 1");
  return g.coeff(x) * inverse_multinomial_weight<S>(c, x);
}

template <class S>
S series_estimator(const TruncatedSeries<S>& g, int c, std::initializer_list<int> x) {
  return series_estimator(g, c, std::span<const int>(x.begin(), x.size()));
}

/// A series multiplied by an irrational scalar kept outside the coefficients.
template <class S = double>
struct ScaledSeries {
  double scale = 1.0;
  TruncatedSeries<S> series;

  double estimate(int c, std::span<const int> x) const {
    return scale * to_double(series_estimator(series, c, x));
  }
};

namespace detail {

template <class S>
AffinePowerSpec<S> affine(S intercept, std::vector<S> linear, Exponent e) {
  return AffinePowerSpec<S>{std::move(intercept), std::move(linear), e};
}

}  // namespace detail

/// g(theta) = q(theta) / (1 - theta)^c for one disease, with q = ((pi1 - theta)/nu)^(1/k).
/// The factor (pi1/nu)^(1/k) is held in `scale`; the series is that of
/// (1 - theta/pi1)^(1/k) * (1 - theta)^(-c), rational whenever pi1 is.
template <class S>
ScaledSeries<S> build_g_one(int k, int c, const S& pi0, const S& pi1, int order) {
  if (k < 1 || c < 1) throw DomainError("build_g_one: k and c must be >= 1");
  S nu = pi0 + pi1 - S(1);
  if (nu == S(0)) throw IdentifiabilityError("build_g_one: nu = 0");
  if (nu < S(0)) throw DomainError("build_g_one: nu < 0 gives no real root");
  auto root = expand_affine_power(detail::affine<S>(S(1), {S(-1) / pi1}, {1, k}), order);
  auto denom = expand_affine_power(detail::affine<S>(S(1), {S(-1)}, {-c, 1}), order);
  ScaledSeries<S> out{1.0, series_mul(root, denom)};
  if (!(pi0 == S(1) && pi1 == S(1))) {
    using std::pow;
    out.scale = pow(to_double(pi1) / to_double(nu), 1.0 / k);
  }
  return out;
}

template <class S>
ScaledSeries<S> build_g(const OneDiseaseModel<S>& m, int order) {
  return build_g_one(m.k(), m.c(), m.pi0(), m.pi1(), order);
}

/// Series of g_a(eta) = p_a(eta) / eta00^c for a in {00, 10, 01, 11}, in the
/// observation variable (theta without misclassification, eta with it).
/// Under misclassification theta = Phi^{-1}(eta - pi00) is substituted into
/// the radicands of the inverse map, which stay affine in eta.
template <class S>
std::array<TruncatedSeries<S>, 4> build_g_two(int k, int c, const std::optional<MisclassModel<S>>& misclass,
                                             int order) {
  if (k < 1 || c < 1) throw DomainError("build_g_two: k and c must be >= 1");
  Mat3<S> inv{};
  std::array<S, 3> shift{S(0), S(0), S(0)};
  for (int r = 0; r < 3; ++r) inv[r][r] = S(1);
  if (misclass) {
    auto report = identifiable(*misclass);
    if (!report.identifiable) throw IdentifiabilityError("build_g_two: det(Phi) is zero");
    inv = inverse3(misclass->phi());
    auto pi00 = misclass->pi00();
    for (int r = 0; r < 3; ++r) {
      for (int s = 0; s < 3; ++s) shift[r] += inv[r][s] * pi00[s];  // Phi^{-1} pi00
    }
  }

  // radicand 1 - v' theta(eta) = (1 + v' Phi^{-1} pi00) - (Phi^{-T} v)' eta
  auto radicand = [&](std::array<int, 3> v) {
    S a0(1);
    std::vector<S> lin(3, S(0));
    for (int r = 0; r < 3; ++r) {
      if (!v[r]) continue;
      a0 += shift[r];
      for (int s = 0; s < 3; ++s) lin[s] -= inv[r][s];
    }
    if (!(a0 > S(0))) throw DomainError("build_g_two: radicand intercept is not positive; g is not analytic at 0");
    return detail::affine<S>(a0, lin, {1, k});
  };

  auto denom = expand_affine_power(detail::affine<S>(S(1), {S(-1), S(-1), S(-1)}, {-c, 1}), order);
  auto g00 = series_mul(expand_affine_power(radicand({1, 1, 1}), order), denom);
  auto g10 = series_mul(expand_affine_power(radicand({0, 1, 1}), order), denom) - g00;
  auto g01 = series_mul(expand_affine_power(radicand({1, 0, 1}), order), denom) - g00;
  auto g11 = denom - g00 - g10 - g01;
  return {g00, g10, g01, g11};
}

template <class S>
std::array<TruncatedSeries<S>, 4> build_g(const TwoDiseaseModel<S>& m, int order) {
  return build_g_two(m.k(), m.c(), m.misclass(), order);
}

}  // namespace gtseq
