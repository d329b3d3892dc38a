#include <gtseq/estimators.hpp>
#include <gtseq/series.hpp>

#include <gtest/gtest.h>

#include "oracles.hpp"

#include <random>

using namespace gtseq;

namespace {

Rational dec(const char* s) { return parse_decimal(s); }

/// Coefficient of s^n in (1 - s)^a: (-a)(-a+1)...(-a+n-1) / n!.
Rational falling_binomial_coeff(const Rational& a, int n) {
  Rational v(1);
  for (int j = 0; j < n; ++j) v = v * (Rational(j) - a) / Rational(j + 1);
  return v;
}

TruncatedSeries<Rational> random_series(std::mt19937_64& rng, int dim, int order) {
  std::uniform_int_distribution<int> num(-9, 9), den(1, 7);
  TruncatedSeries<Rational> s(dim, order);
  for (std::size_t r = 0; r < s.layout().size(); ++r) s.coeff_at(r) = Rational(num(rng), den(rng));
  return s;
}

}  // namespace

TEST(GradedLayout, RankInvertsEnumeration) {
  for (int dim : {1, 2, 3, 4}) {
    GradedLayout layout(dim, 9);
    int prev_degree = 0;
    for (std::size_t r = 0; r < layout.size(); ++r) {
      auto x = layout.at(r);
      EXPECT_EQ(layout.rank(x), r);
      EXPECT_GE(layout.degree(r), prev_degree);
      prev_degree = layout.degree(r);
    }
    // number of monomials of total degree <= 9 in dim variables
    EXPECT_EQ(layout.size(), static_cast<std::size_t>(oracle::binomial(9 + dim, dim).convert_to<double>()));
  }
}

TEST(ExpandAffinePower, GeometricSeries) {
  auto s = expand_affine_power<Rational>({Rational(1), {Rational(-1)}, {-1, 1}}, 5);
  for (int j = 0; j <= 5; ++j) EXPECT_EQ(s.coeff({j}), Rational(1));
}

TEST(ExpandAffinePower, InverseSquareRoot) {
  auto s = expand_affine_power<Rational>({Rational(1), {Rational(-1)}, {-1, 2}}, 2);
  // d/dt (1-t)^(-1/2) = (1/2)(1-t)^(-3/2); second derivative (3/4)(1-t)^(-5/2), halved
  EXPECT_EQ(s.coeff({0}), Rational(1));
  EXPECT_EQ(s.coeff({1}), Rational(1, 2));
  EXPECT_EQ(s.coeff({2}), Rational(3, 8));
}

TEST(ExpandAffinePower, BivariateSquare) {
  auto s = expand_affine_power<Rational>({Rational(1), {Rational(-1), Rational(-1)}, {2, 1}}, 2);
  EXPECT_EQ(s.coeff({1, 1}), Rational(2));
  EXPECT_EQ(s.coeff({2, 0}), Rational(1));
  EXPECT_EQ(s.coeff({1, 0}), Rational(-2));
  EXPECT_EQ(s.coeff({0, 0}), Rational(1));
}

TEST(ExpandAffinePower, NonUnitIntercept) {
  // (4 + 8t)^(1/2) = 2 (1 + 2t)^(1/2) = 2 + 2t - t^2 + ...
  auto s = expand_affine_power<Rational>({Rational(4), {Rational(8)}, {1, 2}}, 2);
  EXPECT_EQ(s.coeff({0}), Rational(2));
  EXPECT_EQ(s.coeff({1}), Rational(2));
  EXPECT_EQ(s.coeff({2}), Rational(-1));
}

TEST(ExpandAffinePower, Errors) {
  EXPECT_THROW(expand_affine_power<double>({0.0, {1.0}, {1, 2}}, 3), DomainError);
  EXPECT_THROW(expand_affine_power<double>({-1.0, {1.0}, {1, 2}}, 3), DomainError);
  EXPECT_THROW(expand_affine_power<Rational>({Rational(2), {Rational(1)}, {1, 2}}, 3), DomainError);
}

TEST(TruncatedSeries, CoefficientBeyondOrderIsAnError) {
  TruncatedSeries<double> s(2, 3);
  EXPECT_THROW(s.coeff({2, 2}), InsufficientOrderError);
  EXPECT_THROW(series_estimator(s, 1, {4, 0}), InsufficientOrderError);
  EXPECT_THROW(s.coeff({1, 1, 1}), DomainError);
}

TEST(TruncatedSeries, MulDimensionMismatch) {
  TruncatedSeries<double> a(2, 3), b(3, 3);
  EXPECT_THROW(series_mul(a, b), DomainError);
  EXPECT_THROW(a += b, DomainError);
}

TEST(TruncatedSeries, MulTruncatesToSmallerOrder) {
  auto a = expand_affine_power<Rational>({Rational(1), {Rational(-1)}, {-1, 1}}, 8);
  auto b = expand_affine_power<Rational>({Rational(1), {Rational(-1)}, {-1, 1}}, 4);
  auto p = series_mul(a, b);
  EXPECT_EQ(p.order(), 4);
  for (int j = 0; j <= 4; ++j) EXPECT_EQ(p.coeff({j}), Rational(j + 1));
}

TEST(TruncatedSeries, RingLaws) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    for (int dim : {1, 2, 3}) {
      auto a = random_series(rng, dim, 5);
      auto b = random_series(rng, dim, 5);
      auto c = random_series(rng, dim, 5);
      EXPECT_EQ((a + b) + c, a + (b + c));
      EXPECT_EQ(a + b, b + a);
      EXPECT_EQ(series_mul(a, b), series_mul(b, a));
      EXPECT_EQ(series_mul(series_mul(a, b), c), series_mul(a, series_mul(b, c)));
      EXPECT_EQ(series_mul(a, b + c), series_mul(a, b) + series_mul(a, c));
      EXPECT_EQ(a - a, TruncatedSeries<Rational>(dim, 5));
    }
  }
}

TEST(SeriesEstimator, PerfectOneDiseaseExamples) {
  // c = 1, k = 2: g = (1 - t)^(-1/2)
  auto g1 = build_g_one<Rational>(2, 1, Rational(1), Rational(1), 4);
  EXPECT_EQ(series_estimator(g1.series, 1, {1}), Rational(1, 2));
  // c = 2, k = 2: g = (1 - t)^(-3/2), g'(0) = 3/2, weight 1/2
  auto g2 = build_g_one<Rational>(2, 2, Rational(1), Rational(1), 4);
  EXPECT_EQ(g2.series.coeff({1}), Rational(3, 2));
  EXPECT_EQ(series_estimator(g2.series, 2, {1}), Rational(3, 4));
}

TEST(SeriesEstimator, ZeroSampleGivesHAtZero) {
  auto g = build_g_one<double>(2, 3, 0.9, 0.95, 4);
  int x0[1] = {0};
  EXPECT_NEAR(g.estimate(3, x0), std::sqrt(0.95 / 0.85), 1e-15);
  auto gp = build_g_one<double>(5, 3, 1.0, 1.0, 4);
  EXPECT_EQ(gp.estimate(3, x0), 1.0);
}

TEST(BuildG, PerfectOneDiseaseIsSinglePower) {
  for (int k : {1, 2, 3}) {
    for (int c : {1, 2, 4}) {
      auto g = build_g_one<Rational>(k, c, Rational(1), Rational(1), 10);
      EXPECT_EQ(g.scale, 1.0);
      const Rational a = Rational(1, k) - Rational(c);
      for (int n = 0; n <= 10; ++n) EXPECT_EQ(g.series.coeff({n}), falling_binomial_coeff(a, n)) << k << c << n;
    }
  }
}

TEST(BuildG, MisclassifiedOneDiseaseFactorization) {
  const Rational pi0 = dec("0.98"), pi1 = dec("0.95");
  auto g = build_g_one<Rational>(2, 3, pi0, pi1, 8);
  EXPECT_NEAR(g.scale, std::sqrt(0.95 / 0.93), 1e-15);
  // (1 - t/pi1)^(1/2) (1 - t)^(-3) by a hand Cauchy product
  for (int n = 0; n <= 8; ++n) {
    Rational want(0);
    for (int i = 0; i <= n; ++i) {
      want += falling_binomial_coeff(Rational(1, 2), i) * ipow(Rational(1) / pi1, i) *
              falling_binomial_coeff(Rational(-3), n - i);
    }
    EXPECT_EQ(g.series.coeff({n}), want);
  }
}

TEST(BuildG, TwoDiseasePerfectComponentP00) {
  const int k = 3, c = 2;
  auto g = build_g_two<Rational>(k, c, std::nullopt, 6);
  const Rational a = Rational(1, k) - Rational(c);
  const GradedLayout& layout = g[k00].layout();
  for (std::size_t r = 0; r < layout.size(); ++r) {
    auto x = layout.at(r);
    const int n = x[0] + x[1] + x[2];
    // multinomial n! / prod x_i! times the univariate coefficient
    Rational want = falling_binomial_coeff(a, n) * oracle::factorial(n) /
                    (oracle::factorial(x[0]) * oracle::factorial(x[1]) * oracle::factorial(x[2]));
    EXPECT_EQ(g[k00].coeff_at(r), want);
  }
}

TEST(BuildG, NonIdentifiableIsAnError) {
  EXPECT_THROW(build_g_one<double>(2, 1, 0.4, 0.6, 4), IdentifiabilityError);
  auto singular = indep_misclass<double>({0.5, 0.5, 0.9, 0.9});
  EXPECT_THROW(build_g_two<double>(2, 1, singular, 4), IdentifiabilityError);
}

TEST(SeriesProperties, TruncationStability) {
  auto small = build_g_two<Rational>(2, 3, std::nullopt, 5);
  auto large = build_g_two<Rational>(2, 3, std::nullopt, 9);
  for (int a = 0; a < 4; ++a) EXPECT_EQ(large[a].truncated(5), small[a]);

  auto mm = indep_misclass<double>({0.98, 0.95, 0.97, 0.9});
  auto fs = build_g_two<double>(2, 3, mm, 6);
  auto fl = build_g_two<double>(2, 3, mm, 12);
  for (int a = 0; a < 4; ++a) EXPECT_EQ(fl[a].truncated(6), fs[a]);
  EXPECT_THROW(fs[0].truncated(7), InsufficientOrderError);
}

TEST(SeriesProperties, PolynomialExpectationIdentity) {
  // sum_{y<=N} qhat(y) C(c+y-1, y) t^y (1-t)^c equals (1-t)^(1/k) through degree N
  const int N = 14;
  for (int k : {1, 2, 5}) {
    for (int c : {1, 3}) {
      TruncatedSeries<Rational> poly(1, N);
      for (int y = 0; y <= N; ++y) {
        poly.set({y}, qhat_one_perfect<Rational>(y, c, k) * oracle::binomial(c + y - 1, y));
      }
      auto lhs = series_mul(poly, expand_affine_power<Rational>({Rational(1), {Rational(-1)}, {c, 1}}, N));
      for (int n = 0; n <= N; ++n) EXPECT_EQ(lhs.coeff({n}), falling_binomial_coeff(Rational(1, k), n)) << k << c << n;
    }
  }
}
