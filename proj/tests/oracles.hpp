#pragma once

// Reference implementations used only by the tests. They follow the printed
// formulas literally (uncancelled prefactors, explicit factorials, explicit
// path enumeration) so they share no code paths with the library.

#include <gtseq/numeric.hpp>
#include <gtseq/plans.hpp>

#include <array>
#include <functional>
#include <vector>

namespace oracle {

using gtseq::BigInt;
using gtseq::Rational;

inline Rational factorial(int n) {
  BigInt f = 1;
  for (int i = 2; i <= n; ++i) f *= i;
  return Rational(f);
}

inline Rational binomial(int n, int r) {
  if (r < 0 || r > n) return Rational(0);
  return factorial(n) / (factorial(r) * factorial(n - r));
}

inline Rational one_minus_inv(int k, int m) { return Rational(1) - Rational(1, k * m); }

/// Perfect-test estimate of p with the uncancelled prefactor. Undefined when k(c+y) = 1.
inline Rational ub_one_perfect_literal(int y, int c, int k) {
  Rational prod(1);
  for (int i = 0; i <= y; ++i) prod *= one_minus_inv(k, c + i);
  return Rational(1) - prod / one_minus_inv(k, c + y);
}

/// The sum in the misclassified one-disease estimate, term by term with factorials.
/// The product over j carries the factor (y - i - 1/k) once in the numerator and
/// once in the denominator; when it vanishes (k = 1, i = y - 1) the quotient is
/// the product of the remaining numerator factors.
inline Rational misclass_one_sum(int y, int c, int k, const Rational& pi1) {
  const Rational xi(1, k);
  Rational sum(0);
  for (int i = 0; i <= y; ++i) {
    Rational term = binomial(y, i) * factorial(c + i - 1) / factorial(c + y - 1);
    for (int e = 0; e < y - i; ++e) term /= pi1;
    Rational num(1);
    for (int j = i; j <= y; ++j) num *= Rational(y - j) - xi;
    const Rational den = Rational(y - i) - xi;
    if (den != 0) {
      term *= num / den;
    } else {
      Rational rest(1);
      for (int j = i + 1; j <= y; ++j) rest *= Rational(y - j) - xi;
      term *= rest;
    }
    sum += term;
  }
  return sum;
}

/// Full misclassified one-disease estimate in floats.
inline double ub_one_misclass_literal(int y, int c, int k, const Rational& pi0, const Rational& pi1) {
  const double scale = std::pow(gtseq::to_double(pi1 / (pi0 + pi1 - 1)), 1.0 / k);
  return 1.0 - scale * gtseq::to_double(misclass_one_sum(y, c, k, pi1));
}

/// Two-disease perfect estimate (p00, p10, p01, p11) with the uncancelled prefactor.
inline std::array<Rational, 4> ub_two_perfect_literal(const std::array<int, 3>& z, int c, int k) {
  const int n = z[0] + z[1] + z[2];
  const Rational pre = Rational(1) / one_minus_inv(k, c + n);
  auto prod = [&](int shift, int upto) {
    Rational p(1);
    for (int j = 0; j <= upto; ++j) p *= one_minus_inv(k, c + shift + j);
    return p;
  };
  Rational p00 = pre * prod(0, n);
  Rational p10 = pre * prod(z[0], z[1] + z[2]) - p00;
  Rational p01 = pre * prod(z[1], z[0] + z[2]) - p00;
  return {p00, p10, p01, Rational(1) - p00 - p10 - p01};
}

/// Right-hand side of the simplex counterexample at z = (1, 1, 0).
inline Rational simplex_excess(int c, int k) {
  return Rational(1, k * c) * (Rational(1) - (Rational(c) + Rational(1, k)) / Rational(c + 1));
}

/// Joint misclassification table of the independent-errors model, written out
/// cell by cell. cond[a][b] = P(observe a | true b), cells ordered 00, 10, 01, 11.
inline std::array<std::array<Rational, 4>, 4> indep_table(const Rational& s1, const Rational& e1, const Rational& s2,
                                                         const Rational& e2) {
  // marginal P(observe bit | true bit) for disease d: bit 0 specificity, bit 1 sensitivity
  auto marg = [](const Rational& spec, const Rational& sens, int obs, int truth) {
    if (truth == 0) return obs == 0 ? spec : Rational(1) - spec;
    return obs == 1 ? sens : Rational(1) - sens;
  };
  const int bit1[4] = {0, 1, 0, 1};
  const int bit2[4] = {0, 0, 1, 1};
  std::array<std::array<Rational, 4>, 4> t{};
  for (int a = 0; a < 4; ++a) {
    for (int b = 0; b < 4; ++b) t[a][b] = marg(s1, e1, bit1[a], bit1[b]) * marg(s2, e2, bit2[a], bit2[b]);
  }
  return t;
}

/// det of the 3x3 difference matrix (rows and columns 10, 01, 11 minus column 00), by Sarrus.
inline Rational det_phi(const std::array<std::array<Rational, 4>, 4>& t) {
  Rational m[3][3];
  for (int r = 0; r < 3; ++r) {
    for (int s = 0; s < 3; ++s) m[r][s] = t[r + 1][s + 1] - t[r + 1][0];
  }
  return m[0][0] * m[1][1] * m[2][2] + m[0][1] * m[1][2] * m[2][0] + m[0][2] * m[1][0] * m[2][1] -
         m[0][2] * m[1][1] * m[2][0] - m[0][0] * m[1][2] * m[2][1] - m[0][1] * m[1][0] * m[2][2];
}

/// Counts lattice walks from the origin that reach `target` without touching
/// the boundary earlier, by explicit depth-first enumeration.
inline long brute_path_count(const gtseq::SamplingPlan& plan, const std::vector<int>& target) {
  std::vector<int> x(target.size(), 0);
  std::function<long()> walk = [&]() -> long {
    if (x == target) return plan.is_boundary(x) ? 1 : 0;
    if (plan.is_boundary(x)) return 0;
    long total = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (x[i] == target[i]) continue;
      ++x[i];
      total += walk();
      --x[i];
    }
    return total;
  };
  return walk();
}

/// Probability that the walk stops at `target`, summed path by path.
inline double brute_stop_probability(const gtseq::SamplingPlan& plan, const std::vector<int>& target,
                                     const std::vector<double>& step) {
  std::vector<int> x(target.size(), 0);
  std::function<double(double)> walk = [&](double prob) -> double {
    if (x == target) return plan.is_boundary(x) ? prob : 0.0;
    if (plan.is_boundary(x)) return 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (x[i] == target[i]) continue;
      ++x[i];
      total += walk(prob * step[i]);
      --x[i];
    }
    return total;
  };
  return walk(1.0);
}

}  // namespace oracle
