#pragma once

// Prevalence-space parameter types and the maps between prevalence and
// observation probabilities for one and two diseases, with and without
// known misclassification.
//
// Two-disease quantities are stored as Cells: arrays indexed by the joint
// status class in the fixed order {00, 10, 01, 11}.

#include "gtseq/numeric.hpp"

#include <array>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace gtseq {

enum Cell : int { k00 = 0, k10 = 1, k01 = 2, k11 = 3 };

inline constexpr std::array<const char*, 4> kCellNames = {"00", "10", "01", "11"};

template <class S>
using Cells = std::array<S, 4>;

template <class S>
using Mat3 = std::array<std::array<S, 3>, 3>;

template <class S>
using Mat4 = std::array<std::array<S, 4>, 4>;

namespace detail {

template <class S>
bool in_open_unit(const S& x) {
  return x > S(0) && x < S(1);
}

template <class S>
bool in_half_open_unit(const S& x) {
  return x > S(0) && x <= S(1);
}

template <class S>
std::string show(const S& x) {
  if constexpr (is_exact_v<S>) {
    return x.str();
  } else {
    std::ostringstream out;
    out.precision(17);
    out << x;
    return out.str();
  }
}

template <class S>
S simplex_tolerance() {
  if constexpr (is_exact_v<S>) {
    return S(0);
  } else {
    return S(1e-12);
  }
}

}  // namespace detail

template <class S = double>
class OneDiseaseModel {
 public:
  OneDiseaseModel(S p, int k, int c, S pi0 = S(1), S pi1 = S(1))
      : p_(std::move(p)), k_(k), c_(c), pi0_(std::move(pi0)), pi1_(std::move(pi1)) {
    if (!detail::in_open_unit(p_)) throw DomainError("prevalence p must lie in (0,1), got " + detail::show(p_));
    if (k_ < 1) throw DomainError("group size k must be >= 1");
    if (c_ < 1) throw DomainError("stop count c must be >= 1");
    if (!detail::in_half_open_unit(pi0_)) throw DomainError("specificity pi0 must lie in (0,1]");
    if (!detail::in_half_open_unit(pi1_)) throw DomainError("sensitivity pi1 must lie in (0,1]");
    if (nu() == S(0)) throw IdentifiabilityError("pi0 + pi1 - 1 = 0: prevalence is not identifiable");
    if (!(pi0_ > S(1) / 2 && pi1_ > S(1) / 2)) {
      warnings_.push_back("test performs no better than chance (pi0 or pi1 <= 0.5)");
    }
  }

  const S& p() const { return p_; }
  S q() const { return S(1) - p_; }
  int k() const { return k_; }
  int c() const { return c_; }
  const S& pi0() const { return pi0_; }
  const S& pi1() const { return pi1_; }
  S nu() const { return pi0_ + pi1_ - S(1); }
  bool perfect() const { return pi0_ == S(1) && pi1_ == S(1); }
  const std::vector<std::string>& warnings() const { return warnings_; }

 private:
  S p_;
  int k_;
  int c_;
  S pi0_;
  S pi1_;
  std::vector<std::string> warnings_;
};

/// Probability that a pool of k tests positive: pi1 - nu * q^k.
template <class S>
S theta_one(const OneDiseaseModel<S>& m) {
  return m.pi1() - m.nu() * ipow(m.q(), m.k());
}

/// Inverse of theta_one: returns q = ((pi1 - theta) / nu)^(1/k).
template <class S>
S h_one(const S& theta, int k, const S& pi0, const S& pi1) {
  S nu = pi0 + pi1 - S(1);
  if (nu == S(0)) throw IdentifiabilityError("h_one: nu = 0");
  if (!(theta < pi1)) throw DomainError("h_one: theta must be below pi1");
  S radicand = (pi1 - theta) / nu;
  if (radicand < S(0)) throw DomainError("h_one: negative radicand");
  return kth_root(radicand, k);
}

/// Full 4x4 table of conditional probabilities cond[a][b] = P(observe a | true b).
template <class S = double>
class MisclassModel {
 public:
  explicit MisclassModel(Mat4<S> cond) : cond_(std::move(cond)) {
    for (int b = 0; b < 4; ++b) {
      S total(0);
      for (int a = 0; a < 4; ++a) {
        const S& v = cond_[a][b];
        if (v < S(0) || v > S(1)) throw DomainError("misclassification entries must lie in [0,1]");
        total += v;
      }
      if (abs_value(S(total - S(1))) > detail::simplex_tolerance<S>()) {
        throw DomainError(std::string("misclassification column ") + kCellNames[b] + " does not sum to 1");
      }
    }
  }

  static MisclassModel identity() {
    Mat4<S> m{};
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 4; ++j) m[i][j] = S(i == j ? 1 : 0);
    }
    return MisclassModel(m);
  }

  const S& operator()(int observed, int truth) const { return cond_[observed][truth]; }
  const Mat4<S>& cond() const { return cond_; }

  /// (pi_{10|00}, pi_{01|00}, pi_{11|00})
  std::array<S, 3> pi00() const { return {cond_[k10][k00], cond_[k01][k00], cond_[k11][k00]}; }

  /// Phi[r][s] = pi_{a|b} - pi_{a|00} for a, b in {10, 01, 11}.
  Mat3<S> phi() const {
    Mat3<S> m{};
    for (int r = 0; r < 3; ++r) {
      for (int s = 0; s < 3; ++s) m[r][s] = cond_[r + 1][s + 1] - cond_[r + 1][k00];
    }
    return m;
  }

 private:
  Mat4<S> cond_;
};

template <class S = double>
struct IndepErrorParams {
  S pi0_1{1};
  S pi1_1{1};
  S pi0_2{1};
  S pi1_2{1};

  S nu1() const { return pi0_1 + pi1_1 - S(1); }
  S nu2() const { return pi0_2 + pi1_2 - S(1); }
};

/// Joint misclassification under independent marginal test errors.
template <class S>
MisclassModel<S> indep_misclass(const IndepErrorParams<S>& e) {
  for (const S* v : {&e.pi0_1, &e.pi1_1, &e.pi0_2, &e.pi1_2}) {
    if (!detail::in_half_open_unit(*v)) throw DomainError("independent error parameters must lie in (0,1]");
  }
  // marginal[d][observed][truth]
  const S m1[2][2] = {{e.pi0_1, S(1) - e.pi1_1}, {S(1) - e.pi0_1, e.pi1_1}};
  const S m2[2][2] = {{e.pi0_2, S(1) - e.pi1_2}, {S(1) - e.pi0_2, e.pi1_2}};
  constexpr int first[4] = {0, 1, 0, 1};
  constexpr int second[4] = {0, 0, 1, 1};
  Mat4<S> cond{};
  for (int a = 0; a < 4; ++a) {
    for (int b = 0; b < 4; ++b) cond[a][b] = m1[first[a]][first[b]] * m2[second[a]][second[b]];
  }
  return MisclassModel<S>(cond);
}

template <class S>
S det3(const Mat3<S>& m) {
  return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
         m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
         m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
}

template <class S>
Mat3<S> inverse3(const Mat3<S>& m) {
  S d = det3(m);
  if (d == S(0)) throw IdentifiabilityError("singular 3x3 matrix");
  Mat3<S> inv{};
  for (int r = 0; r < 3; ++r) {
    for (int s = 0; s < 3; ++s) {
      // cofactor of (s, r)
      int r0 = (s + 1) % 3, r1 = (s + 2) % 3, c0 = (r + 1) % 3, c1 = (r + 2) % 3;
      inv[r][s] = (m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0]) / d;
    }
  }
  return inv;
}

template <class S>
struct IdentifiabilityReport {
  bool identifiable = false;
  S det_phi{0};
};

/// The model is identifiable iff det(Phi) != 0. Float determinants are
/// compared against 1e-10 * (max |Phi entry|)^3.
template <class S>
IdentifiabilityReport<S> identifiable(const MisclassModel<S>& misclass) {
  Mat3<S> phi = misclass.phi();
  S det = det3(phi);
  IdentifiabilityReport<S> report;
  report.det_phi = det;
  if constexpr (is_exact_v<S>) {
    report.identifiable = det != S(0);
  } else {
    S scale(0);
    for (const auto& row : phi) {
      for (const S& v : row) scale = std::max(scale, abs_value(v));
    }
    report.identifiable = abs_value(det) >= S(1e-10) * scale * scale * scale && scale > S(0);
  }
  return report;
}

template <class S = double>
class TwoDiseaseModel {
 public:
  TwoDiseaseModel(S p10, S p01, S p11, int k, int c, std::optional<MisclassModel<S>> misclass = std::nullopt)
      : p10_(std::move(p10)), p01_(std::move(p01)), p11_(std::move(p11)), k_(k), c_(c), misclass_(std::move(misclass)) {
    if (!detail::in_open_unit(p10_) || !detail::in_open_unit(p01_) || !detail::in_open_unit(p11_)) {
      throw DomainError("joint prevalences p10, p01, p11 must each lie in (0,1)");
    }
    if (!detail::in_open_unit(p00())) throw DomainError("p00 = 1 - p10 - p01 - p11 must lie in (0,1)");
    if (k_ < 1) throw DomainError("group size k must be >= 1");
    if (c_ < 1) throw DomainError("stop count c must be >= 1");
  }

  S p00() const { return S(1) - p10_ - p01_ - p11_; }
  const S& p10() const { return p10_; }
  const S& p01() const { return p01_; }
  const S& p11() const { return p11_; }
  Cells<S> p() const { return {p00(), p10_, p01_, p11_}; }
  S p1() const { return p10_ + p11_; }
  S p2() const { return p01_ + p11_; }
  int k() const { return k_; }
  int c() const { return c_; }
  const std::optional<MisclassModel<S>>& misclass() const { return misclass_; }

 private:
  S p10_;
  S p01_;
  S p11_;
  int k_;
  int c_;
  std::optional<MisclassModel<S>> misclass_;
};

/// Pool-level class probabilities (theta00, theta10, theta01, theta11).
template <class S>
Cells<S> theta_two(const TwoDiseaseModel<S>& m) {
  S p00 = m.p00();
  S t00 = ipow(p00, m.k());
  S a = ipow(S(p00 + m.p10()), m.k());
  S b = ipow(S(p00 + m.p01()), m.k());
  return {t00, S(a - t00), S(b - t00), S(S(1) - a - b + t00)};
}

/// Inverse of theta_two. theta = (theta10, theta01, theta11); returns (p00, p10, p01, p11).
template <class S>
Cells<S> h_two(const std::array<S, 3>& theta, int k) {
  S r00 = S(1) - theta[0] - theta[1] - theta[2];
  S r10 = S(1) - theta[1] - theta[2];
  S r01 = S(1) - theta[0] - theta[2];
  if (!(r00 > S(0)) || !(r10 > S(0)) || !(r01 > S(0))) throw DomainError("h_two: nonpositive radicand");
  S p00 = kth_root(r00, k);
  S p10 = kth_root(r10, k) - p00;
  S p01 = kth_root(r01, k) - p00;
  return {p00, p10, p01, S(S(1) - p00 - p10 - p01)};
}

/// Observed class probabilities as the mixture sum_b pi_{a|b} theta_b.
template <class S>
Cells<S> eta_two_mixture(const Cells<S>& theta, const MisclassModel<S>& misclass) {
  Cells<S> eta{};
  for (int a = 0; a < 4; ++a) {
    Accumulator<S> acc;
    for (int b = 0; b < 4; ++b) acc.add(misclass(a, b) * theta[b]);
    eta[a] = acc.value();
  }
  return eta;
}

/// Observed class probabilities through the affine form pi00 + Phi theta.
template <class S>
Cells<S> eta_two_affine(const Cells<S>& theta, const MisclassModel<S>& misclass) {
  auto pi00 = misclass.pi00();
  auto phi = misclass.phi();
  Cells<S> eta{};
  S rest(1);
  for (int r = 0; r < 3; ++r) {
    S v = pi00[r];
    for (int s = 0; s < 3; ++s) v += phi[r][s] * theta[s + 1];
    eta[r + 1] = v;
    rest -= v;
  }
  eta[k00] = rest;
  return eta;
}

/// Observed class probabilities for a misclassified two-disease model.
/// Both routes are evaluated and must agree (1e-12 in floats, exactly otherwise).
template <class S>
Cells<S> eta_two(const TwoDiseaseModel<S>& m) {
  if (!m.misclass()) throw DomainError("eta_two: model has no misclassification table");
  Cells<S> theta = theta_two(m);
  Cells<S> mix = eta_two_mixture(theta, *m.misclass());
  Cells<S> aff = eta_two_affine(theta, *m.misclass());
  for (int a = 0; a < 4; ++a) {
    if (abs_value(S(mix[a] - aff[a])) > detail::simplex_tolerance<S>()) {
      throw std::logic_error("eta_two: mixture and affine forms disagree");
    }
  }
  return mix;
}

}  // namespace gtseq
