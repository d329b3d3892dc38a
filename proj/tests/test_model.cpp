#include <gtseq/model.hpp>

#include <gtest/gtest.h>

#include "oracles.hpp"

#include <random>

using namespace gtseq;

namespace {

Rational dec(const char* s) { return parse_decimal(s); }

}  // namespace

TEST(ThetaOne, PerfectTest) {
  EXPECT_NEAR(theta_one(OneDiseaseModel<double>(0.1, 2, 1)), 0.19, 1e-15);
  EXPECT_EQ(theta_one(OneDiseaseModel<Rational>(dec("0.1"), 2, 1)), dec("0.19"));
}

TEST(ThetaOne, Misclassified) {
  OneDiseaseModel<Rational> m(dec("0.1"), 2, 1, dec("0.98"), dec("0.95"));
  EXPECT_EQ(theta_one(m), dec("0.1967"));
  EXPECT_NEAR(theta_one(OneDiseaseModel<double>(0.1, 2, 1, 0.98, 0.95)), 0.1967, 1e-15);
}

TEST(ThetaOne, RareLimitApproachesFalsePositiveRate) {
  for (int k : {1, 5, 30}) {
    EXPECT_NEAR(theta_one(OneDiseaseModel<double>(1e-12, k, 1, 0.9, 0.8)), 0.1, 1e-9);
  }
}

TEST(HOne, RoundTripExamples) {
  EXPECT_NEAR(h_one(0.19, 2, 1.0, 1.0), 0.9, 1e-15);
  EXPECT_NEAR(h_one(0.1967, 2, 0.98, 0.95), 0.9, 1e-15);
  EXPECT_EQ(h_one<Rational>(dec("0.1967"), 2, dec("0.98"), dec("0.95")), dec("0.9"));
  EXPECT_EQ(h_one(0.0, 3, 1.0, 1.0), 1.0);
}

TEST(HOne, ThetaAtOrAboveSensitivityIsDomainError) {
  EXPECT_THROW(h_one(0.95, 2, 0.98, 0.95), DomainError);
  EXPECT_THROW(h_one(0.99, 2, 0.98, 0.95), DomainError);
  EXPECT_THROW(h_one(0.1, 2, 0.5, 0.5), IdentifiabilityError);
}

TEST(OneDiseaseModel, Validation) {
  EXPECT_THROW(OneDiseaseModel<double>(0.0, 2, 1), DomainError);
  EXPECT_THROW(OneDiseaseModel<double>(1.0, 2, 1), DomainError);
  EXPECT_THROW(OneDiseaseModel<double>(0.1, 0, 1), DomainError);
  EXPECT_THROW(OneDiseaseModel<double>(0.1, 2, 0), DomainError);
  EXPECT_THROW(OneDiseaseModel<double>(0.1, 2, 1, 0.0, 1.0), DomainError);
  EXPECT_THROW(OneDiseaseModel<double>(0.1, 2, 1, 1.0, 1.1), DomainError);
  EXPECT_THROW(OneDiseaseModel<double>(0.1, 2, 1, 0.4, 0.6), IdentifiabilityError);
}

TEST(OneDiseaseModel, WarnsBelowChanceButAccepts) {
  OneDiseaseModel<double> m(0.1, 2, 1, 0.45, 0.9);
  EXPECT_EQ(m.warnings().size(), 1u);
  EXPECT_TRUE(OneDiseaseModel<double>(0.1, 2, 1, 0.9, 0.9).warnings().empty());
}

TEST(ThetaTwo, Example) {
  TwoDiseaseModel<Rational> m(dec("0.1"), dec("0.1"), dec("0.05"), 2, 1);
  auto t = theta_two(m);
  EXPECT_EQ(t[k10], dec("0.16"));
  EXPECT_EQ(t[k01], dec("0.16"));
  EXPECT_EQ(t[k11], dec("0.1175"));
  EXPECT_EQ(t[k00], dec("0.5625"));
}

TEST(ThetaTwo, KOneIsIdentity) {
  TwoDiseaseModel<double> m(0.2, 0.15, 0.05, 1, 3);
  auto t = theta_two(m);
  EXPECT_NEAR(t[k10], 0.2, 1e-15);
  EXPECT_NEAR(t[k01], 0.15, 1e-15);
  EXPECT_NEAR(t[k11], 0.05, 1e-15);
}

TEST(HTwo, Examples) {
  auto p = h_two<Rational>({dec("0.16"), dec("0.16"), dec("0.1175")}, 2);
  EXPECT_EQ(p[k00], dec("0.75"));
  EXPECT_EQ(p[k10], dec("0.1"));
  EXPECT_EQ(p[k01], dec("0.1"));
  EXPECT_EQ(p[k11], dec("0.05"));

  auto z = h_two<double>({0.0, 0.0, 0.0}, 7);
  EXPECT_EQ(z, (Cells<double>{1.0, 0.0, 0.0, 0.0}));

  auto id = h_two<Rational>({dec("0.3"), dec("0.2"), dec("0.1")}, 1);
  EXPECT_EQ(id[k10], dec("0.3"));
  EXPECT_EQ(id[k01], dec("0.2"));
  EXPECT_EQ(id[k11], dec("0.1"));
}

TEST(HTwo, NonpositiveRadicandIsDomainError) {
  EXPECT_THROW(h_two<double>({0.5, 0.3, 0.2}, 2), DomainError);
  EXPECT_THROW(h_two<double>({0.1, 0.6, 0.5}, 2), DomainError);
}

TEST(IndepMisclass, AllOnesIsIdentity) {
  auto m = indep_misclass<Rational>({1, 1, 1, 1});
  for (int a = 0; a < 4; ++a) {
    for (int b = 0; b < 4; ++b) EXPECT_EQ(m(a, b), Rational(a == b ? 1 : 0));
  }
}

TEST(IndepMisclass, ProductFormula) {
  auto m = indep_misclass<Rational>({dec("0.9"), dec("0.7"), dec("0.95"), dec("0.6")});
  EXPECT_EQ(m(k10, k00), dec("0.095"));
  auto table = oracle::indep_table(dec("0.9"), dec("0.7"), dec("0.95"), dec("0.6"));
  for (int a = 0; a < 4; ++a) {
    for (int b = 0; b < 4; ++b) EXPECT_EQ(m(a, b), table[a][b]);
  }
}

TEST(MisclassModel, RejectsBadColumns) {
  Mat4<double> m{};
  for (int i = 0; i < 4; ++i) m[i][i] = 1.0;
  m[0][0] = 0.9;
  EXPECT_THROW(MisclassModel<double>{m}, DomainError);
  m[1][0] = 0.1;
  EXPECT_NO_THROW(MisclassModel<double>{m});
  m[1][0] = -0.1;
  m[2][0] = 0.2;
  EXPECT_THROW(MisclassModel<double>{m}, DomainError);
}

TEST(Identifiable, Examples) {
  auto id = identifiable(MisclassModel<Rational>::identity());
  EXPECT_TRUE(id.identifiable);
  EXPECT_EQ(id.det_phi, Rational(1));

  auto r = identifiable(indep_misclass<Rational>({dec("0.9"), dec("0.8"), dec("0.95"), dec("0.85")}));
  EXPECT_EQ(r.det_phi, dec("0.3136"));
  EXPECT_TRUE(r.identifiable);
  auto f = identifiable(indep_misclass<double>({0.9, 0.8, 0.95, 0.85}));
  EXPECT_NEAR(f.det_phi, 0.3136, 1e-15);

  auto z = identifiable(indep_misclass<Rational>({dec("0.4"), dec("0.6"), dec("0.95"), dec("0.85")}));
  EXPECT_EQ(z.det_phi, Rational(0));
  EXPECT_FALSE(z.identifiable);
  auto zf = identifiable(indep_misclass<double>({0.4, 0.6, 0.95, 0.85}));
  EXPECT_FALSE(zf.identifiable);
}

TEST(EtaTwo, IdentityMisclassGivesTheta) {
  TwoDiseaseModel<double> m(0.1, 0.1, 0.05, 2, 1, MisclassModel<double>::identity());
  auto eta = eta_two(m);
  auto theta = theta_two(m);
  for (int a = 0; a < 4; ++a) EXPECT_DOUBLE_EQ(eta[a], theta[a]);
}

TEST(EtaTwo, ZeroThetaGivesIntercept) {
  auto mm = indep_misclass<Rational>({dec("0.98"), dec("0.95"), dec("0.97"), dec("0.9")});
  Cells<Rational> theta{Rational(1), Rational(0), Rational(0), Rational(0)};
  auto eta = eta_two_affine(theta, mm);
  auto pi00 = mm.pi00();
  for (int r = 0; r < 3; ++r) EXPECT_EQ(eta[r + 1], pi00[r]);
  EXPECT_EQ(eta_two_mixture(theta, mm), eta);
}

TEST(EtaTwo, DualPathAgreement) {
  TwoDiseaseModel<double> m(0.1, 0.1, 0.05, 2, 1, indep_misclass<double>({0.98, 0.95, 0.97, 0.9}));
  auto theta = theta_two(m);
  auto a = eta_two_mixture(theta, *m.misclass());
  auto b = eta_two_affine(theta, *m.misclass());
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
  EXPECT_NO_THROW(eta_two(m));
}

// Properties over random and gridded parameters

TEST(ModelProperties, RoundTripOneDiseaseExact) {
  int checked = 0;
  for (int ip = 1; ip <= 10; ++ip) {
    for (int k : {1, 2, 3, 5, 10}) {
      for (const char* pi0 : {"1", "0.98", "0.9", "0.75"}) {
        for (const char* pi1 : {"1", "0.95", "0.8", "0.6", "0.55"}) {
          OneDiseaseModel<Rational> m(Rational(ip, 11), k, 1, dec(pi0), dec(pi1));
          EXPECT_EQ(h_one(theta_one(m), k, m.pi0(), m.pi1()), m.q());
          ++checked;
        }
      }
    }
  }
  EXPECT_GE(checked, 1000);
}

// In floats pi1 - theta cancels about -log10(q^k) digits, so the 1e-12
// check runs where pools are mostly negative (p <= 0.3, k <= 10).
TEST(ModelProperties, RoundTripOneDiseaseFloat) {
  int checked = 0;
  for (int ip = 1; ip <= 10; ++ip) {
    for (int k : {1, 2, 3, 5, 10}) {
      for (double pi0 : {1.0, 0.98, 0.9, 0.75}) {
        for (double pi1 : {1.0, 0.95, 0.8, 0.6, 0.55}) {
          const double p = ip * 0.03;
          OneDiseaseModel<double> m(p, k, 1, pi0, pi1);
          EXPECT_NEAR(h_one(theta_one(m), k, pi0, pi1), m.q(), 1e-12) << p << " " << k << " " << pi0 << " " << pi1;
          ++checked;
        }
      }
    }
  }
  EXPECT_GE(checked, 1000);
}

TEST(ModelProperties, RoundTripTwoDiseaseExactAndSimplex) {
  std::mt19937_64 rng(20240611);
  std::uniform_int_distribution<int> cut(1, 999);
  int checked = 0;
  while (checked < 1000) {
    // three sorted cut points of (0, 1000) give a random interior simplex point
    std::array<int, 3> v{cut(rng), cut(rng), cut(rng)};
    std::sort(v.begin(), v.end());
    if (v[0] == v[1] || v[1] == v[2]) continue;
    const int k = 1 + checked % 7;
    TwoDiseaseModel<Rational> m(Rational(v[0], 1000), Rational(v[1] - v[0], 1000), Rational(v[2] - v[1], 1000), k, 1);
    auto t = theta_two(m);
    Rational sum(0);
    for (const auto& x : t) {
      EXPECT_GE(x, 0);
      sum += x;
    }
    EXPECT_EQ(sum, Rational(1));
    EXPECT_EQ(h_two<Rational>({t[k10], t[k01], t[k11]}, k), m.p());
    ++checked;
  }
}

TEST(ModelProperties, RoundTripTwoDiseaseFloat) {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0.0, 0.1);
  for (int i = 0; i < 1000; ++i) {
    const int k = 1 + i % 10;
    TwoDiseaseModel<double> m(u(rng) + 1e-6, u(rng) + 1e-6, u(rng) + 1e-6, k, 1);
    auto t = theta_two(m);
    double sum = 0;
    for (double x : t) {
      EXPECT_GE(x, 0.0);
      sum += x;
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
    auto p = h_two<double>({t[k10], t[k01], t[k11]}, k);
    auto truth = m.p();
    for (int j = 0; j < 4; ++j) EXPECT_NEAR(p[j], truth[j], 1e-12);
  }
}

TEST(ModelProperties, EtaSimplexAndAffineConsistency) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 500; ++i) {
    IndepErrorParams<double> e{0.5 + 0.5 * u(rng), 0.5 + 0.5 * u(rng), 0.5 + 0.5 * u(rng), 0.5 + 0.5 * u(rng)};
    double p10 = 0.3 * u(rng) + 1e-3, p01 = 0.3 * u(rng) + 1e-3, p11 = 0.3 * u(rng) + 1e-3;
    TwoDiseaseModel<double> m(p10, p01, p11, 1 + i % 9, 1, indep_misclass(e));
    auto theta = theta_two(m);
    auto mix = eta_two_mixture(theta, *m.misclass());
    auto aff = eta_two_affine(theta, *m.misclass());
    double sum = 0;
    for (int a = 0; a < 4; ++a) {
      EXPECT_NEAR(mix[a], aff[a], 1e-12);
      EXPECT_GE(mix[a], -1e-12);
      sum += mix[a];
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
}

TEST(ModelProperties, DeterminantIdentityExact) {
  const char* grid[] = {"0.55", "0.7", "0.9", "0.99", "1"};
  for (const char* a : grid) {
    for (const char* b : grid) {
      for (const char* c : grid) {
        for (const char* d : grid) {
          IndepErrorParams<Rational> e{dec(a), dec(b), dec(c), dec(d)};
          auto m = indep_misclass(e);
          Rational nn = e.nu1() * e.nu2();
          EXPECT_EQ(identifiable(m).det_phi, nn * nn);
          EXPECT_EQ(oracle::det_phi(oracle::indep_table(e.pi0_1, e.pi1_1, e.pi0_2, e.pi1_2)), nn * nn);
        }
      }
    }
  }
}

TEST(ModelProperties, KOneDegeneracy) {
  OneDiseaseModel<Rational> m(dec("0.37"), 1, 4, dec("0.9"), dec("0.85"));
  // theta = pi1 - nu q: affine in p, and h_one inverts it exactly
  EXPECT_EQ(theta_one(m), dec("0.85") - dec("0.75") * dec("0.63"));
  EXPECT_EQ(h_one(theta_one(m), 1, m.pi0(), m.pi1()), dec("0.63"));
}
