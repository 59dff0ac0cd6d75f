#include <gtest/gtest.h>

#include <random>

#include "lcs/qstate.hpp"
#include "oracles.hpp"

using namespace lcs;

TEST(TauToRho, RankOneHorizontal) {
  const auto r = tau_to_rho({1, 0, 0, 0});
  EXPECT_DOUBLE_EQ(r.rho00, 1.0);
  EXPECT_DOUBLE_EQ(r.rho11, 0.0);
  EXPECT_DOUBLE_EQ(r.rho01_re, 0.0);
  EXPECT_DOUBLE_EQ(r.rho01_im, 0.0);
}

TEST(TauToRho, MaximallyMixed) {
  const auto r = tau_to_rho({1, 1, 0, 0});
  EXPECT_DOUBLE_EQ(r.rho00, 0.5);
  EXPECT_DOUBLE_EQ(r.rho11, 0.5);
}

TEST(TauToRho, MatchesExplicitProduct) {
  const auto r = tau_to_rho({1, 1, 1, 0});
  const auto m = oracle::tau_product(1, 1, 1, 0);
  EXPECT_NEAR(r.rho00, 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(r.rho11, 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(r.rho01_re, 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(r.rho01_im, 0.0, 1e-15);
  EXPECT_NEAR(std::abs(r.at(1, 0) - m(1, 0)), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(r.at(0, 1) - m(0, 1)), 0.0, 1e-15);

  std::mt19937_64 rng(3);
  std::normal_distribution<double> n;
  for (int i = 0; i < 200; ++i) {
    const double t[4] = {std::abs(n(rng)), std::abs(n(rng)), n(rng), n(rng)};
    const auto got = tau_to_rho({t[0], t[1], t[2], t[3]});
    const auto want = oracle::tau_product(t[0], t[1], t[2], t[3]);
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) EXPECT_NEAR(std::abs(got.at(a, b) - want(a, b)), 0.0, 1e-14);
  }
}

TEST(TauToRho, ZeroTraceRejected) {
  try {
    tau_to_rho({0, 0, 0, 0});
    FAIL() << "expected ZeroTrace";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ZeroTrace);
  }
}

TEST(TauToRho, OutputInvariants) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n;
  for (int i = 0; i < 10000; ++i) {
    const auto r = tau_to_rho({std::abs(n(rng)), std::abs(n(rng)), n(rng), n(rng)});
    EXPECT_NEAR(r.trace(), 1.0, 1e-15);
    EXPECT_GE(r.det(), -1e-14);
  }
}

TEST(RhoToTau, PureHorizontal) {
  const auto t = rho_to_tau(states::horizontal());
  EXPECT_NEAR(t.t0, 1.0, 1e-6);
  EXPECT_NEAR(t.t1, 0.0, 1e-6);
  EXPECT_NEAR(t.t2, 0.0, 1e-6);
  EXPECT_NEAR(t.t3, 0.0, 1e-6);
}

TEST(RhoToTau, MaximallyMixed) {
  const auto t = rho_to_tau(states::maximally_mixed());
  EXPECT_NEAR(t.t0, std::sqrt(0.5), 1e-11);
  EXPECT_NEAR(t.t1, std::sqrt(0.5), 1e-11);
  EXPECT_NEAR(t.t2, 0.0, 1e-15);
  EXPECT_NEAR(t.t3, 0.0, 1e-15);
}

TEST(RhoToTau, RoundTripFidelity) {
  const DensityMatrix r{1.0 / 3, 2.0 / 3, 1.0 / 3, 0.0};
  EXPECT_GE(fidelity(tau_to_rho(rho_to_tau(r)), r), 1.0 - 1e-10);
  EXPECT_GE(fidelity(tau_to_rho(rho_to_tau(states::vertical())), states::vertical()), 1.0 - 1e-10);

  std::mt19937_64 rng(5);
  std::normal_distribution<double> n;
  for (int i = 0; i < 10000; ++i) {
    const auto r0 = tau_to_rho({std::abs(n(rng)), std::abs(n(rng)), n(rng), n(rng)});
    const auto r1 = tau_to_rho(rho_to_tau(r0));
    ASSERT_GE(fidelity(r0, r1), 1.0 - 1e-10);
  }
}

TEST(Fidelity, SpecialCases) {
  const auto psi = pure_state({0.6, 0.0}, {0.0, 0.8});
  EXPECT_NEAR(fidelity(psi, psi), 1.0, 1e-15);
  EXPECT_NEAR(fidelity(states::horizontal(), states::vertical()), 0.0, 1e-15);
  EXPECT_NEAR(fidelity(states::horizontal(), states::maximally_mixed()), 0.5, 1e-15);
}

TEST(Fidelity, MatchesEigendecompositionOracle) {
  std::mt19937_64 rng(17);
  for (int i = 0; i < 1000; ++i) {
    const auto a = oracle::random_state(rng);
    const auto b = oracle::random_state(rng);
    ASSERT_NEAR(fidelity(a, b), oracle::fidelity_eig(a, b), 1e-10);
  }
}

TEST(Fidelity, SymmetricAndOverlapForPure) {
  std::mt19937_64 rng(19);
  std::normal_distribution<double> n;
  for (int i = 0; i < 1000; ++i) {
    const auto a = oracle::random_state(rng);
    const auto b = oracle::random_state(rng);
    EXPECT_NEAR(fidelity(a, b), fidelity(b, a), 1e-12);
    const cplx a0(n(rng), n(rng)), a1(n(rng), n(rng)), b0(n(rng), n(rng)), b1(n(rng), n(rng));
    const double na = std::sqrt(std::norm(a0) + std::norm(a1));
    const double nb = std::sqrt(std::norm(b0) + std::norm(b1));
    const double overlap = std::norm((std::conj(a0) * b0 + std::conj(a1) * b1) / (na * nb));
    EXPECT_NEAR(fidelity(pure_state(a0, a1), pure_state(b0, b1)), overlap, 1e-10);
  }
}

TEST(Purity, Values) {
  EXPECT_DOUBLE_EQ(purity(states::horizontal()), 1.0);
  EXPECT_DOUBLE_EQ(purity(states::maximally_mixed()), 0.5);
  EXPECT_DOUBLE_EQ(purity({0.75, 0.25, 0.0, 0.0}), 0.625);
}

TEST(Bloch, Convention) {
  const auto h = bloch_from_rho(states::horizontal());
  EXPECT_EQ(h.s1, 0.0);
  EXPECT_EQ(h.s2, 0.0);
  EXPECT_EQ(h.s3, 1.0);
  const auto m = bloch_from_rho(states::maximally_mixed());
  EXPECT_EQ(m.norm(), 0.0);
  EXPECT_NEAR(bloch_from_rho(states::diagonal()).s1, 1.0, 1e-15);
  EXPECT_NEAR(bloch_from_rho(states::right_circular()).s2, 1.0, 1e-15);
  // |R> = (|H> + i|V>)/sqrt(2)
  const auto r = pure_state({1.0, 0.0}, {0.0, 1.0});
  EXPECT_NEAR(bloch_from_rho(r).s2, 1.0, 1e-15);
}

TEST(Bloch, RoundTripAndIsometry) {
  std::mt19937_64 rng(23);
  for (int i = 0; i < 100; ++i) {
    const auto r = oracle::random_state(rng);
    const auto back = rho_from_bloch(bloch_from_rho(r));
    EXPECT_NEAR(back.rho00, r.rho00, 1e-12);
    EXPECT_NEAR(back.rho11, r.rho11, 1e-12);
    EXPECT_NEAR(back.rho01_re, r.rho01_re, 1e-12);
    EXPECT_NEAR(back.rho01_im, r.rho01_im, 1e-12);
    // Hilbert-Schmidt distance = |b1 - b2| / sqrt(2)
    const auto r2 = oracle::random_state(rng);
    const auto b1 = bloch_from_rho(r), b2 = bloch_from_rho(r2);
    const double bd = std::hypot(b1.s1 - b2.s1, b1.s2 - b2.s2, b1.s3 - b2.s3);
    const double hs = (oracle::dense(r) - oracle::dense(r2)).norm();
    EXPECT_NEAR(hs, bd / std::sqrt(2.0), 1e-12);
  }
}

TEST(Bloch, RejectsOutsideBall) {
  EXPECT_NO_THROW(rho_from_bloch({0.0, 0.0, 1.0 + 1e-10}));
  try {
    rho_from_bloch({0.0, 0.8, 0.8});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::NonPhysical);
  }
}

TEST(QStateJson, TupleLayout) {
  const DensityMatrix r{0.7, 0.3, 0.1, -0.2};
  const nlohmann::json j = r;
  EXPECT_EQ(j.dump(), "[0.7,0.1,-0.2,0.3]");
  EXPECT_EQ(j.get<DensityMatrix>(), r);
  const nlohmann::json jt = TauParams{1, 2, 3, 4};
  EXPECT_EQ(jt.dump(), "[1.0,2.0,3.0,4.0]");
}

TEST(Fidelity, PureArgumentIsExpectationValue) {
  std::mt19937_64 rng(77);
  for (int i = 0; i < 1000; ++i) {
    const auto p = oracle::random_pure(rng);
    const auto m = oracle::random_state(rng, false);
    EXPECT_NEAR(fidelity(p, m), trace_product(p, m), 1e-13);
  }
}
