#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "lcs/entangle.hpp"
#include "oracles.hpp"

using namespace lcs;
using namespace lcs::entangle;

namespace {

// Concurrence via the non-Hermitian route: square roots of the eigenvalues of rho * rho~.
double concurrence_nonhermitian(const TwoQubitState& s) {
  const Matrix4 yy = kron(sigma_y(), sigma_y());
  const Matrix4 m = s.rho * yy * s.rho.conjugate() * yy;
  Eigen::ComplexEigenSolver<Matrix4> es(m);
  std::vector<double> l;
  for (int i = 0; i < 4; ++i) l.push_back(std::sqrt(std::max(0.0, es.eigenvalues()(i).real())));
  std::sort(l.rbegin(), l.rend());
  return std::max(0.0, l[0] - l[1] - l[2] - l[3]);
}

// Conditional state by explicit (P x I) rho (P x I) and a dense partial trace.
DensityMatrix remote_dense(const TwoQubitState& s, const DensityMatrix& p) {
  const Matrix4 pi = kron(oracle::dense(p), Eigen::Matrix2cd::Identity());
  const Matrix4 post = pi * s.rho * pi;
  Eigen::Matrix2cd r = Eigen::Matrix2cd::Zero();
  for (int a = 0; a < 2; ++a) r += post.block<2, 2>(2 * a, 2 * a);
  r /= r.trace();
  return {r(0, 0).real(), r(1, 1).real(), r(0, 1).real(), r(0, 1).imag()};
}

}  // namespace

TEST(States, SingletAndWernerAreValid) {
  const auto s = singlet();
  EXPECT_TRUE(s.is_valid());
  EXPECT_NEAR(s.purity(), 1.0, 1e-15);
  for (double v : {0.0, 0.3, 0.9853, 1.0}) EXPECT_TRUE(werner(v).is_valid());
  EXPECT_THROW(werner(1.1), Error);
  EXPECT_THROW(werner(-0.1), Error);
  EXPECT_NEAR(werner(0).purity(), 0.25, 1e-15);
}

TEST(States, ReducedStatesOfSingletAreMixed) {
  const auto s = singlet();
  EXPECT_NEAR(reduced_first(s).rho00, 0.5, 1e-15);
  EXPECT_NEAR(reduced_second(s).rho11, 0.5, 1e-15);
  EXPECT_NEAR(bloch_from_rho(reduced_first(s)).norm(), 0.0, 1e-15);
  const DensityMatrix a{0.7, 0.3, 0.2, -0.1}, b{0.4, 0.6, -0.3, 0.2};
  const auto p = product_state(a, b);
  EXPECT_LT(infidelity(reduced_first(p), a), 1e-14);
  EXPECT_LT(infidelity(reduced_second(p), b), 1e-14);
}

TEST(Concurrence, KnownValuesAndWernerClosedForm) {
  EXPECT_NEAR(concurrence(singlet()), 1.0, 1e-10);
  EXPECT_NEAR(concurrence(product_state(states::diagonal(), states::horizontal())), 0.0, 1e-7);
  for (double v : {0.2, 1.0 / 3, 0.5, 0.8, 0.9853, 1.0}) EXPECT_NEAR(concurrence(werner(v)), werner_concurrence(v), 1e-10) << v;
  EXPECT_NEAR(werner_concurrence(0.9853), 0.97795, 1e-12);
  EXPECT_NEAR(werner_concurrence(0.9853), 0.978, 1e-3);
  EXPECT_NEAR(werner_weight_for_concurrence(werner_concurrence(0.8)), 0.8, 1e-15);
}

TEST(Concurrence, MatchesNonHermitianRoute) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  for (int t = 0; t < 50; ++t) {
    Matrix4 a;
    for (int i = 0; i < 16; ++i) a.data()[i] = {g(rng), g(rng)};
    Matrix4 rho = a * a.adjoint();
    rho /= rho.trace();
    const TwoQubitState s{rho};
    EXPECT_NEAR(concurrence(s), concurrence_nonhermitian(s), 1e-8);
  }
}

TEST(Remote, MatchesDensePartialTrace) {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 100; ++t) {
    const auto p = oracle::random_pure(rng);
    const auto w = werner(0.2 + 0.8 * std::uniform_real_distribution<double>(0, 1)(rng));
    const auto r = remote_state(w, p, false);
    EXPECT_LT(infidelity(r.state, remote_dense(w, p)), 1e-12);
    EXPECT_NEAR(r.probability, 0.5, 1e-12);
  }
}

TEST(Remote, IdealSingletReproducesTargets) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 100; ++t) {
    const auto target = oracle::random_pure(rng);
    const auto r = remote_state(singlet(), pure_projector(target).conjugate(), true);
    EXPECT_NEAR(fidelity(r.state, target), 1.0, 1e-10);
  }
}

TEST(Remote, WernerFidelityIsOnePlusVOverTwo) {
  const double v = 0.9853;
  std::mt19937_64 rng(6);
  for (int t = 0; t < 50; ++t) {
    const auto target = oracle::random_pure(rng);
    const auto r = remote_state(werner(v), pure_projector(target).conjugate(), true);
    EXPECT_NEAR(fidelity(r.state, target), (1 + v) / 2, 1e-10);
  }
  EXPECT_NEAR((1 + v) / 2, 0.99265, 1e-12);
}

TEST(Remote, ZeroProbabilityRejected) {
  const auto p = product_state(states::horizontal(), states::horizontal());
  try {
    remote_state(p, states::vertical(), false);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ZeroProbability);
  }
  EXPECT_THROW(pure_projector(states::maximally_mixed()), Error);
}

TEST(Spiral, PointsOnCapAndEqualArea) {
  const auto pts = spiral_cap(1024);
  ASSERT_EQ(pts.size(), 1024u);
  double zsum = 0;
  for (const auto& b : pts) {
    EXPECT_NEAR(b.norm(), 1.0, 1e-12);
    zsum += b.s3;
  }
  EXPECT_NEAR(zsum / 1024, 0.0, 1e-12);  // equal-area over the full sphere
  for (const auto& b : spiral_cap(200, std::numbers::pi / 3)) EXPECT_GE(b.s3, 0.5 - 1e-12);
  EXPECT_THROW(spiral_cap(0), Error);
  EXPECT_THROW(spiral_cap(5, 4.0), Error);
}

TEST(Parse, TargetsAndResources) {
  EXPECT_EQ(parse_targets("spiral:16").size(), 16u);
  for (const auto& t : parse_targets("spiral:50:90")) EXPECT_GE(bloch_from_rho(t).s3, -1e-12);
  EXPECT_THROW(parse_targets("grid:4"), Error);
  EXPECT_THROW(parse_targets("spiral:x"), Error);
  EXPECT_NEAR(concurrence(parse_resource("singlet")), 1.0, 1e-10);
  EXPECT_NEAR(concurrence(parse_resource("werner:0.5")), 0.25, 1e-10);
  EXPECT_THROW(parse_resource("bell"), Error);
  EXPECT_THROW(parse_resource("werner:abc"), Error);
  EXPECT_THROW(parse_resource("werner:2"), Error);
}

TEST(Demo, OracleSourceAndCsv) {
  const auto targets = parse_targets("spiral:64");
  const auto rep = rsp_demo(targets, singlet(), oracle_source(), 2);
  EXPECT_EQ(rep.rows.size(), 64u);
  EXPECT_EQ(rep.skipped, 0u);
  EXPECT_NEAR(rep.fidelity.mean, 1.0, 1e-10);
  const auto w = rsp_demo(targets, werner(0.9853), oracle_source());
  EXPECT_NEAR(w.fidelity.mean, 0.99265, 1e-10);
  std::ostringstream os;
  write_rsp_csv(os, rep);
  EXPECT_EQ(os.str().substr(0, os.str().find('\r')), "index,s1,s2,s3,fidelity,success_probability");
  EXPECT_THROW(rsp_demo({states::maximally_mixed()}, singlet(), oracle_source()), Error);
}
