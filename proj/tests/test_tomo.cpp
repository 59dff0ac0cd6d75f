#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "lcs/tomo.hpp"
#include "oracles.hpp"

using namespace lcs;
using namespace lcs::tomo;

namespace {

void expect_probs(const Probabilities& got, const Probabilities& want) {
  for (std::size_t j = 0; j < kNumProjections; ++j) EXPECT_NEAR(got[j], want[j], 1e-15) << "projection " << j;
}

}  // namespace

TEST(Projections, CompletePairs) {
  const auto& p = projectors();
  for (std::size_t pair = 0; pair < 3; ++pair) {
    const auto& a = p[2 * pair];
    const auto& b = p[2 * pair + 1];
    EXPECT_DOUBLE_EQ(a.rho00 + b.rho00, 1.0);
    EXPECT_DOUBLE_EQ(a.rho11 + b.rho11, 1.0);
    EXPECT_DOUBLE_EQ(a.rho01_re + b.rho01_re, 0.0);
    EXPECT_DOUBLE_EQ(a.rho01_im + b.rho01_im, 0.0);
  }
}

TEST(Projections, Examples) {
  expect_probs(projection_probs(states::horizontal()), {1, 0, 0.5, 0.5, 0.5, 0.5});
  expect_probs(projection_probs(states::maximally_mixed()), {0.5, 0.5, 0.5, 0.5, 0.5, 0.5});
  expect_probs(projection_probs(pure_state({1 / std::sqrt(2.0), 0}, {0, 1 / std::sqrt(2.0)})), {0.5, 0.5, 0.5, 0.5, 1, 0});
}

TEST(Counts, DegenerateAndEmpty) {
  const auto c = simulate_counts({1, 0, 1, 0, 1, 0}, 100, 9);
  EXPECT_EQ(c.counts[0], 100);
  EXPECT_EQ(c.counts[1], 0);
  const auto z = simulate_counts({0.5, 0.5, 0.5, 0.5, 0.5, 0.5}, 0, 9);
  EXPECT_EQ(z.total(), 0);
}

TEST(Counts, Concentration) {
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto c = simulate_counts({0.5, 0.5, 0.5, 0.5, 0.5, 0.5}, 1000000, seed);
    for (auto n : c.counts) EXPECT_LE(std::abs(n - 500000), 2500);
  }
}

TEST(Counts, Reproducible) {
  const Probabilities p{0.3, 0.7, 0.5, 0.5, 0.9, 0.1};
  EXPECT_EQ(simulate_counts(p, 1000, 5).counts, simulate_counts(p, 1000, 5).counts);
}

TEST(Mle, FixedPointIdentity) {
  std::mt19937_64 rng(31);
  for (int i = 0; i < 100; ++i) {
    const auto rho = oracle::random_state(rng);
    const auto f = projection_probs(rho);
    const Eigen::Matrix2cd r = r_operator(rho, f);
    const Eigen::Matrix2cd m = r * to_matrix(rho) * r;
    const Eigen::Matrix2cd n = m / m.trace().real();
    EXPECT_LT((n - to_matrix(rho)).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Mle, DiagonalExact) {
  const auto r = mle_reconstruct(projection_probs(states::diagonal()));
  EXPECT_GE(fidelity(r.state, states::diagonal()), 1.0 - 1e-8);
}

TEST(Mle, EqualFrequenciesGiveMixed) {
  const Frequencies f{1.0 / 6, 1.0 / 6, 1.0 / 6, 1.0 / 6, 1.0 / 6, 1.0 / 6};
  for (auto start : {MleStart::MaximallyMixed, MleStart::LinearInversion}) {
    MleOptions o;
    o.start = start;
    const auto r = mle_reconstruct(f, o);
    EXPECT_NEAR(r.state.rho00, 0.5, 1e-10);
    EXPECT_NEAR(r.state.rho01_re, 0.0, 1e-10);
    EXPECT_NEAR(r.state.rho01_im, 0.0, 1e-10);
  }
}

TEST(Mle, MatchesGridSearchOracle) {
  CountVector c;
  c.counts = {900, 100, 480, 520, 510, 490};
  c.shots_per_projection = 1000;
  const auto f = frequencies(c);
  MleOptions o;
  o.max_iters = 20000;
  const auto r = mle_reconstruct(c, o);
  // Brute-force likelihood maximum over a 201^3 lattice in the Bloch ball.
  double best = -1e300;
  BlochVector arg{};
  for (int i = 0; i <= 200; ++i)
    for (int j = 0; j <= 200; ++j)
      for (int k = 0; k <= 200; ++k) {
        const BlochVector b{-1 + i / 100.0, -1 + j / 100.0, -1 + k / 100.0};
        if (b.norm() > 1.0) continue;
        const double p[6] = {(1 + b.s3) / 2, (1 - b.s3) / 2, (1 + b.s1) / 2, (1 - b.s1) / 2, (1 + b.s2) / 2, (1 - b.s2) / 2};
        double ll = 0;
        for (int q = 0; q < 6; ++q) ll += f[q] * std::log(std::max(p[q], 1e-300));
        if (ll > best) {
          best = ll;
          arg = b;
        }
      }
  EXPECT_GE(fidelity(r.state, rho_from_bloch(arg)), 1.0 - 1e-4);
  EXPECT_GE(log_likelihood(r.state, f), best - 1e-9);
}

TEST(Mle, RandomPureStatesAndMonotoneLikelihood) {
  std::mt19937_64 rng(37);
  for (auto start : {MleStart::LinearInversion, MleStart::MaximallyMixed}) {
    for (int i = 0; i < 100; ++i) {
      const auto psi = oracle::random_pure(rng);
      MleOptions o;
      o.start = start;
      o.record_likelihood = true;
      const auto r = mle_reconstruct(projection_probs(psi), o);
      for (std::size_t k = 1; k < r.log_likelihood.size(); ++k)
        ASSERT_GE(r.log_likelihood[k], r.log_likelihood[k - 1] - 1e-12);
      if (start == MleStart::LinearInversion) {
        ASSERT_GE(fidelity(r.state, psi), 1.0 - 1e-8);
      }
      ASSERT_TRUE(r.state.is_valid(1e-12));
    }
  }
}

TEST(Mle, NoisyCountsStayPhysical) {
  std::mt19937_64 rng(41);
  for (int i = 0; i < 50; ++i) {
    const auto psi = oracle::random_pure(rng);
    const auto c = simulate_counts(projection_probs(psi), 1000, rng());
    const auto r = mle_reconstruct(c, {5000, 1e-13, MleStart::LinearInversion, false});
    EXPECT_TRUE(r.state.is_valid(1e-12));
    EXPECT_GT(fidelity(r.state, psi), 0.95);
  }
}

TEST(Mle, NoConvergenceReported) {
  const auto psi = pure_state({0.6, 0}, {0, 0.8});
  MleOptions o;
  o.max_iters = 1;
  o.start = MleStart::MaximallyMixed;
  const auto r = mle_reconstruct(projection_probs(psi), o);
  EXPECT_FALSE(r.converged);
  try {
    r.require_converged();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::NoConvergence);
  }
}

TEST(Mle, ZeroCountsRejected) {
  CountVector c;
  c.shots_per_projection = 10;
  EXPECT_THROW(frequencies(c), Error);
}
