#pragma once

// Six-projection polarization tomography: ideal projection probabilities,
// binomial count simulation and the R-rho-R maximum-likelihood iteration.

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "lcs/error.hpp"
#include "lcs/lcsim.hpp"
#include "lcs/qstate.hpp"

namespace lcs::tomo {

enum Projection : std::size_t { H = 0, V, D, A, R, L };

inline constexpr std::size_t kNumProjections = 6;

/// Projectors onto H, V, D, A, R, L in that order.
inline const std::array<DensityMatrix, kNumProjections>& projectors() {
  static const std::array<DensityMatrix, kNumProjections> p = {
      states::horizontal(), states::vertical(),       states::diagonal(),
      states::antidiagonal(), states::right_circular(), states::left_circular()};
  return p;
}

using Probabilities = std::array<double, kNumProjections>;

inline Probabilities projection_probs(const DensityMatrix& rho) {
  Probabilities p{};
  const auto& proj = projectors();
  for (std::size_t j = 0; j < kNumProjections; ++j) p[j] = trace_product(rho, proj[j]);
  return p;
}

struct CountVector {
  std::array<std::int64_t, kNumProjections> counts{};
  std::int64_t shots_per_projection = 0;

  std::int64_t total() const {
    std::int64_t t = 0;
    for (auto c : counts) t += c;
    return t;
  }
};

/// count_j ~ Binomial(shots, p_j), reproducible for a fixed seed.
inline CountVector simulate_counts(const Probabilities& probs, std::int64_t shots, std::uint64_t seed) {
  if (shots < 0) throw Error(Errc::OutOfRange, "negative shot count");
  std::mt19937_64 rng(seed);
  CountVector out;
  out.shots_per_projection = shots;
  for (std::size_t j = 0; j < kNumProjections; ++j) {
    const double p = std::clamp(probs[j], 0.0, 1.0);
    std::binomial_distribution<std::int64_t> dist(shots, p);
    out.counts[j] = dist(rng);
  }
  return out;
}

using Frequencies = std::array<double, kNumProjections>;

inline Frequencies frequencies(const CountVector& counts) {
  const auto total = counts.total();
  if (total <= 0) throw Error(Errc::ZeroProbability, "all counts are zero");
  Frequencies f{};
  for (std::size_t j = 0; j < kNumProjections; ++j) f[j] = static_cast<double>(counts.counts[j]) / static_cast<double>(total);
  return f;
}

/// Lower clamp on Tr(rho Pi_j) inside R(rho).
inline constexpr double kProbabilityFloor = 1e-15;

inline double log_likelihood(const DensityMatrix& rho, const Frequencies& f) {
  const auto p = projection_probs(rho);
  double ll = 0.0;
  for (std::size_t j = 0; j < kNumProjections; ++j)
    if (f[j] > 0.0) ll += f[j] * std::log(std::max(p[j], kProbabilityFloor));
  return ll;
}

/// R(rho) = sum_j f_j / Tr(rho Pi_j) Pi_j, with Tr(R rho) = 1.
inline Eigen::Matrix2cd r_operator(const DensityMatrix& rho, const Frequencies& f) {
  const auto p = projection_probs(rho);
  const auto& proj = projectors();
  Eigen::Matrix2cd r = Eigen::Matrix2cd::Zero();
  for (std::size_t j = 0; j < kNumProjections; ++j)
    r += (f[j] / std::max(p[j], kProbabilityFloor)) * to_matrix(proj[j]);
  return r;
}

inline DensityMatrix normalized(const Eigen::Matrix2cd& m) {
  const double tr = m.trace().real();
  if (!(tr > 0.0)) throw Error(Errc::ZeroTrace, "iterate lost its trace");
  return from_matrix(m / tr);
}

/// One R-rho-R step; the undiluted step is used whenever it does not lower the
/// likelihood, otherwise the diluted form (I + eps R) rho (I + eps R) with
/// halving eps, which is monotone for small eps.
inline DensityMatrix rrr_step(const DensityMatrix& rho, const Frequencies& f, double current_ll) {
  const Eigen::Matrix2cd r = r_operator(rho, f);
  const Eigen::Matrix2cd m = to_matrix(rho);
  DensityMatrix next = normalized(r * m * r);
  if (log_likelihood(next, f) >= current_ll - 1e-14) return next;
  double eps = 1.0;
  for (int k = 0; k < 60; ++k, eps *= 0.5) {
    const Eigen::Matrix2cd g = Eigen::Matrix2cd::Identity() + eps * r;
    next = normalized(g * m * g);
    if (log_likelihood(next, f) >= current_ll - 1e-14) return next;
  }
  return rho;
}

enum class MleStart { MaximallyMixed, LinearInversion };

struct MleOptions {
  int max_iters = 1000;
  double tol = 1e-12;
  MleStart start = MleStart::LinearInversion;
  bool record_likelihood = false;
};

struct MleResult {
  DensityMatrix state;
  int iterations = 0;
  bool converged = false;
  std::vector<double> log_likelihood;

  /// Throws NoConvergence when the tolerance was not met.
  const DensityMatrix& require_converged() const {
    if (!converged) throw Error(Errc::NoConvergence, "maximum-likelihood iteration hit max_iters");
    return state;
  }
};

/// Pairwise linear inversion, shrunk just inside the Bloch ball so every
/// projection keeps a nonzero probability.
inline DensityMatrix linear_inversion(const Frequencies& f) {
  auto axis = [](double plus, double minus) {
    const double s = plus + minus;
    return s > 0.0 ? (plus - minus) / s : 0.0;
  };
  BlochVector b{axis(f[D], f[A]), axis(f[R], f[L]), axis(f[H], f[V])};
  constexpr double kMaxRadius = 1.0 - 1e-9;
  const double n = b.norm();
  if (n > kMaxRadius) {
    const double k = kMaxRadius / n;
    b = {b.s1 * k, b.s2 * k, b.s3 * k};
  }
  return rho_from_bloch(b);
}

inline MleResult mle_reconstruct(const Frequencies& f, const MleOptions& options = {}) {
  MleResult result;
  DensityMatrix rho = options.start == MleStart::LinearInversion ? linear_inversion(f) : states::maximally_mixed();
  double ll = log_likelihood(rho, f);
  if (options.record_likelihood) result.log_likelihood.push_back(ll);
  for (int it = 0; it < options.max_iters; ++it) {
    const DensityMatrix next = rrr_step(rho, f, ll);
    const double change = std::max({std::abs(next.rho00 - rho.rho00), std::abs(next.rho11 - rho.rho11),
                                    std::abs(next.rho01_re - rho.rho01_re), std::abs(next.rho01_im - rho.rho01_im)});
    rho = next;
    ll = log_likelihood(rho, f);
    if (options.record_likelihood) result.log_likelihood.push_back(ll);
    result.iterations = it + 1;
    if (change < options.tol) {
      result.converged = true;
      break;
    }
  }
  result.state = rho;
  return result;
}

inline MleResult mle_reconstruct(const CountVector& counts, const MleOptions& options = {}) {
  return mle_reconstruct(frequencies(counts), options);
}

}  // namespace lcs::tomo
