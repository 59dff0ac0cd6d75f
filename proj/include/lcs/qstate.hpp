#pragma once

// Qubit state algebra: density matrices, the Cholesky (tau) parametrization
// used as network output, fidelity, purity and Bloch coordinates.
//
// Pauli convention: s1 <-> sigma_x (D/A), s2 <-> sigma_y (R/L),
// s3 <-> sigma_z (H/V), with |H> = (1, 0).

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <span>

#include <json.hpp>

#include "lcs/error.hpp"

namespace lcs {

using cplx = std::complex<double>;

/// 2x2 Hermitian, positive semidefinite, unit-trace qubit state.
/// Stores the independent real entries; rho10 is the conjugate of rho01.
struct DensityMatrix {
  double rho00 = 1.0;
  double rho11 = 0.0;
  double rho01_re = 0.0;
  double rho01_im = 0.0;

  cplx rho01() const { return {rho01_re, rho01_im}; }
  cplx rho10() const { return {rho01_re, -rho01_im}; }

  cplx at(int row, int col) const {
    if (row == 0) return col == 0 ? cplx(rho00) : rho01();
    return col == 0 ? rho10() : cplx(rho11);
  }

  double trace() const { return rho00 + rho11; }
  double det() const { return rho00 * rho11 - (rho01_re * rho01_re + rho01_im * rho01_im); }

  /// Serialization order [rho00, rho01_re, rho01_im, rho11].
  std::array<double, 4> elements() const { return {rho00, rho01_re, rho01_im, rho11}; }

  static DensityMatrix from_elements(std::span<const double> e) {
    if (e.size() != 4) throw Error(Errc::DimensionMismatch, "density matrix needs 4 elements");
    return {e[0], e[3], e[1], e[2]};
  }

  bool is_valid(double tol = 1e-12) const {
    return std::isfinite(rho00) && std::isfinite(rho11) && std::isfinite(rho01_re) &&
           std::isfinite(rho01_im) && rho00 >= -tol && rho11 >= -tol &&
           std::abs(trace() - 1.0) <= tol && det() >= -tol;
  }

  /// Complex conjugate in the H/V basis (flips the sigma_y component).
  DensityMatrix conjugate() const { return {rho00, rho11, rho01_re, -rho01_im}; }

  friend bool operator==(const DensityMatrix&, const DensityMatrix&) = default;
};

/// Projector onto the normalized ket a|H> + b|V>.
inline DensityMatrix pure_state(cplx a, cplx b) {
  const double n = std::norm(a) + std::norm(b);
  if (!(n > 0.0)) throw Error(Errc::ZeroTrace, "zero ket");
  const cplx r01 = a * std::conj(b) / n;
  return {std::norm(a) / n, std::norm(b) / n, r01.real(), r01.imag()};
}

namespace states {
inline DensityMatrix horizontal() { return {1.0, 0.0, 0.0, 0.0}; }
inline DensityMatrix vertical() { return {0.0, 1.0, 0.0, 0.0}; }
inline DensityMatrix diagonal() { return {0.5, 0.5, 0.5, 0.0}; }
inline DensityMatrix antidiagonal() { return {0.5, 0.5, -0.5, 0.0}; }
// |R> = (|H> + i|V>)/sqrt(2)
inline DensityMatrix right_circular() { return {0.5, 0.5, 0.0, -0.5}; }
inline DensityMatrix left_circular() { return {0.5, 0.5, 0.0, 0.5}; }
inline DensityMatrix maximally_mixed() { return {0.5, 0.5, 0.0, 0.0}; }
}  // namespace states

/// Lower-triangular Cholesky factor tau = [[t0, 0], [t2 + i t3, t1]].
struct TauParams {
  double t0 = 1.0;
  double t1 = 0.0;
  double t2 = 0.0;
  double t3 = 0.0;

  std::array<double, 4> values() const { return {t0, t1, t2, t3}; }
  static TauParams from_values(std::span<const double> v) {
    if (v.size() != 4) throw Error(Errc::DimensionMismatch, "tau needs 4 values");
    return {v[0], v[1], v[2], v[3]};
  }
};

/// rho = tau tau^dagger / Tr[tau tau^dagger]. Only squares of the diagonal enter,
/// so raw network outputs with a negative diagonal are accepted as well.
inline DensityMatrix tau_to_rho(const TauParams& p) {
  const double norm = p.t0 * p.t0 + p.t1 * p.t1 + p.t2 * p.t2 + p.t3 * p.t3;
  if (!(norm > 1e-300)) throw Error(Errc::ZeroTrace, "tau parameters have zero trace");
  DensityMatrix r;
  r.rho00 = p.t0 * p.t0 / norm;
  r.rho11 = (p.t1 * p.t1 + p.t2 * p.t2 + p.t3 * p.t3) / norm;
  r.rho01_re = p.t0 * p.t2 / norm;
  r.rho01_im = -p.t0 * p.t3 / norm;
  return r;
}

/// Diagonal shift applied before factorization so rank-deficient states factor silently.
inline constexpr double kCholeskyJitter = 1e-12;

inline TauParams rho_to_tau(const DensityMatrix& rho) {
  const double a = std::max(rho.rho00, 0.0) + kCholeskyJitter;
  TauParams p;
  p.t0 = std::sqrt(a);
  // tau10 = rho10 / tau00 = conj(rho01) / t0
  p.t2 = rho.rho01_re / p.t0;
  p.t3 = -rho.rho01_im / p.t0;
  p.t1 = std::sqrt(std::max(rho.rho11 + kCholeskyJitter - p.t2 * p.t2 - p.t3 * p.t3, 0.0));
  return p;
}

inline double trace_product(const DensityMatrix& a, const DensityMatrix& b) {
  return a.rho00 * b.rho00 + a.rho11 * b.rho11 +
         2.0 * (a.rho01_re * b.rho01_re + a.rho01_im * b.rho01_im);
}

/// Determinants at or below this are rounding residue of a pure state; the
/// square root in the fidelity would otherwise turn 1e-17 into 1e-9.
inline constexpr double kPureDetFloor = 1e-15;

/// Uhlmann fidelity via the qubit closed form Tr(r1 r2) + 2 sqrt(det r1 det r2).
inline double fidelity(const DensityMatrix& a, const DensityMatrix& b) {
  const auto floored = [](double d) { return d > kPureDetFloor ? d : 0.0; };
  const double da = floored(a.det());
  const double db = floored(b.det());
  const double f = trace_product(a, b) + 2.0 * std::sqrt(da * db);
  return std::clamp(f, 0.0, 1.0);
}

inline double infidelity(const DensityMatrix& a, const DensityMatrix& b) {
  return 1.0 - fidelity(a, b);
}

inline double purity(const DensityMatrix& rho) { return trace_product(rho, rho); }

struct BlochVector {
  double s1 = 0.0;
  double s2 = 0.0;
  double s3 = 0.0;

  double norm() const { return std::sqrt(s1 * s1 + s2 * s2 + s3 * s3); }
};

inline BlochVector bloch_from_rho(const DensityMatrix& rho) {
  return {2.0 * rho.rho01_re, -2.0 * rho.rho01_im, rho.rho00 - rho.rho11};
}

inline DensityMatrix rho_from_bloch(const BlochVector& b) {
  if (b.norm() > 1.0 + 1e-9) throw Error(Errc::NonPhysical, "Bloch vector outside the unit ball");
  return {0.5 * (1.0 + b.s3), 0.5 * (1.0 - b.s3), 0.5 * b.s1, -0.5 * b.s2};
}

// JSON: DensityMatrix as [rho00, rho01_re, rho01_im, rho11], TauParams as [t0, t1, t2, t3].
inline void to_json(nlohmann::json& j, const DensityMatrix& r) { j = r.elements(); }
inline void from_json(const nlohmann::json& j, DensityMatrix& r) {
  const auto e = j.get<std::array<double, 4>>();
  r = DensityMatrix::from_elements(e);
}
inline void to_json(nlohmann::json& j, const TauParams& p) { j = p.values(); }
inline void from_json(const nlohmann::json& j, TauParams& p) {
  const auto v = j.get<std::array<double, 4>>();
  p = TauParams::from_values(v);
}

}  // namespace lcs
