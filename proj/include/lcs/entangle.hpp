#pragma once

// Two-qubit states for remote state preparation: singlet and Werner
// resources, concurrence, and the conditional state of qubit 2 after
// projecting qubit 1. Basis order |HH>, |HV>, |VH>, |VV> (qubit 1 first).

#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lcs/error.hpp"
#include "lcs/qstate.hpp"
#include "lcs/util.hpp"

namespace lcs::entangle {

using Matrix4 = Eigen::Matrix4cd;

struct TwoQubitState {
  Matrix4 rho = Matrix4::Identity() / 4.0;

  double trace() const { return rho.trace().real(); }
  double purity() const { return (rho * rho).trace().real(); }

  bool is_valid(double tol = 1e-10) const {
    if ((rho - rho.adjoint()).cwiseAbs().maxCoeff() > 1e-12) return false;
    if (std::abs(trace() - 1.0) > 1e-12) return false;
    Eigen::SelfAdjointEigenSolver<Matrix4> es(rho);
    return es.eigenvalues().minCoeff() >= -tol;
  }
};

inline Eigen::Matrix2cd sigma_y() {
  Eigen::Matrix2cd s;
  s << 0.0, std::complex<double>(0.0, -1.0), std::complex<double>(0.0, 1.0), 0.0;
  return s;
}

inline Matrix4 kron(const Eigen::Matrix2cd& a, const Eigen::Matrix2cd& b) {
  Matrix4 k;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) k.block<2, 2>(2 * i, 2 * j) = a(i, j) * b;
  return k;
}

/// (|HV> - |VH>) / sqrt(2).
inline TwoQubitState singlet() {
  Eigen::Vector4cd psi(0.0, 1.0, -1.0, 0.0);
  psi /= std::sqrt(2.0);
  return {psi * psi.adjoint()};
}

/// v * singlet + (1 - v) * I / 4.
inline TwoQubitState werner(double v) {
  if (!(v >= 0.0 && v <= 1.0)) throw Error(Errc::OutOfRange, "Werner weight must lie in [0, 1]");
  return {v * singlet().rho + (1.0 - v) * Matrix4::Identity() / 4.0};
}

inline TwoQubitState product_state(const DensityMatrix& a, const DensityMatrix& b) {
  Eigen::Matrix2cd ma, mb;
  ma << a.rho00, a.rho01(), a.rho10(), a.rho11;
  mb << b.rho00, b.rho01(), b.rho10(), b.rho11;
  return {kron(ma, mb)};
}

/// Wootters concurrence from the eigenvalues of sqrt(sqrt(rho) rho~ sqrt(rho)),
/// rho~ = (sy x sy) rho* (sy x sy).
inline double concurrence(const TwoQubitState& s) {
  const Matrix4 yy = kron(sigma_y(), sigma_y());
  const Matrix4 tilde = yy * s.rho.conjugate() * yy;
  Eigen::SelfAdjointEigenSolver<Matrix4> es(s.rho);
  const Eigen::Vector4d ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const Matrix4 sq = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().adjoint();
  const Matrix4 inner = sq * tilde * sq;
  Eigen::SelfAdjointEigenSolver<Matrix4> es2(0.5 * (inner + inner.adjoint()));
  Eigen::Vector4d lam = es2.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  std::sort(lam.data(), lam.data() + 4, std::greater<>());
  return std::max(0.0, lam(0) - lam(1) - lam(2) - lam(3));
}

/// Closed form max(0, (3v - 1) / 2).
inline double werner_concurrence(double v) { return std::max(0.0, (3.0 * v - 1.0) / 2.0); }

/// Weight v giving Werner concurrence c.
inline double werner_weight_for_concurrence(double c) { return (2.0 * c + 1.0) / 3.0; }

inline DensityMatrix reduced_first(const TwoQubitState& s) {
  Eigen::Matrix2cd r = Eigen::Matrix2cd::Zero();
  for (int a = 0; a < 2; ++a)
    for (int ap = 0; ap < 2; ++ap)
      for (int b = 0; b < 2; ++b) r(a, ap) += s.rho(2 * a + b, 2 * ap + b);
  return {r(0, 0).real(), r(1, 1).real(), r(0, 1).real(), r(0, 1).imag()};
}

inline DensityMatrix reduced_second(const TwoQubitState& s) {
  Eigen::Matrix2cd r = Eigen::Matrix2cd::Zero();
  for (int b = 0; b < 2; ++b)
    for (int bp = 0; bp < 2; ++bp)
      for (int a = 0; a < 2; ++a) r(b, bp) += s.rho(2 * a + b, 2 * a + bp);
  return {r(0, 0).real(), r(1, 1).real(), r(0, 1).real(), r(0, 1).imag()};
}

/// Rank-1 projector onto the pure state along the Bloch direction of `r`.
inline DensityMatrix pure_projector(const DensityMatrix& r) {
  const auto b = bloch_from_rho(r);
  const double n = b.norm();
  if (!(n > 1e-12)) throw Error(Errc::NonPhysical, "maximally mixed state has no projector direction");
  return rho_from_bloch({b.s1 / n, b.s2 / n, b.s3 / n});
}

struct RemoteResult {
  DensityMatrix state;
  double probability = 0.0;
};

/// Conditional state Tr_1[rho12 (P x I)] / Tr[rho12 (P x I)], optionally
/// followed by the correction sy rho2 sy.
inline RemoteResult remote_state(const TwoQubitState& s, const DensityMatrix& projector, bool apply_correction) {
  Eigen::Matrix2cd p;
  p << projector.rho00, projector.rho01(), projector.rho10(), projector.rho11;
  Eigen::Matrix2cd r = Eigen::Matrix2cd::Zero();
  for (int b = 0; b < 2; ++b)
    for (int bp = 0; bp < 2; ++bp)
      for (int a = 0; a < 2; ++a)
        for (int ap = 0; ap < 2; ++ap) r(b, bp) += s.rho(2 * a + b, 2 * ap + bp) * p(ap, a);
  const double prob = r.trace().real();
  if (!(prob > 1e-15)) throw Error(Errc::ZeroProbability, "projection has zero success probability");
  r /= prob;
  if (apply_correction) r = sigma_y() * r * sigma_y();
  r = 0.5 * (r + r.adjoint());
  return {{r(0, 0).real(), r(1, 1).real(), r(0, 1).real(), r(0, 1).imag()}, prob};
}

// ---- point sets -----------------------------------------------------------

/// Fibonacci spiral of n points on the cap of polar angles [0, cap_angle]
/// around +s3, equal-area spacing.
inline std::vector<BlochVector> spiral_cap(std::size_t n, double cap_angle = std::numbers::pi) {
  if (n == 0) throw Error(Errc::BadSize, "spiral needs at least one point");
  if (!(cap_angle > 0.0 && cap_angle <= std::numbers::pi)) throw Error(Errc::OutOfRange, "cap angle must lie in (0, pi]");
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  const double zmin = std::cos(cap_angle);
  std::vector<BlochVector> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double z = 1.0 - (1.0 - zmin) * (static_cast<double>(k) + 0.5) / static_cast<double>(n);
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden * static_cast<double>(k);
    out.push_back({r * std::cos(phi), r * std::sin(phi), z});
  }
  return out;
}

/// "spiral:<n>" or "spiral:<n>:<cap degrees>".
inline std::vector<DensityMatrix> parse_targets(const std::string& spec) {
  const std::string prefix = "spiral:";
  if (spec.rfind(prefix, 0) != 0) throw Error(Errc::Parse, "targets must be 'spiral:<n>[:<cap degrees>]'");
  const std::string rest = spec.substr(prefix.size());
  const auto colon = rest.find(':');
  std::size_t n = 0;
  double cap = std::numbers::pi;
  try {
    n = static_cast<std::size_t>(std::stoul(rest.substr(0, colon)));
    if (colon != std::string::npos) cap = std::stod(rest.substr(colon + 1)) * std::numbers::pi / 180.0;
  } catch (const std::exception&) {
    throw Error(Errc::Parse, "bad target spec '" + spec + "'");
  }
  std::vector<DensityMatrix> out;
  for (const auto& b : spiral_cap(n, cap)) out.push_back(rho_from_bloch(b));
  return out;
}

/// "singlet" or "werner:<v>".
inline TwoQubitState parse_resource(const std::string& spec) {
  if (spec == "singlet") return singlet();
  const std::string prefix = "werner:";
  if (spec.rfind(prefix, 0) == 0) {
    try {
      return werner(std::stod(spec.substr(prefix.size())));
    } catch (const std::invalid_argument&) {
    }
  }
  throw Error(Errc::Parse, "resource must be 'singlet' or 'werner:<v>', got '" + spec + "'");
}

// ---- demonstration ----------------------------------------------------------

/// Maps a target to the qubit-1 state the preparation stage realizes for it;
/// the projector is the conjugate of that state's pure direction.
using ProjectorSource = std::function<DensityMatrix(const DensityMatrix& target)>;

inline ProjectorSource oracle_source() {
  return [](const DensityMatrix& t) { return t; };
}

struct RspRow {
  std::size_t index = 0;
  BlochVector target;
  double fidelity = 0.0;
  double probability = 0.0;
  bool skipped = false;
};

struct RspReport {
  std::vector<RspRow> rows;
  InfidelityStats fidelity;  // mean / p5 / p95 of fidelity over non-skipped rows
  std::size_t skipped = 0;
};

inline RspReport rsp_demo(const std::vector<DensityMatrix>& targets, const TwoQubitState& resource,
                          const ProjectorSource& source, int jobs = 1) {
  for (const auto& t : targets)
    if (std::abs(purity(t) - 1.0) > 1e-6) throw Error(Errc::NonPhysical, "RSP targets must be pure");
  RspReport rep;
  rep.rows.resize(targets.size());
  parallel_for(targets.size(), jobs, [&](std::size_t i) {
    auto& row = rep.rows[i];
    row.index = i;
    row.target = bloch_from_rho(targets[i]);
    try {
      const DensityMatrix proj = pure_projector(source(targets[i])).conjugate();
      const auto rr = remote_state(resource, proj, true);
      row.fidelity = fidelity(rr.state, targets[i]);
      row.probability = rr.probability;
    } catch (const Error& e) {
      if (e.code() != Errc::ZeroProbability) throw;
      row.skipped = true;
    }
  });
  std::vector<double> f;
  for (const auto& r : rep.rows) {
    if (r.skipped) ++rep.skipped;
    else f.push_back(r.fidelity);
  }
  if (!f.empty()) rep.fidelity = summarize(std::move(f));
  return rep;
}

/// CSV: index, s1, s2, s3, fidelity, success_probability (skipped rows leave the last two empty).
inline void write_rsp_csv(std::ostream& os, const RspReport& rep) {
  write_csv_row(os, {"index", "s1", "s2", "s3", "fidelity", "success_probability"});
  for (const auto& r : rep.rows)
    write_csv_row(os, {std::to_string(r.index), fmt_double(r.target.s1), fmt_double(r.target.s2), fmt_double(r.target.s3),
                       r.skipped ? "" : fmt_double(r.fidelity), r.skipped ? "" : fmt_double(r.probability)});
}

}  // namespace lcs::entangle
