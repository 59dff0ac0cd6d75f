#pragma once

// Reference regressors: radial basis function interpolation on scattered
// samples and trilinear interpolation on a regular lattice, each usable as a
// direct model (voltages -> state) or inside a compound (state -> voltages ->
// state) pipeline.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "lcs/dataset.hpp"
#include "lcs/error.hpp"
#include "lcs/lcsim.hpp"
#include "lcs/qstate.hpp"

namespace lcs {

enum class RbfKernel { Linear, Cubic, Quintic, Multiquadric, InverseMultiquadric, Gaussian };

inline constexpr std::array<RbfKernel, 6> kAllKernels{RbfKernel::Linear,       RbfKernel::Cubic,
                                                      RbfKernel::Quintic,      RbfKernel::Multiquadric,
                                                      RbfKernel::InverseMultiquadric, RbfKernel::Gaussian};

inline std::string to_string(RbfKernel k) {
  switch (k) {
    case RbfKernel::Linear: return "linear";
    case RbfKernel::Cubic: return "cubic";
    case RbfKernel::Quintic: return "quintic";
    case RbfKernel::Multiquadric: return "multiquadric";
    case RbfKernel::InverseMultiquadric: return "inverse_multiquadric";
    case RbfKernel::Gaussian: return "gaussian";
  }
  return "cubic";
}

inline RbfKernel parse_kernel(const std::string& s) {
  for (auto k : kAllKernels)
    if (to_string(k) == s) return k;
  throw Error(Errc::Parse, "unknown RBF kernel '" + s + "'");
}

inline bool uses_epsilon(RbfKernel k) {
  return k == RbfKernel::Multiquadric || k == RbfKernel::InverseMultiquadric || k == RbfKernel::Gaussian;
}

inline double rbf_phi(RbfKernel k, double r, double eps) {
  switch (k) {
    case RbfKernel::Linear: return r;
    case RbfKernel::Cubic: return r * r * r;
    case RbfKernel::Quintic: {
      const double r2 = r * r;
      return r2 * r2 * r;
    }
    case RbfKernel::Multiquadric: return std::sqrt(1.0 + (eps * r) * (eps * r));
    case RbfKernel::InverseMultiquadric: return 1.0 / std::sqrt(1.0 + (eps * r) * (eps * r));
    case RbfKernel::Gaussian: return std::exp(-(eps * r) * (eps * r));
  }
  return r;
}

inline constexpr double kDuplicateCenterTol = 1e-12;
inline constexpr double kInterpolationResidualTol = 1e-6;
inline constexpr double kTikhonovLambda = 1e-10;

struct RbfModel {
  RbfKernel kernel = RbfKernel::Cubic;
  double epsilon = 1.0;
  Eigen::MatrixXd centers;  // input_dim x N
  Eigen::MatrixXd weights;  // output_dim x N
  bool regularized = false;

  Eigen::Index input_dim() const { return centers.rows(); }
  Eigen::Index output_dim() const { return weights.rows(); }
  Eigen::Index size() const { return centers.cols(); }

  Eigen::VectorXd eval(const Eigen::VectorXd& x) const {
    if (x.size() != input_dim()) throw Error(Errc::DimensionMismatch, "RBF query has wrong dimension");
    Eigen::VectorXd phi(size());
    for (Eigen::Index j = 0; j < size(); ++j) phi(j) = rbf_phi(kernel, (centers.col(j) - x).norm(), epsilon);
    return weights * phi;
  }

  /// Column-wise evaluation.
  Eigen::MatrixXd eval_batch(const Eigen::MatrixXd& x) const {
    if (x.rows() != input_dim()) throw Error(Errc::DimensionMismatch, "RBF query has wrong dimension");
    Eigen::MatrixXd out(output_dim(), x.cols());
    Eigen::VectorXd phi(size());
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      for (Eigen::Index j = 0; j < size(); ++j) phi(j) = rbf_phi(kernel, (centers.col(j) - x.col(c)).norm(), epsilon);
      out.col(c) = weights * phi;
    }
    return out;
  }
};

/// Mean distance from each center to its nearest other center.
inline double mean_nearest_distance(const Eigen::MatrixXd& centers) {
  const Eigen::Index n = centers.cols();
  if (n < 2) throw Error(Errc::BadSize, "need at least two centers");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i) best = std::min(best, (centers.col(i) - centers.col(j)).squaredNorm());
    sum += std::sqrt(best);
  }
  return sum / static_cast<double>(n);
}

/// Solves Phi a^T = Y^T for all outputs at once. Falls back to Phi + lambda I
/// when the plain solve is non-finite or misses the interpolation condition.
inline RbfModel rbf_fit(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, RbfKernel kernel,
                        std::optional<double> epsilon = std::nullopt) {
  const Eigen::Index n = x.cols();
  if (n < 2) throw Error(Errc::BadSize, "RBF fit needs at least two centers");
  if (y.cols() != n) throw Error(Errc::SizeMismatch, "inputs and targets differ in count");

  Eigen::MatrixXd dist(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    dist(j, j) = 0.0;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      const double d = (x.col(i) - x.col(j)).norm();
      if (d < kDuplicateCenterTol)
        throw Error(Errc::DuplicateCenters, "centers " + std::to_string(j) + " and " + std::to_string(i) + " coincide");
      dist(i, j) = d;
      dist(j, i) = d;
    }
  }

  RbfModel m;
  m.kernel = kernel;
  m.centers = x;
  if (epsilon) {
    if (!(*epsilon > 0.0)) throw Error(Errc::OutOfRange, "shape epsilon must be positive");
    m.epsilon = *epsilon;
  } else {
    double sum = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      double best = std::numeric_limits<double>::infinity();
      for (Eigen::Index i = 0; i < n; ++i)
        if (i != j) best = std::min(best, dist(i, j));
      sum += best;
    }
    m.epsilon = static_cast<double>(n) / sum;
  }

  Eigen::MatrixXd phi = dist.unaryExpr([&](double r) { return rbf_phi(kernel, r, m.epsilon); });
  dist.resize(0, 0);
  const Eigen::MatrixXd rhs = y.transpose();

  auto solve = [&](const Eigen::MatrixXd& a) {
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
    Eigen::MatrixXd sol = lu.solve(rhs);
    // One step of iterative refinement recovers most digits lost to pivot growth.
    sol += lu.solve(rhs - a * sol);
    return sol;
  };

  Eigen::MatrixXd sol = solve(phi);
  const bool finite = sol.allFinite();
  const double residual = finite ? (phi * sol - rhs).cwiseAbs().maxCoeff() : std::numeric_limits<double>::infinity();
  if (!finite || !(residual <= kInterpolationResidualTol)) {
    phi.diagonal().array() += kTikhonovLambda;
    sol = solve(phi);
    if (!sol.allFinite()) throw Error(Errc::SingularSystem, "RBF system singular even with Tikhonov regularization");
    m.regularized = true;
  }
  m.weights = sol.transpose();
  return m;
}

inline void to_json(nlohmann::json& j, const RbfModel& m) {
  std::vector<std::vector<double>> c(static_cast<std::size_t>(m.size())), w(static_cast<std::size_t>(m.output_dim()));
  for (Eigen::Index k = 0; k < m.size(); ++k)
    c[static_cast<std::size_t>(k)].assign(m.centers.col(k).data(), m.centers.col(k).data() + m.input_dim());
  for (Eigen::Index r = 0; r < m.output_dim(); ++r) {
    auto& row = w[static_cast<std::size_t>(r)];
    for (Eigen::Index k = 0; k < m.size(); ++k) row.push_back(m.weights(r, k));
  }
  j = nlohmann::json{{"kind", "rbf"},       {"kernel", to_string(m.kernel)}, {"epsilon", m.epsilon},
                     {"regularized", m.regularized}, {"centers", c},          {"weights", w}};
}

inline void from_json(const nlohmann::json& j, RbfModel& m) {
  m.kernel = parse_kernel(j.at("kernel").get<std::string>());
  m.epsilon = j.at("epsilon").get<double>();
  m.regularized = j.value("regularized", false);
  const auto c = j.at("centers").get<std::vector<std::vector<double>>>();
  const auto w = j.at("weights").get<std::vector<std::vector<double>>>();
  if (c.empty() || w.empty()) throw Error(Errc::Parse, "RBF model has no centers or outputs");
  const auto dim = static_cast<Eigen::Index>(c.front().size());
  m.centers.resize(dim, static_cast<Eigen::Index>(c.size()));
  for (std::size_t k = 0; k < c.size(); ++k) {
    if (static_cast<Eigen::Index>(c[k].size()) != dim) throw Error(Errc::Parse, "ragged RBF centers");
    for (Eigen::Index d = 0; d < dim; ++d) m.centers(d, static_cast<Eigen::Index>(k)) = c[k][static_cast<std::size_t>(d)];
  }
  m.weights.resize(static_cast<Eigen::Index>(w.size()), m.centers.cols());
  for (std::size_t r = 0; r < w.size(); ++r) {
    if (w[r].size() != c.size()) throw Error(Errc::Parse, "RBF weight row does not match center count");
    for (std::size_t k = 0; k < c.size(); ++k) m.weights(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = w[r][k];
  }
}

// ---- trilinear lattice ----------------------------------------------------

struct GridModel {
  std::array<std::vector<double>, 3> axes;
  Eigen::MatrixXd values;  // output_dim x (n0 * n1 * n2), index (i * n1 + j) * n2 + k

  Eigen::Index output_dim() const { return values.rows(); }

  std::size_t node_index(std::size_t i, std::size_t j, std::size_t k) const {
    return (i * axes[1].size() + j) * axes[2].size() + k;
  }

  void validate() const {
    std::size_t total = 1;
    for (const auto& a : axes) {
      if (a.size() < 2) throw Error(Errc::IncompleteGrid, "each lattice axis needs at least two knots");
      for (std::size_t i = 1; i < a.size(); ++i)
        if (!(a[i] > a[i - 1])) throw Error(Errc::IncompleteGrid, "lattice knots must be strictly increasing");
      total *= a.size();
    }
    if (static_cast<std::size_t>(values.cols()) != total) throw Error(Errc::IncompleteGrid, "lattice value count mismatch");
  }

  Eigen::VectorXd eval(const std::array<double, 3>& q) const {
    std::array<std::size_t, 3> lo{};
    std::array<double, 3> w{};
    for (std::size_t d = 0; d < 3; ++d) {
      const auto& a = axes[d];
      if (!(q[d] >= a.front() && q[d] <= a.back()))
        throw Error(Errc::OutOfDomain, "query coordinate " + std::to_string(q[d]) + " outside lattice hull");
      auto it = std::upper_bound(a.begin(), a.end(), q[d]);
      std::size_t hi = static_cast<std::size_t>(it - a.begin());
      if (hi >= a.size()) hi = a.size() - 1;
      lo[d] = hi - 1;
      w[d] = (q[d] - a[lo[d]]) / (a[hi] - a[lo[d]]);
    }
    Eigen::VectorXd out = Eigen::VectorXd::Zero(output_dim());
    for (int corner = 0; corner < 8; ++corner) {
      double weight = 1.0;
      std::array<std::size_t, 3> idx{};
      for (std::size_t d = 0; d < 3; ++d) {
        const bool up = (corner >> d) & 1;
        idx[d] = lo[d] + (up ? 1 : 0);
        weight *= up ? w[d] : 1.0 - w[d];
      }
      if (weight != 0.0) out += weight * values.col(static_cast<Eigen::Index>(node_index(idx[0], idx[1], idx[2])));
    }
    return out;
  }
};

/// Builds a lattice from scattered (point, value) samples that must cover every
/// node of the product of their distinct coordinates exactly once.
inline GridModel grid_fit(const std::vector<std::array<double, 3>>& points, const Eigen::MatrixXd& values) {
  if (points.empty()) throw Error(Errc::EmptyDataset, "grid fit on empty data");
  if (static_cast<std::size_t>(values.cols()) != points.size())
    throw Error(Errc::SizeMismatch, "grid points and values differ in count");
  GridModel g;
  for (std::size_t d = 0; d < 3; ++d) {
    std::vector<double> c;
    c.reserve(points.size());
    for (const auto& p : points) c.push_back(p[d]);
    std::sort(c.begin(), c.end());
    c.erase(std::unique(c.begin(), c.end(), [](double a, double b) { return std::abs(a - b) <= 1e-12; }), c.end());
    g.axes[d] = std::move(c);
  }
  const std::size_t total = g.axes[0].size() * g.axes[1].size() * g.axes[2].size();
  if (total != points.size()) throw Error(Errc::IncompleteGrid, "samples do not form a complete lattice");
  g.values = Eigen::MatrixXd::Constant(values.rows(), static_cast<Eigen::Index>(total), std::numeric_limits<double>::quiet_NaN());
  std::vector<char> seen(total, 0);
  auto locate = [&](std::size_t d, double v) {
    const auto& a = g.axes[d];
    auto it = std::lower_bound(a.begin(), a.end(), v - 1e-12);
    return static_cast<std::size_t>(it - a.begin());
  };
  for (std::size_t s = 0; s < points.size(); ++s) {
    const std::size_t n = g.node_index(locate(0, points[s][0]), locate(1, points[s][1]), locate(2, points[s][2]));
    if (seen[n]) throw Error(Errc::IncompleteGrid, "lattice node sampled twice");
    seen[n] = 1;
    g.values.col(static_cast<Eigen::Index>(n)) = values.col(static_cast<Eigen::Index>(s));
  }
  g.validate();
  return g;
}

inline void to_json(nlohmann::json& j, const GridModel& g) {
  std::vector<std::vector<double>> v(static_cast<std::size_t>(g.values.cols()));
  for (Eigen::Index c = 0; c < g.values.cols(); ++c)
    v[static_cast<std::size_t>(c)].assign(g.values.col(c).data(), g.values.col(c).data() + g.values.rows());
  j = nlohmann::json{{"kind", "grid"}, {"axes", g.axes}, {"values", v}};
}

inline void from_json(const nlohmann::json& j, GridModel& g) {
  g.axes = j.at("axes").get<std::array<std::vector<double>, 3>>();
  const auto v = j.at("values").get<std::vector<std::vector<double>>>();
  if (v.empty()) throw Error(Errc::IncompleteGrid, "grid model has no values");
  g.values.resize(static_cast<Eigen::Index>(v.front().size()), static_cast<Eigen::Index>(v.size()));
  for (std::size_t c = 0; c < v.size(); ++c) {
    if (v[c].size() != v.front().size()) throw Error(Errc::Parse, "ragged grid values");
    for (std::size_t r = 0; r < v[c].size(); ++r) g.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v[c][r];
  }
  g.validate();
}

// ---- direct configurations ------------------------------------------------

namespace detail {

inline Eigen::MatrixXd scaled_voltages(const std::vector<Record>& records) {
  Eigen::MatrixXd x(3, static_cast<Eigen::Index>(records.size()));
  for (std::size_t i = 0; i < records.size(); ++i)
    x.col(static_cast<Eigen::Index>(i)) << records[i].voltages.v1 / kMaxVoltage, records[i].voltages.v2 / kMaxVoltage,
        records[i].voltages.v3 / kMaxVoltage;
  return x;
}

inline Eigen::MatrixXd tau_targets(const std::vector<Record>& records) {
  Eigen::MatrixXd y(4, static_cast<Eigen::Index>(records.size()));
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto t = rho_to_tau(records[i].state).values();
    y.col(static_cast<Eigen::Index>(i)) << t[0], t[1], t[2], t[3];
  }
  return y;
}

inline DensityMatrix state_from_raw_tau(const Eigen::VectorXd& t) {
  return tau_to_rho({std::max(0.0, t(0)), std::max(0.0, t(1)), t(2), t(3)});
}

inline Eigen::MatrixXd state_inputs(const std::vector<Record>& records) {
  Eigen::MatrixXd x(4, static_cast<Eigen::Index>(records.size()));
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto e = records[i].state.elements();
    x.col(static_cast<Eigen::Index>(i)) << e[0], e[1], e[2], e[3];
  }
  return x;
}

inline Voltages clamp_voltages(double a, double b, double c) {
  auto cl = [](double v) { return std::clamp(v, 0.0, kMaxVoltage); };
  return {cl(a), cl(b), cl(c)};
}

}  // namespace detail

/// RBF on scaled voltages (v / 10) predicting tau parameters.
struct RbfDirect {
  RbfModel rbf;

  DensityMatrix predict(const Voltages& v) const {
    const Eigen::VectorXd t = rbf.eval(Eigen::Vector3d(v.v1 / kMaxVoltage, v.v2 / kMaxVoltage, v.v3 / kMaxVoltage));
    return detail::state_from_raw_tau(t);
  }
};

inline RbfDirect fit_rbf_direct(const std::vector<Record>& train, RbfKernel kernel,
                                std::optional<double> epsilon = std::nullopt) {
  return {rbf_fit(detail::scaled_voltages(train), detail::tau_targets(train), kernel, epsilon)};
}

/// Trilinear lattice over voltages (volts) predicting tau parameters.
struct GridDirect {
  GridModel grid;

  DensityMatrix predict(const Voltages& v) const { return detail::state_from_raw_tau(grid.eval({v.v1, v.v2, v.v3})); }
};

inline GridDirect fit_grid_direct(const std::vector<Record>& grid_records) {
  std::vector<std::array<double, 3>> pts;
  pts.reserve(grid_records.size());
  for (const auto& r : grid_records) pts.push_back({r.voltages.v1, r.voltages.v2, r.voltages.v3});
  return {grid_fit(pts, detail::tau_targets(grid_records))};
}

// ---- compound configurations ----------------------------------------------

/// Inverse RBF (state 4-tuple -> volts) composed with a direct RBF.
struct RbfCompound {
  RbfModel inverse;
  RbfDirect direct;

  Voltages predict_voltages(const DensityMatrix& target) const {
    const auto e = target.elements();
    const Eigen::VectorXd v = inverse.eval(Eigen::Vector4d(e[0], e[1], e[2], e[3]));
    return detail::clamp_voltages(v(0), v(1), v(2));
  }
  DensityMatrix reconstruct(const DensityMatrix& target) const { return direct.predict(predict_voltages(target)); }
};

inline RbfCompound fit_rbf_compound(const std::vector<Record>& train, const RbfDirect& direct, RbfKernel kernel,
                                    std::optional<double> epsilon = std::nullopt) {
  Eigen::MatrixXd v(3, static_cast<Eigen::Index>(train.size()));
  for (std::size_t i = 0; i < train.size(); ++i)
    v.col(static_cast<Eigen::Index>(i)) << train[i].voltages.v1, train[i].voltages.v2, train[i].voltages.v3;
  return {rbf_fit(detail::state_inputs(train), v, kernel, epsilon), direct};
}

/// Inverse lattice over the Bloch cube [-1, 1]^3 whose node values are the
/// voltages of the training state nearest to the node, composed with a
/// direct lattice.
struct GridCompound {
  GridModel inverse;
  GridDirect direct;

  Voltages predict_voltages(const DensityMatrix& target) const {
    const auto b = bloch_from_rho(target);
    const auto cl = [](double s) { return std::clamp(s, -1.0, 1.0); };
    const Eigen::VectorXd v = inverse.eval({cl(b.s1), cl(b.s2), cl(b.s3)});
    return detail::clamp_voltages(v(0), v(1), v(2));
  }
  DensityMatrix reconstruct(const DensityMatrix& target) const { return direct.predict(predict_voltages(target)); }
};

/// `resolution` knots per Bloch axis; 0 picks floor(cbrt(|train|)).
inline GridCompound fit_grid_compound(const std::vector<Record>& train, const GridDirect& direct,
                                      std::size_t resolution = 0) {
  if (train.empty()) throw Error(Errc::EmptyDataset, "grid inverse fit on empty data");
  const std::size_t m = resolution ? resolution : std::max<std::size_t>(2, floor_cube_root(train.size()));
  if (m < 2) throw Error(Errc::BadGridSize, "inverse lattice needs at least two knots per axis");
  std::vector<Eigen::Vector3d> bloch(train.size());
  for (std::size_t i = 0; i < train.size(); ++i) {
    const auto b = bloch_from_rho(train[i].state);
    bloch[i] = {b.s1, b.s2, b.s3};
  }
  GridModel g;
  for (auto& a : g.axes) {
    a.resize(m);
    for (std::size_t k = 0; k < m; ++k) a[k] = -1.0 + 2.0 * static_cast<double>(k) / static_cast<double>(m - 1);
  }
  g.values.resize(3, static_cast<Eigen::Index>(m * m * m));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j)
      for (std::size_t k = 0; k < m; ++k) {
        const Eigen::Vector3d node(g.axes[0][i], g.axes[1][j], g.axes[2][k]);
        std::size_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t s = 0; s < bloch.size(); ++s) {
          const double d = (bloch[s] - node).squaredNorm();
          if (d < best_d) {
            best_d = d;
            best = s;
          }
        }
        const auto& v = train[best].voltages;
        g.values.col(static_cast<Eigen::Index>(g.node_index(i, j, k))) << v.v1, v.v2, v.v3;
      }
  return {std::move(g), direct};
}

inline void to_json(nlohmann::json& j, const RbfDirect& m) { j = m.rbf; }
inline void from_json(const nlohmann::json& j, RbfDirect& m) { m.rbf = j.get<RbfModel>(); }
inline void to_json(nlohmann::json& j, const GridDirect& m) { j = m.grid; }
inline void from_json(const nlohmann::json& j, GridDirect& m) { m.grid = j.get<GridModel>(); }
inline void to_json(nlohmann::json& j, const RbfCompound& m) {
  j = nlohmann::json{{"kind", "rbf_compound"}, {"inverse", m.inverse}, {"direct", m.direct}};
}
inline void from_json(const nlohmann::json& j, RbfCompound& m) {
  m.inverse = j.at("inverse").get<RbfModel>();
  m.direct = j.at("direct").get<RbfDirect>();
}
inline void to_json(nlohmann::json& j, const GridCompound& m) {
  j = nlohmann::json{{"kind", "grid_compound"}, {"inverse", m.inverse}, {"direct", m.direct}};
}
inline void from_json(const nlohmann::json& j, GridCompound& m) {
  m.inverse = j.at("inverse").get<GridModel>();
  m.direct = j.at("direct").get<GridDirect>();
}

}  // namespace lcs
