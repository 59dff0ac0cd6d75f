#pragma once

// Digital twin of a three-cell twisted-nematic device. Each cell is a
// twisted retarder whose retardance follows a sigmoid voltage law; the
// three cells act in sequence on the input polarization.

#include <array>
#include <cmath>
#include <numbers>

#include <Eigen/Dense>
#include <json.hpp>

#include "lcs/error.hpp"
#include "lcs/qstate.hpp"

namespace lcs {

inline constexpr double kMaxVoltage = 10.0;

/// Control amplitudes in volts peak-to-peak, each in [0, 10].
struct Voltages {
  double v1 = 0.0;
  double v2 = 0.0;
  double v3 = 0.0;

  double operator[](std::size_t k) const { return k == 0 ? v1 : (k == 1 ? v2 : v3); }
  std::array<double, 3> values() const { return {v1, v2, v3}; }

  bool in_range() const {
    for (double v : values())
      if (!(v >= 0.0 && v <= kMaxVoltage)) return false;
    return true;
  }

  friend bool operator==(const Voltages&, const Voltages&) = default;
};

struct CellParams {
  double twist = std::numbers::pi / 2;
  double orientation = 0.0;
  double gamma_max = 3.0 * std::numbers::pi;
  double gamma_res = 0.15;
  double v_th = 2.0;
  double steepness_p = 3.0;

  void validate() const {
    if (!(gamma_max > gamma_res && gamma_res >= 0.0 && v_th > 0.0 && steepness_p > 0.0))
      throw Error(Errc::OutOfRange, "cell parameters violate gamma_max > gamma_res >= 0, v_th > 0, p > 0");
  }
};

/// Cells at orientations 0, pi/4, pi/2.
inline std::array<CellParams, 3> default_cells() {
  std::array<CellParams, 3> c;
  c[1].orientation = std::numbers::pi / 4;
  c[2].orientation = std::numbers::pi / 2;
  return c;
}

struct DeviceConfig {
  std::array<CellParams, 3> cells = default_cells();
  double depolarization = 0.002;
  DensityMatrix input_state = states::horizontal();

  static DeviceConfig defaults() { return {}; }

  static DeviceConfig noiseless() {
    auto cfg = defaults();
    cfg.depolarization = 0.0;
    return cfg;
  }

  void validate() const {
    for (const auto& c : cells) c.validate();
    if (!(depolarization >= 0.0 && depolarization < 1.0))
      throw Error(Errc::OutOfRange, "depolarization must lie in [0, 1)");
    if (!input_state.is_valid(1e-9)) throw Error(Errc::NonPhysical, "input state is not a density matrix");
  }
};

using JonesMatrix = Eigen::Matrix2cd;

/// Gamma(v) = gamma_res + (gamma_max - gamma_res) / (1 + (v / v_th)^p).
inline double retardance_of_voltage(double v, const CellParams& cell) {
  if (!(v >= 0.0 && v <= kMaxVoltage)) throw Error(Errc::OutOfRange, "voltage outside [0, 10] Vpp");
  return cell.gamma_res + (cell.gamma_max - cell.gamma_res) / (1.0 + std::pow(v / cell.v_th, cell.steepness_p));
}

inline JonesMatrix rotation(double theta) {
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  JonesMatrix r;
  r << c, -s, s, c;
  return r;
}

/// Jones matrix of a twisted nematic layer, R(twist) * W(twist, gamma).
inline JonesMatrix tn_jones(double twist, double gamma) {
  const double half = 0.5 * gamma;
  const double x = std::sqrt(twist * twist + half * half);
  const double sinc = x == 0.0 ? 1.0 : std::sin(x) / x;
  const double cx = std::cos(x);
  const cplx i(0.0, 1.0);
  JonesMatrix w;
  w << cx - i * half * sinc, twist * sinc,
       -twist * sinc, cx + i * half * sinc;
  return rotation(twist) * w;
}

inline JonesMatrix device_jones(const Voltages& v, const DeviceConfig& config) {
  JonesMatrix total = JonesMatrix::Identity();
  for (std::size_t k = 0; k < 3; ++k) {
    const auto& cell = config.cells[k];
    const double gamma = retardance_of_voltage(v[k], cell);
    total = rotation(cell.orientation) * tn_jones(cell.twist, gamma) * rotation(-cell.orientation) * total;
  }
  return total;
}

inline Eigen::Matrix2cd to_matrix(const DensityMatrix& r) {
  Eigen::Matrix2cd m;
  m << r.rho00, r.rho01(), r.rho10(), r.rho11;
  return m;
}

inline DensityMatrix from_matrix(const Eigen::Matrix2cd& m) {
  // Hermitian part; the stored representation cannot hold anti-Hermitian noise.
  return {m(0, 0).real(), m(1, 1).real(), 0.5 * (m(0, 1).real() + m(1, 0).real()),
          0.5 * (m(0, 1).imag() - m(1, 0).imag())};
}

/// Output polarization for the given control voltages.
inline DensityMatrix device_transform(const Voltages& v, const DeviceConfig& config) {
  const JonesMatrix j = device_jones(v, config);
  DensityMatrix out = from_matrix(j * to_matrix(config.input_state) * j.adjoint());
  const double d = config.depolarization;
  if (d != 0.0) {
    out.rho00 = (1.0 - d) * out.rho00 + 0.5 * d;
    out.rho11 = (1.0 - d) * out.rho11 + 0.5 * d;
    out.rho01_re *= 1.0 - d;
    out.rho01_im *= 1.0 - d;
  }
  return out;
}

inline void to_json(nlohmann::json& j, const Voltages& v) { j = v.values(); }
inline void from_json(const nlohmann::json& j, Voltages& v) {
  const auto a = j.get<std::array<double, 3>>();
  v = {a[0], a[1], a[2]};
}

inline void to_json(nlohmann::json& j, const CellParams& c) {
  j = nlohmann::json{{"twist", c.twist},         {"orientation", c.orientation},
                     {"gamma_max", c.gamma_max}, {"gamma_res", c.gamma_res},
                     {"v_th", c.v_th},           {"steepness_p", c.steepness_p}};
}
inline void from_json(const nlohmann::json& j, CellParams& c) {
  const CellParams d;
  c.twist = j.value("twist", d.twist);
  c.orientation = j.value("orientation", d.orientation);
  c.gamma_max = j.value("gamma_max", d.gamma_max);
  c.gamma_res = j.value("gamma_res", d.gamma_res);
  c.v_th = j.value("v_th", d.v_th);
  c.steepness_p = j.value("steepness_p", d.steepness_p);
}

inline void to_json(nlohmann::json& j, const DeviceConfig& cfg) {
  j = nlohmann::json{{"cells", cfg.cells}, {"depolarization", cfg.depolarization}, {"input_state", cfg.input_state}};
}
inline void from_json(const nlohmann::json& j, DeviceConfig& cfg) {
  cfg = DeviceConfig::defaults();
  if (j.contains("cells")) {
    if (!j.at("cells").is_array() || j.at("cells").size() != 3)
      throw Error(Errc::Parse, "device config needs exactly three cells");
    for (std::size_t k = 0; k < 3; ++k) cfg.cells[k] = j.at("cells")[k].get<CellParams>();
  }
  cfg.depolarization = j.value("depolarization", cfg.depolarization);
  if (j.contains("input_state")) cfg.input_state = j.at("input_state").get<DensityMatrix>();
  cfg.validate();
}

}  // namespace lcs
