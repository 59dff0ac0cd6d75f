#pragma once

// Calibration datasets of (voltages, state) records drawn from the digital
// twin, with optional tomographic measurement noise. Stored as JSON Lines:
// a header line {"device":...,"seed":...} followed by one record per line.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lcs/error.hpp"
#include "lcs/lcsim.hpp"
#include "lcs/qstate.hpp"
#include "lcs/tomo.hpp"
#include "lcs/util.hpp"

namespace lcs {

struct Record {
  Voltages voltages;
  DensityMatrix state;
  double purity = 1.0;
};

enum class SampleMode { Random, Grid };

struct NoiseModel {
  bool tomographic = false;
  std::int64_t shots = 100000;

  static NoiseModel none() { return {}; }
  static NoiseModel tomography(std::int64_t shots) { return {true, shots}; }

  /// "none" or "tomo:<shots>".
  static NoiseModel parse(const std::string& text) {
    if (text == "none") return none();
    const std::string prefix = "tomo:";
    if (text.rfind(prefix, 0) == 0) {
      try {
        const long long shots = std::stoll(text.substr(prefix.size()));
        if (shots > 0) return tomography(shots);
      } catch (const std::exception&) {
      }
    }
    throw Error(Errc::Parse, "noise must be 'none' or 'tomo:<shots>', got '" + text + "'");
  }

  std::string str() const { return tomographic ? "tomo:" + std::to_string(shots) : "none"; }
};

inline std::string to_string(SampleMode m) { return m == SampleMode::Grid ? "grid" : "random"; }

inline SampleMode parse_sample_mode(const std::string& s) {
  if (s == "random") return SampleMode::Random;
  if (s == "grid") return SampleMode::Grid;
  throw Error(Errc::Parse, "mode must be 'random' or 'grid', got '" + s + "'");
}

/// Integer m with m^3 == n, or 0 when n is not a perfect cube.
inline std::size_t exact_cube_root(std::size_t n) {
  auto m = static_cast<std::size_t>(std::llround(std::cbrt(static_cast<double>(n))));
  for (std::size_t c = (m > 0 ? m - 1 : 0); c <= m + 1; ++c)
    if (c * c * c == n) return c;
  return 0;
}

/// Largest m with m^3 <= n.
inline std::size_t floor_cube_root(std::size_t n) {
  auto m = static_cast<std::size_t>(std::floor(std::cbrt(static_cast<double>(n))));
  while ((m + 1) * (m + 1) * (m + 1) <= n) ++m;
  while (m > 0 && m * m * m > n) --m;
  return m;
}

/// Knot k of an m-point lattice on [0, 10], both endpoints included.
inline double lattice_knot(std::size_t k, std::size_t m) {
  if (m <= 1) return 0.0;
  if (k + 1 == m) return kMaxVoltage;
  return kMaxVoltage * static_cast<double>(k) / static_cast<double>(m - 1);
}

inline Record make_record(const Voltages& v, const DeviceConfig& device, const NoiseModel& noise, std::uint64_t noise_seed) {
  Record r;
  r.voltages = v;
  r.state = device_transform(v, device);
  if (noise.tomographic) {
    const auto counts = tomo::simulate_counts(tomo::projection_probs(r.state), noise.shots, noise_seed);
    tomo::MleOptions opt;
    opt.max_iters = 5000;
    opt.tol = 1e-13;
    r.state = tomo::mle_reconstruct(counts, opt).state;
  }
  r.purity = purity(r.state);
  return r;
}

/// Deterministic for fixed (n, mode, noise, device, seed); `jobs` only changes speed.
inline std::vector<Record> generate(std::size_t n, SampleMode mode, const NoiseModel& noise, const DeviceConfig& device,
                                    std::uint64_t seed, int jobs = 1) {
  if (n < 1) throw Error(Errc::BadSize, "dataset size must be at least 1");
  device.validate();
  std::vector<Voltages> volts(n);
  if (mode == SampleMode::Grid) {
    const std::size_t m = exact_cube_root(n);
    if (m == 0) throw Error(Errc::BadGridSize, std::to_string(n) + " is not a perfect cube");
    std::size_t idx = 0;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j)
        for (std::size_t k = 0; k < m; ++k) volts[idx++] = {lattice_knot(i, m), lattice_knot(j, m), lattice_knot(k, m)};
  } else {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, kMaxVoltage);
    for (auto& v : volts) {
      v.v1 = u(rng);
      v.v2 = u(rng);
      v.v3 = u(rng);
    }
  }
  std::vector<Record> out(n);
  parallel_for(n, jobs, [&](std::size_t i) { out[i] = make_record(volts[i], device, noise, mix_seed(seed, i)); });
  return out;
}

struct SplitSpec {
  std::size_t n_train = 0;
  std::size_t n_val = 0;
  std::size_t n_test = 0;
  std::uint64_t seed = 0;
};

struct DataSplit {
  std::vector<Record> train;
  std::vector<Record> val;
  std::vector<Record> test;
};

/// Seeded shuffle followed by contiguous slicing.
inline DataSplit split(const std::vector<Record>& records, const SplitSpec& spec) {
  if (spec.n_train + spec.n_val + spec.n_test > records.size())
    throw Error(Errc::SizeMismatch, "split sizes exceed dataset size");
  std::vector<std::size_t> order(records.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::mt19937_64 rng(spec.seed);
  std::shuffle(order.begin(), order.end(), rng);
  DataSplit s;
  std::size_t pos = 0;
  auto take = [&](std::vector<Record>& dst, std::size_t count) {
    dst.reserve(count);
    for (std::size_t i = 0; i < count; ++i) dst.push_back(records[order[pos++]]);
  };
  take(s.train, spec.n_train);
  take(s.val, spec.n_val);
  take(s.test, spec.n_test);
  return s;
}

/// floor(|train| / subset_size) pairwise-disjoint contiguous subsets.
inline std::vector<std::vector<Record>> disjoint_subsets(const std::vector<Record>& train, std::size_t subset_size) {
  if (subset_size == 0) throw Error(Errc::BadSize, "subset size must be positive");
  if (subset_size > train.size()) throw Error(Errc::BadSize, "subset size exceeds training set");
  const std::size_t count = train.size() / subset_size;
  std::vector<std::vector<Record>> out(count);
  for (std::size_t s = 0; s < count; ++s)
    out[s].assign(train.begin() + static_cast<std::ptrdiff_t>(s * subset_size),
                  train.begin() + static_cast<std::ptrdiff_t>((s + 1) * subset_size));
  return out;
}

struct DatasetHeader {
  DeviceConfig device = DeviceConfig::defaults();
  std::uint64_t seed = 0;
  std::string mode = "random";
  std::string noise = "none";
};

inline std::string record_line(const Record& r) {
  std::string s = "{\"v\":[" + fmt_double(r.voltages.v1) + "," + fmt_double(r.voltages.v2) + "," +
                  fmt_double(r.voltages.v3) + "],\"rho\":[";
  const auto e = r.state.elements();
  for (std::size_t i = 0; i < 4; ++i) s += (i ? "," : "") + fmt_double(e[i]);
  return s + "]}";
}

inline void write_jsonl(std::ostream& os, const DatasetHeader& header, const std::vector<Record>& records) {
  nlohmann::json h{{"device", header.device}, {"seed", header.seed}, {"mode", header.mode}, {"noise", header.noise},
                   {"n", records.size()}};
  os << h.dump() << '\n';
  for (const auto& r : records) os << record_line(r) << '\n';
}

struct Dataset {
  DatasetHeader header;
  std::vector<Record> records;
};

inline Dataset read_jsonl(std::istream& is) {
  Dataset ds;
  std::string line;
  bool first = true;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::Parse, "line " + std::to_string(lineno) + ": " + e.what());
    }
    if (first && j.contains("device")) {
      ds.header.device = j.at("device").get<DeviceConfig>();
      ds.header.seed = j.value("seed", std::uint64_t{0});
      ds.header.mode = j.value("mode", std::string("random"));
      ds.header.noise = j.value("noise", std::string("none"));
      first = false;
      continue;
    }
    first = false;
    if (!j.contains("v") || !j.contains("rho")) throw Error(Errc::Parse, "line " + std::to_string(lineno) + ": missing v/rho");
    Record r;
    r.voltages = j.at("v").get<Voltages>();
    r.state = j.at("rho").get<DensityMatrix>();
    r.purity = purity(r.state);
    ds.records.push_back(r);
  }
  return ds;
}

inline void save_jsonl(const std::string& path, const DatasetHeader& header, const std::vector<Record>& records) {
  std::ofstream os(path);
  if (!os) throw Error(Errc::Parse, "cannot open " + path + " for writing");
  write_jsonl(os, header, records);
}

inline Dataset load_jsonl(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error(Errc::Parse, "cannot open " + path);
  return read_jsonl(is);
}

/// Content hash over the serialized records.
inline std::string dataset_hash(const std::vector<Record>& records) {
  std::uint64_t h = fnv1a("");
  for (const auto& r : records) h = fnv1a(record_line(r), h);
  return hex64(h);
}

}  // namespace lcs
