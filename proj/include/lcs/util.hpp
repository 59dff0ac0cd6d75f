#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <functional>
#include <mutex>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "lcs/error.hpp"

namespace lcs {

/// splitmix64 finalizer; derives independent per-task seeds from a run seed.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// 64-bit FNV-1a, used for content hashes in manifests.
inline std::uint64_t fnv1a(std::string_view data, std::uint64_t h = 0xcbf29ce484222325ull) {
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = kDigits[v & 0xf];
  return s;
}

/// Runs body(i) for i in [0, n) on up to `jobs` threads. Results must be written
/// to per-index slots so output is independent of scheduling. The first
/// exception thrown by any task is rethrown after all workers finish.
inline void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& body) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(jobs, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

/// Percentile with the midpoint (Hazen) rule: the k-th sorted value (1-based)
/// sits at probability (k - 0.5) / n; linear in between, clamped at the ends.
inline double percentile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw Error(Errc::EmptyDataset, "percentile of empty sample");
  const double n = static_cast<double>(sorted.size());
  const double pos = p * n - 0.5;  // zero-based fractional index
  if (pos <= 0.0) return sorted.front();
  if (pos >= n - 1.0) return sorted.back();
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

struct InfidelityStats {
  double mean = 0.0;
  double p5 = 0.0;
  double p95 = 0.0;
  std::size_t count = 0;
};

inline InfidelityStats summarize(std::vector<double> values) {
  if (values.empty()) throw Error(Errc::EmptyDataset, "no samples to summarize");
  InfidelityStats s;
  s.count = values.size();
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  std::sort(values.begin(), values.end());
  s.p5 = percentile_sorted(values, 0.05);
  s.p95 = percentile_sorted(values, 0.95);
  return s;
}

/// "(m - a + b) x 10^e": mean m with p5 = m - a and p95 = m + b, all in units of 10^e.
inline std::string format_percentiles(const InfidelityStats& s) {
  if (!(s.mean > 0.0)) return "(0 - 0 + 0) x 10^0";
  const int e = static_cast<int>(std::floor(std::log10(s.mean)));
  const double unit = std::pow(10.0, e);
  const long m = std::lround(s.mean / unit);
  const long a = std::lround((s.mean - s.p5) / unit);
  const long b = std::lround((s.p95 - s.mean) / unit);
  std::string out = "(" + std::to_string(m) + " - " + std::to_string(a) + (b < 0 ? " - " : " + ") +
                    std::to_string(b < 0 ? -b : b) + ") x 10^" + std::to_string(e);
  return out;
}

/// RFC-4180 field quoting.
inline std::string csv_field(std::string_view v) {
  const bool quote = v.find_first_of(",\"\r\n") != std::string_view::npos;
  if (!quote) return std::string(v);
  std::string out = "\"";
  for (char c : v) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

inline void write_csv_row(std::ostream& os, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) os << ',';
    os << csv_field(fields[i]);
  }
  os << "\r\n";
}

inline std::string fmt_double(double v, int precision = 17) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", precision, v);
  return buf;
}

}  // namespace lcs
