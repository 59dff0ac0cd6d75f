#pragma once

// Experiment drivers behind the CLI: dataset-size scaling, architecture
// shrinking, and the method comparison table with per-sample timings.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lcs/baselines.hpp"
#include "lcs/dataset.hpp"
#include "lcs/error.hpp"
#include "lcs/mlp.hpp"
#include "lcs/surrogate.hpp"
#include "lcs/util.hpp"

namespace lcs {

struct StudyRow {
  std::string method;
  std::string variant;  // e.g. "direct", "compound", kernel name, architecture
  double x = 0.0;       // train size or parameter count
  InfidelityStats stats;
  double seconds_per_sample = 0.0;
  std::size_t param_count = 0;
  double overparametrization = 0.0;
};

struct StudyReport {
  std::string kind;
  std::vector<StudyRow> rows;
  nlohmann::json metadata = nlohmann::json::object();
};

inline void write_study_csv(std::ostream& os, const StudyReport& r) {
  write_csv_row(os, {"method", "variant", "x", "mean_infidelity", "p5", "p95", "seconds_per_sample", "param_count",
                     "overparametrization", "formatted"});
  for (const auto& row : r.rows)
    write_csv_row(os, {row.method, row.variant, fmt_double(row.x), fmt_double(row.stats.mean), fmt_double(row.stats.p5),
                       fmt_double(row.stats.p95), fmt_double(row.seconds_per_sample), std::to_string(row.param_count),
                       fmt_double(row.overparametrization), format_percentiles(row.stats)});
}

inline void to_json(nlohmann::json& j, const StudyRow& r) {
  j = nlohmann::json{{"method", r.method},
                     {"variant", r.variant},
                     {"x", r.x},
                     {"mean", r.stats.mean},
                     {"p5", r.stats.p5},
                     {"p95", r.stats.p95},
                     {"count", r.stats.count},
                     {"seconds_per_sample", r.seconds_per_sample},
                     {"param_count", r.param_count},
                     {"overparametrization", r.overparametrization},
                     {"formatted", format_percentiles(r.stats)}};
}

inline void to_json(nlohmann::json& j, const StudyReport& r) {
  j = nlohmann::json{{"kind", r.kind}, {"rows", r.rows}, {"metadata", r.metadata}};
}

/// Mean wall time of `eval(i)` over `n` samples, after one untimed warm-up pass.
inline double seconds_per_sample(std::size_t n, const std::function<void(std::size_t)>& eval) {
  if (n == 0) throw Error(Errc::EmptyDataset, "timing needs at least one sample");
  for (std::size_t i = 0; i < n; ++i) eval(i);
  const auto t0 = std::chrono::steady_clock::now();
  for (std::size_t i = 0; i < n; ++i) eval(i);
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double>(t1 - t0).count() / static_cast<double>(n);
}

// ---- scaling study --------------------------------------------------------

enum class Method { Dnn, Rbf, Linear };

inline std::string to_string(Method m) {
  switch (m) {
    case Method::Dnn: return "dnn";
    case Method::Rbf: return "rbf";
    case Method::Linear: return "linear";
  }
  return "dnn";
}

inline Method parse_method(const std::string& s) {
  if (s == "dnn") return Method::Dnn;
  if (s == "rbf") return Method::Rbf;
  if (s == "linear") return Method::Linear;
  throw Error(Errc::Parse, "unknown method '" + s + "'");
}

/// Produces the lattice dataset with m^3 nodes for the linear baseline.
using GridSource = std::function<std::vector<Record>(std::size_t m)>;

struct ScalingOptions {
  std::vector<std::size_t> sizes{250, 1000, 4000, 16000};
  std::vector<Method> methods{Method::Dnn, Method::Rbf, Method::Linear};
  TrainConfig train_config;
  std::vector<RbfKernel> kernels{kAllKernels.begin(), kAllKernels.end()};
  std::size_t max_rbf_centers = 4000;
  std::size_t max_subsets = 4;
  std::uint64_t seed = 0;
  int jobs = 1;
  GridSource grid_source;
};

/// Minibatch size used for a training subset: n / 16 clamped to [16, configured batch].
inline int scaled_batch(std::size_t n, int configured) {
  return std::clamp(static_cast<int>(n / 16), std::min(16, configured), configured);
}

struct ScalingTask {
  Method method = Method::Dnn;
  std::size_t size = 0;
  std::size_t subset = 0;
  std::size_t chunk = 0;
  RbfKernel kernel = RbfKernel::Cubic;
};

/// For each size, fits each method on up to `max_subsets` disjoint training
/// subsets, keeps the fit with the lowest validation infidelity, and reports
/// its test infidelity. RBF fits on subsets larger than `max_rbf_centers` use
/// disjoint chunks of that many centers, also selected on validation.
inline StudyReport scaling_study(const std::vector<Record>& train, const std::vector<Record>& val,
                                 const std::vector<Record>& test, const ScalingOptions& opt) {
  if (opt.sizes.empty()) throw Error(Errc::BadSizes, "no study sizes given");
  if (val.empty() || test.empty()) throw Error(Errc::EmptyDataset, "scaling study needs validation and test sets");
  for (std::size_t i = 0; i < opt.sizes.size(); ++i) {
    if (opt.sizes[i] == 0 || opt.sizes[i] > train.size())
      throw Error(Errc::BadSizes, "study size " + std::to_string(opt.sizes[i]) + " outside [1, |train|]");
    if (i && opt.sizes[i] <= opt.sizes[i - 1]) throw Error(Errc::BadSizes, "study sizes must be strictly increasing");
  }
  std::vector<std::size_t> sizes = opt.sizes;

  std::vector<ScalingTask> tasks;
  for (auto m : opt.methods) {
    for (auto size : sizes) {
      const std::size_t subsets = std::min(opt.max_subsets, train.size() / size);
      if (m == Method::Linear) {
        tasks.push_back({m, size, 0, 0, RbfKernel::Cubic});
        continue;
      }
      for (std::size_t s = 0; s < subsets; ++s) {
        if (m == Method::Dnn) {
          tasks.push_back({m, size, s, 0, RbfKernel::Cubic});
        } else {
          const std::size_t chunks = size > opt.max_rbf_centers ? size / opt.max_rbf_centers : 1;
          for (std::size_t c = 0; c < std::min(chunks, opt.max_subsets); ++c)
            for (auto k : opt.kernels) tasks.push_back({m, size, s, c, k});
        }
      }
    }
  }

  struct Outcome {
    double val = std::numeric_limits<double>::infinity();
    InfidelityStats test;
    std::size_t params = 0;
    std::string variant;
  };
  std::vector<Outcome> outcomes(tasks.size());

  parallel_for(tasks.size(), opt.jobs, [&](std::size_t ti) {
    const auto& t = tasks[ti];
    Outcome& o = outcomes[ti];
    if (t.method == Method::Linear) {
      if (!opt.grid_source) throw Error(Errc::EmptyDataset, "linear method needs a grid data source");
      const std::size_t m = floor_cube_root(t.size);
      if (m < 2) throw Error(Errc::BadSizes, "size too small for a 2x2x2 lattice");
      const auto grid = fit_grid_direct(opt.grid_source(m));
      auto pred = [&](const Voltages& v) { return grid.predict(v); };
      o.val = evaluate(pred, val).mean;
      o.test = evaluate(pred, test);
      o.params = m * m * m;
      o.variant = std::to_string(m) + "^3";
      return;
    }
    const auto subsets = disjoint_subsets(train, t.size);
    const auto& subset = subsets[t.subset];
    if (t.method == Method::Dnn) {
      TrainConfig c = opt.train_config;
      c.batch_size = scaled_batch(t.size, c.batch_size);
      c.seed = mix_seed(opt.seed, t.size * 131 + t.subset);
      const auto r = train_direct(subset, val, c);
      o.val = r.history.best_val_infidelity;
      o.test = evaluate(direct_predictor(r.model), test);
      o.params = r.model.count_params();
      o.variant = std::to_string(c.hidden_layers) + "x" + std::to_string(c.neurons_per_layer);
    } else {
      const std::size_t n = std::min(t.size, opt.max_rbf_centers);
      const std::vector<Record> centers(subset.begin() + static_cast<std::ptrdiff_t>(t.chunk * n),
                                        subset.begin() + static_cast<std::ptrdiff_t>((t.chunk + 1) * n));
      const auto model = fit_rbf_direct(centers, t.kernel);
      auto pred = [&](const Voltages& v) { return model.predict(v); };
      o.val = evaluate(pred, val).mean;
      o.test = evaluate(pred, test);
      o.params = n;
      o.variant = to_string(t.kernel);
    }
  });

  StudyReport rep;
  rep.kind = "scaling";
  for (auto m : opt.methods) {
    for (auto size : sizes) {
      const Outcome* best = nullptr;
      for (std::size_t ti = 0; ti < tasks.size(); ++ti)
        if (tasks[ti].method == m && tasks[ti].size == size && (!best || outcomes[ti].val < best->val))
          best = &outcomes[ti];
      if (!best) continue;
      StudyRow row;
      row.method = to_string(m);
      row.variant = best->variant;
      row.x = static_cast<double>(m == Method::Linear ? best->params : size);
      row.stats = best->test;
      row.param_count = best->params;
      row.overparametrization = static_cast<double>(best->params) / row.x;
      rep.rows.push_back(row);
    }
  }
  rep.metadata = {{"sizes", sizes},
                  {"seed", opt.seed},
                  {"max_rbf_centers", opt.max_rbf_centers},
                  {"max_subsets", opt.max_subsets},
                  {"train_config", opt.train_config},
                  {"linear_realization", "trilinear lattice at floor(cbrt(size))^3 nodes"}};
  return rep;
}

// ---- shrink study -----------------------------------------------------------

inline std::size_t dense_param_count(int in, int layers, int neurons, int out) {
  const auto n = static_cast<std::size_t>(neurons);
  return static_cast<std::size_t>(in) * n + n + static_cast<std::size_t>(layers - 1) * (n * n + n) +
         n * static_cast<std::size_t>(out) + static_cast<std::size_t>(out);
}

struct Architecture {
  int hidden_layers = 0;
  int neurons_per_layer = 0;
  std::size_t params = 0;
};

/// Architectures with parameter counts near params(base) * 2^-k, k = 0..halvings.
/// Depth scales as 2^(-k/3) so that width / depth stays roughly constant; the
/// width is then the integer whose count is closest to the halved target.
inline std::vector<Architecture> shrink_architectures(int hidden_layers, int neurons, int halvings) {
  if (halvings < 1) throw Error(Errc::BadSize, "shrink study needs at least one halving");
  if (hidden_layers < 1 || neurons < 1) throw Error(Errc::ArchitectureTooSmall, "base architecture is empty");
  std::vector<Architecture> out;
  out.push_back({hidden_layers, neurons, dense_param_count(3, hidden_layers, neurons, 4)});
  for (int k = 1; k <= halvings; ++k) {
    const double target = static_cast<double>(out.back().params) / 2.0;
    const int layers = std::max(1, static_cast<int>(std::lround(hidden_layers * std::pow(2.0, -k / 3.0))));
    // Solve (L-1) N^2 + (L - 1 + 8) N + 4 = target for N.
    const double a = layers - 1, b = layers - 1 + 8.0, c = 4.0 - target;
    const double n_real = a > 0 ? (-b + std::sqrt(b * b - 4 * a * c)) / (2 * a) : -c / b;
    int best_n = 0;
    double best_err = std::numeric_limits<double>::infinity();
    for (int n = std::max(1, static_cast<int>(std::floor(n_real)) - 1); n <= static_cast<int>(std::ceil(n_real)) + 1; ++n) {
      const double err = std::abs(static_cast<double>(dense_param_count(3, layers, n, 4)) - target);
      if (err < best_err) {
        best_err = err;
        best_n = n;
      }
    }
    const std::size_t p = dense_param_count(3, layers, best_n, 4);
    const double ratio = static_cast<double>(p) / static_cast<double>(out.back().params);
    if (best_n < 1 || n_real < 1.0 || ratio < 0.4 || ratio > 0.6)
      throw Error(Errc::ArchitectureTooSmall, "halving " + std::to_string(k) + " cannot keep at least one neuron per layer");
    out.push_back({layers, best_n, p});
  }
  return out;
}

inline StudyReport shrink_study(const TrainConfig& best, const std::vector<Record>& train, const std::vector<Record>& val,
                                const std::vector<Record>& test, int halvings, int jobs = 1) {
  const auto archs = shrink_architectures(best.hidden_layers, best.neurons_per_layer, halvings);
  std::vector<StudyRow> rows(archs.size());
  parallel_for(archs.size(), jobs, [&](std::size_t k) {
    TrainConfig c = best;
    c.hidden_layers = archs[k].hidden_layers;
    c.neurons_per_layer = archs[k].neurons_per_layer;
    const auto r = train_direct(train, val, c);
    StudyRow row;
    row.method = "dnn";
    row.variant = std::to_string(c.hidden_layers) + "x" + std::to_string(c.neurons_per_layer);
    row.param_count = r.model.count_params();
    row.x = static_cast<double>(row.param_count);
    row.stats = evaluate(direct_predictor(r.model), test);
    row.overparametrization = static_cast<double>(row.param_count) / static_cast<double>(train.size());
    rows[k] = row;
  });
  StudyReport rep;
  rep.kind = "shrink";
  rep.rows = std::move(rows);
  rep.metadata = {{"base_config", best}, {"halvings", halvings}, {"train_size", train.size()}};
  return rep;
}

// ---- comparison table -------------------------------------------------------

struct TableEntry {
  std::string method;  // dnn, rbf, linear, twin
  std::string kind;    // direct or compound
  StatePredictor direct;
  StateReconstructor compound;
};

/// One row per entry: infidelity stats over `test` and single-thread time per sample.
inline StudyReport report_table(const std::vector<TableEntry>& entries, const std::vector<Record>& test,
                                std::size_t min_timing_samples = 1000) {
  if (test.empty()) throw Error(Errc::EmptyDataset, "report needs a test set");
  StudyReport rep;
  rep.kind = "table";
  const std::size_t timing_n = std::max(min_timing_samples, test.size());
  for (const auto& e : entries) {
    StudyRow row;
    row.method = e.method;
    row.variant = e.kind;
    row.x = static_cast<double>(test.size());
    volatile double sink = 0.0;
    if (e.direct) {
      row.stats = evaluate(e.direct, test);
      row.seconds_per_sample =
          seconds_per_sample(timing_n, [&](std::size_t i) { sink = sink + e.direct(test[i % test.size()].voltages).rho00; });
    } else if (e.compound) {
      row.stats = evaluate_reconstruction(e.compound, test);
      row.seconds_per_sample =
          seconds_per_sample(timing_n, [&](std::size_t i) { sink = sink + e.compound(test[i % test.size()].state).rho00; });
    } else {
      throw Error(Errc::EmptyDataset, "table entry '" + e.method + "' has no predictor");
    }
    rep.rows.push_back(row);
  }
  rep.metadata = {{"test_size", test.size()}, {"timing_samples", timing_n}};
  return rep;
}

}  // namespace lcs
