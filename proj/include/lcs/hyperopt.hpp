#pragma once

// Box-constrained derivative-free minimization by mesh adaptive direct
// search: complete polls along 2n seeded orthogonal directions, mesh doubling
// on success and halving on failure. Points are handled in unit coordinates
// and mapped to variable space (linear, logarithmic or integer-rounded).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "lcs/error.hpp"
#include "lcs/mlp.hpp"
#include "lcs/surrogate.hpp"
#include "lcs/util.hpp"

namespace lcs::hyperopt {

enum class VarKind { Integer, Continuous, LogContinuous };

inline std::string to_string(VarKind k) {
  switch (k) {
    case VarKind::Integer: return "integer";
    case VarKind::Continuous: return "continuous";
    case VarKind::LogContinuous: return "log_continuous";
  }
  return "continuous";
}

inline VarKind parse_var_kind(const std::string& s) {
  if (s == "integer") return VarKind::Integer;
  if (s == "continuous") return VarKind::Continuous;
  if (s == "log_continuous") return VarKind::LogContinuous;
  throw Error(Errc::Parse, "unknown variable kind '" + s + "'");
}

struct Variable {
  std::string name;
  VarKind kind = VarKind::Continuous;
  double lower = 0.0;
  double upper = 1.0;
};

using Point = std::vector<double>;

struct SearchSpace {
  std::vector<Variable> vars;

  std::size_t size() const { return vars.size(); }

  void validate() const {
    if (vars.empty()) throw Error(Errc::EmptySpace, "search space has no variables");
    for (const auto& v : vars) {
      if (!(v.lower < v.upper)) throw Error(Errc::OutOfRange, "variable '" + v.name + "' needs lower < upper");
      if (v.kind == VarKind::Integer && (v.lower != std::floor(v.lower) || v.upper != std::floor(v.upper)))
        throw Error(Errc::OutOfRange, "integer variable '" + v.name + "' needs integral bounds");
      if (v.kind == VarKind::LogContinuous && !(v.lower > 0.0))
        throw Error(Errc::OutOfRange, "log variable '" + v.name + "' needs a positive lower bound");
    }
  }

  /// Unit coordinate -> variable value (integers rounded half away from zero).
  double map_value(std::size_t i, double u) const {
    const auto& v = vars[i];
    u = std::clamp(u, 0.0, 1.0);
    switch (v.kind) {
      case VarKind::Integer: return std::round(v.lower + u * (v.upper - v.lower));
      case VarKind::Continuous: return v.lower + u * (v.upper - v.lower);
      case VarKind::LogContinuous: return std::exp(std::log(v.lower) + u * (std::log(v.upper) - std::log(v.lower)));
    }
    return v.lower;
  }

  double unit_value(std::size_t i, double x) const {
    const auto& v = vars[i];
    if (v.kind == VarKind::LogContinuous)
      return (std::log(x) - std::log(v.lower)) / (std::log(v.upper) - std::log(v.lower));
    return (x - v.lower) / (v.upper - v.lower);
  }

  Point map(const Eigen::VectorXd& u) const {
    Point p(size());
    for (std::size_t i = 0; i < size(); ++i) p[i] = map_value(i, u(static_cast<Eigen::Index>(i)));
    return p;
  }

  Eigen::VectorXd unit(const Point& p) const {
    Eigen::VectorXd u(static_cast<Eigen::Index>(size()));
    for (std::size_t i = 0; i < size(); ++i) u(static_cast<Eigen::Index>(i)) = unit_value(i, p[i]);
    return u;
  }
};

inline void to_json(nlohmann::json& j, const Variable& v) {
  j = nlohmann::json{{"name", v.name}, {"kind", to_string(v.kind)}, {"lower", v.lower}, {"upper", v.upper}};
}
inline void from_json(const nlohmann::json& j, Variable& v) {
  v.name = j.at("name").get<std::string>();
  v.kind = parse_var_kind(j.at("kind").get<std::string>());
  v.lower = j.at("lower").get<double>();
  v.upper = j.at("upper").get<double>();
}
inline void to_json(nlohmann::json& j, const SearchSpace& s) { j = s.vars; }
inline void from_json(const nlohmann::json& j, SearchSpace& s) { s.vars = j.get<std::vector<Variable>>(); }

struct TraceEntry {
  std::size_t index = 0;
  Point point;
  double value = 0.0;
  double mesh = 0.0;
};

struct SearchTrace {
  std::vector<TraceEntry> entries;
  Point best_point;
  double best_value = std::numeric_limits<double>::infinity();
};

struct MadsResult {
  Point best;
  double best_value = std::numeric_limits<double>::infinity();
  SearchTrace trace;
  double initial_mesh = 0.0;
  double final_mesh = 0.0;
  std::size_t iterations = 0;
};

struct MadsOptions {
  std::size_t budget = 100;
  std::uint64_t seed = 0;
  double initial_mesh = 0.25;
  double min_mesh = 1e-6;
  int jobs = 1;
  /// Preference among equal objective values; true when `a` should replace `b`.
  std::function<bool(const Point& a, const Point& b)> prefer;
};

using Objective = std::function<double(const Point&)>;

namespace detail {

/// Cache key: 12 significant digits per coordinate.
inline std::string point_key(const Point& p) {
  std::string key;
  char buf[32];
  for (double x : p) {
    std::snprintf(buf, sizeof buf, "%.12g;", x);
    key += buf;
  }
  return key;
}

/// 2n directions: +- columns of a Householder reflection of a seeded normal vector.
inline std::vector<Eigen::VectorXd> poll_directions(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::VectorXd v(static_cast<Eigen::Index>(n));
  do {
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = g(rng);
  } while (v.squaredNorm() < 1e-12);
  const Eigen::MatrixXd h =
      Eigen::MatrixXd::Identity(v.size(), v.size()) - 2.0 * v * v.transpose() / v.squaredNorm();
  std::vector<Eigen::VectorXd> dirs;
  for (Eigen::Index c = 0; c < h.cols(); ++c) {
    dirs.emplace_back(h.col(c));
    dirs.emplace_back(-h.col(c));
  }
  return dirs;
}

}  // namespace detail

/// Minimizes `objective` over the box. The budget counts distinct evaluated
/// points; revisits are served from the cache. Objective failures should be
/// reported as +infinity.
inline MadsResult mads_minimize(const Objective& objective, const SearchSpace& space, const MadsOptions& opt) {
  space.validate();
  if (opt.budget < 1) throw Error(Errc::BadSize, "budget must be at least 1");
  const std::size_t n = space.size();
  MadsResult res;
  std::map<std::string, double> cache;
  std::size_t evaluations = 0;

  // Evaluates uncached points in parallel, then appends to the trace in order.
  auto evaluate = [&](const std::vector<Point>& pts, double mesh) {
    std::vector<double> values(pts.size(), std::numeric_limits<double>::quiet_NaN());
    std::vector<std::size_t> todo;
    std::map<std::string, std::size_t> first_in_batch;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const auto key = detail::point_key(pts[i]);
      if (cache.count(key) || first_in_batch.count(key)) continue;
      if (evaluations + todo.size() >= opt.budget) break;
      first_in_batch[key] = i;
      todo.push_back(i);
    }
    std::vector<double> fresh(todo.size());
    parallel_for(todo.size(), opt.jobs, [&](std::size_t k) {
      double f;
      try {
        f = objective(pts[todo[k]]);
      } catch (const std::exception&) {
        f = std::numeric_limits<double>::infinity();
      }
      fresh[k] = std::isnan(f) ? std::numeric_limits<double>::infinity() : f;
    });
    for (std::size_t k = 0; k < todo.size(); ++k) {
      cache[detail::point_key(pts[todo[k]])] = fresh[k];
      res.trace.entries.push_back({evaluations++, pts[todo[k]], fresh[k], mesh});
    }
    for (std::size_t i = 0; i < pts.size(); ++i) {
      auto it = cache.find(detail::point_key(pts[i]));
      if (it != cache.end()) values[i] = it->second;
    }
    return values;
  };

  auto better = [&](double fa, const Point& a, double fb, const Point& b) {
    if (fa < fb) return true;
    return fa == fb && opt.prefer && opt.prefer(a, b);
  };

  double mesh = opt.initial_mesh;
  res.initial_mesh = mesh;
  Eigen::VectorXd u = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n), 0.5);
  Point incumbent = space.map(u);
  u = space.unit(incumbent);
  double f_inc = evaluate({incumbent}, mesh)[0];
  res.best = incumbent;
  res.best_value = f_inc;

  while (evaluations < opt.budget && mesh >= opt.min_mesh) {
    const auto dirs = detail::poll_directions(n, mix_seed(opt.seed, res.iterations));
    std::vector<Point> pts;
    pts.reserve(dirs.size());
    for (const auto& d : dirs) {
      const Eigen::VectorXd cand = (u + mesh * d).cwiseMax(0.0).cwiseMin(1.0);
      pts.push_back(space.map(cand));
    }
    const auto values = evaluate(pts, mesh);
    std::size_t best_i = pts.size();
    double best_f = f_inc;
    Point best_p = incumbent;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (std::isnan(values[i])) continue;  // not evaluated: budget exhausted
      if (detail::point_key(pts[i]) == detail::point_key(incumbent)) continue;
      if (better(values[i], pts[i], best_f, best_p)) {
        best_f = values[i];
        best_p = pts[i];
        best_i = i;
      }
    }
    ++res.iterations;
    if (best_i < pts.size()) {
      incumbent = best_p;
      f_inc = best_f;
      u = space.unit(incumbent);
      mesh = std::min(1.0, 2.0 * mesh);
    } else {
      mesh *= 0.5;
    }
  }
  res.best = incumbent;
  res.best_value = f_inc;
  res.final_mesh = mesh;
  res.trace.best_point = incumbent;
  res.trace.best_value = f_inc;
  return res;
}

inline MadsResult mads_minimize(const Objective& objective, const SearchSpace& space, std::size_t budget,
                                std::uint64_t seed) {
  MadsOptions opt;
  opt.budget = budget;
  opt.seed = seed;
  return mads_minimize(objective, space, opt);
}

/// Trace CSV: eval_index, one column per variable, objective, mesh_size.
inline void write_trace_csv(std::ostream& os, const SearchSpace& space, const SearchTrace& trace) {
  std::vector<std::string> header{"eval_index"};
  for (const auto& v : space.vars) header.push_back(v.name);
  header.push_back("objective");
  header.push_back("mesh_size");
  write_csv_row(os, header);
  for (const auto& e : trace.entries) {
    std::vector<std::string> row{std::to_string(e.index)};
    for (double x : e.point) row.push_back(fmt_double(x));
    row.push_back(fmt_double(e.value));
    row.push_back(fmt_double(e.mesh));
    write_csv_row(os, row);
  }
}

// ---- training hyperparameters ---------------------------------------------

/// Variable names recognized by apply_point: hidden_layers, neurons_per_layer,
/// batch_size, learning_rate, dropout_rate, epochs.
inline SearchSpace default_training_space() {
  return {{{"hidden_layers", VarKind::Integer, 2, 12},
           {"neurons_per_layer", VarKind::Integer, 16, 160},
           {"batch_size", VarKind::Integer, 32, 512},
           {"learning_rate", VarKind::LogContinuous, 1e-4, 1e-2},
           {"dropout_rate", VarKind::Continuous, 0.0, 0.5}}};
}

inline TrainConfig apply_point(const SearchSpace& space, const Point& p, TrainConfig base) {
  for (std::size_t i = 0; i < space.size(); ++i) {
    const auto& name = space.vars[i].name;
    const double x = p[i];
    if (name == "hidden_layers") base.hidden_layers = static_cast<int>(std::lround(x));
    else if (name == "neurons_per_layer") base.neurons_per_layer = static_cast<int>(std::lround(x));
    else if (name == "batch_size") base.batch_size = static_cast<int>(std::lround(x));
    else if (name == "learning_rate") base.learning_rate = x;
    else if (name == "dropout_rate") base.dropout_rate = x;
    else if (name == "epochs") base.epochs = static_cast<int>(std::lround(x));
    else throw Error(Errc::Parse, "unknown training hyperparameter '" + name + "'");
  }
  return base;
}

inline std::size_t direct_param_count(const TrainConfig& c) {
  return Mlp::dense(3, c.hidden_layers, c.neurons_per_layer, 4, Activation::Linear, 0).total_params();
}

struct TuneResult {
  TrainConfig best;
  MadsResult search;
};

/// Searches training hyperparameters for the direct model, each candidate
/// trained for `search_epochs`; the returned config keeps `base.epochs` for
/// the final full-length retrain. Equal objectives prefer fewer parameters.
inline TuneResult tune_training(const SearchSpace& space, const std::vector<Record>& train,
                                const std::vector<Record>& val, std::size_t budget, std::uint64_t seed,
                                const TrainConfig& base = {}, int search_epochs = 30, int jobs = 1) {
  if (train.empty() || val.empty()) throw Error(Errc::EmptyDataset, "tuning needs nonempty train and validation sets");
  MadsOptions opt;
  opt.budget = budget;
  opt.seed = seed;
  opt.jobs = jobs;
  opt.prefer = [&](const Point& a, const Point& b) {
    return direct_param_count(apply_point(space, a, base)) < direct_param_count(apply_point(space, b, base));
  };
  auto objective = [&](const Point& p) {
    TrainConfig c = apply_point(space, p, base);
    c.epochs = search_epochs;
    c.seed = seed;
    return train_direct(train, val, c).history.best_val_infidelity;
  };
  TuneResult r;
  r.search = mads_minimize(objective, space, opt);
  r.best = apply_point(space, r.search.best, base);
  return r;
}

}  // namespace lcs::hyperopt
