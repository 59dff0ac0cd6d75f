// lcs: command-line front end for the surrogate toolkit.

#include <chrono>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lcs/baselines.hpp"
#include "lcs/dataset.hpp"
#include "lcs/entangle.hpp"
#include "lcs/hyperopt.hpp"
#include "lcs/studies.hpp"
#include "lcs/surrogate.hpp"
#include "lcs/tomo.hpp"

using nlohmann::json;
using namespace lcs;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;

struct Globals {
  std::uint64_t seed = 0;
  int jobs = 1;
  std::string device_path;
  std::string out;
  std::string manifest;
};

/// Data errors get exit code 3, numerical failures 4.
int exit_code_for(Errc c) {
  switch (c) {
    case Errc::ZeroTrace:
    case Errc::NonPhysical:
    case Errc::NoConvergence:
    case Errc::SingularSystem:
    case Errc::ZeroProbability:
      return kExitNumerical;
    default:
      return kExitData;
  }
}

std::string read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(Errc::Parse, "cannot open " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

json read_json(const std::string& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw Error(Errc::Parse, path + ": " + e.what());
  }
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(Errc::Parse, "cannot open " + path + " for writing");
  os << text;
}

std::string file_hash(const std::string& path) { return hex64(fnv1a(read_file(path))); }

std::string json_hash(const json& j) { return hex64(fnv1a(j.dump())); }

/// Collects what a run read and wrote; flushed next to --out (or to stderr).
class Manifest {
 public:
  Manifest(const Globals& g, std::string command, int argc, char** argv) : g_(g) {
    j_["command"] = std::move(command);
    j_["argv"] = std::vector<std::string>(argv, argv + argc);
    j_["seed"] = g.seed;
    j_["jobs"] = g.jobs;
    j_["inputs"] = json::array();
    j_["datasets"] = json::object();
    j_["configs"] = json::object();
  }

  void input(const std::string& role, const std::string& path) {
    j_["inputs"].push_back({{"role", role}, {"path", path}, {"fnv1a", file_hash(path)}});
  }
  void dataset(const std::string& role, const std::vector<Record>& r) {
    j_["datasets"][role] = {{"n", r.size()}, {"hash", dataset_hash(r)}};
  }
  void config(const std::string& role, const json& c) {
    j_["configs"][role] = {{"value", c}, {"hash", json_hash(c)}};
  }
  json& extra() { return j_; }

  void flush() const {
    const std::string text = j_.dump(2) + "\n";
    if (!g_.manifest.empty()) write_text(g_.manifest, text);
    else if (!g_.out.empty()) write_text(g_.out + ".manifest.json", text);
    else std::cerr << "manifest: " << j_.dump() << "\n";
  }

 private:
  const Globals& g_;
  json j_;
};

DeviceConfig load_device(const Globals& g, Manifest& m, const DeviceConfig& fallback = DeviceConfig::defaults()) {
  if (g.device_path.empty()) {
    m.config("device", fallback);
    return fallback;
  }
  m.input("device", g.device_path);
  auto d = read_json(g.device_path).get<DeviceConfig>();
  d.validate();
  m.config("device", d);
  return d;
}

void emit(const Globals& g, const std::string& text) {
  if (g.out.empty()) std::cout << text;
  else write_text(g.out, text);
}

void require_out(const Globals& g, const std::string& cmd) {
  if (g.out.empty()) throw CLI::RequiredError(cmd + " needs --out");
}

// ---- datasets and splits ----------------------------------------------------

struct SplitOptions {
  std::vector<std::size_t> sizes;  // empty: 16000/6500/rest at 27000, proportional otherwise
};

SplitSpec resolve_split(std::size_t n, const SplitOptions& o, std::uint64_t seed) {
  SplitSpec s;
  s.seed = seed;
  if (!o.sizes.empty()) {
    if (o.sizes.size() != 3) throw Error(Errc::BadSize, "--split takes three sizes: train,val,test");
    s.n_train = o.sizes[0];
    s.n_val = o.sizes[1];
    s.n_test = o.sizes[2];
    return s;
  }
  if (n >= 27000) {
    s.n_train = 16000;
    s.n_val = 6500;
  } else {
    s.n_train = n * 16000 / 27000;
    s.n_val = n * 6500 / 27000;
  }
  s.n_test = n - s.n_train - s.n_val;
  return s;
}

struct LoadedData {
  Dataset ds;
  DataSplit split;
  SplitSpec spec;
};

LoadedData load_split(const std::string& path, const SplitOptions& so, const Globals& g, Manifest& m) {
  LoadedData d;
  m.input("data", path);
  d.ds = load_jsonl(path);
  if (d.ds.records.empty()) throw Error(Errc::EmptyDataset, path + " has no records");
  d.spec = resolve_split(d.ds.records.size(), so, g.seed);
  d.split = split(d.ds.records, d.spec);
  m.dataset("all", d.ds.records);
  m.dataset("train", d.split.train);
  m.dataset("val", d.split.val);
  m.dataset("test", d.split.test);
  m.extra()["split"] = {{"train", d.spec.n_train}, {"val", d.spec.n_val}, {"test", d.spec.n_test}, {"seed", d.spec.seed}};
  return d;
}

void add_split_option(CLI::App* sc, SplitOptions& so) {
  sc->add_option("--split", so.sizes, "train,val,test sizes (default 16000,6500,rest)")->delimiter(',');
}

std::vector<Record> pick_subset(const DataSplit& s, const std::string& name) {
  if (name == "train") return s.train;
  if (name == "val") return s.val;
  if (name == "test") return s.test;
  throw Error(Errc::Parse, "subset must be train, val or test");
}

// ---- model files --------------------------------------------------------------

/// Any saved model, viewed as optional direct and compound predictors.
struct LoadedModel {
  std::string kind;
  std::shared_ptr<void> holder;
  StatePredictor direct;
  StateReconstructor compound;
  std::function<Voltages(const DensityMatrix&)> voltages;
};

LoadedModel load_model(const std::string& path) {
  const json j = read_json(path);
  LoadedModel m;
  const std::string kind = j.value("kind", std::string(j.contains("layers") ? "mlp" : ""));
  if (kind == "mlp") {
    auto net = std::make_shared<Mlp>(j.get<Mlp>());
    if (net->input_dim() != 3 || net->output_dim() != 4)
      throw Error(Errc::DimensionMismatch, path + " is not a direct network (3 -> 4)");
    m.kind = "dnn";
    m.holder = net;
    m.direct = [net](const Voltages& v) { return predict_direct(*net, v); };
  } else if (kind == "dnn_compound") {
    auto c = std::make_shared<CompoundModel>(j.get<CompoundModel>());
    m.kind = "dnn";
    m.holder = c;
    m.direct = [c](const Voltages& v) { return predict_direct(c->direct, v); };
    m.compound = [c](const DensityMatrix& s) { return c->reconstruct(s); };
    m.voltages = [c](const DensityMatrix& s) { return c->predict_voltages(s); };
  } else if (kind == "rbf_models") {
    auto c = std::make_shared<RbfCompound>();
    c->direct.rbf = j.at("direct").get<RbfModel>();
    if (j.contains("inverse")) c->inverse = j.at("inverse").get<RbfModel>();
    m.kind = "rbf";
    m.holder = c;
    m.direct = [c](const Voltages& v) { return c->direct.predict(v); };
    if (j.contains("inverse")) {
      m.compound = [c](const DensityMatrix& s) { return c->reconstruct(s); };
      m.voltages = [c](const DensityMatrix& s) { return c->predict_voltages(s); };
    }
  } else if (kind == "grid_models") {
    auto c = std::make_shared<GridCompound>();
    c->direct.grid = j.at("direct").get<GridModel>();
    if (j.contains("inverse")) c->inverse = j.at("inverse").get<GridModel>();
    m.kind = "linear";
    m.holder = c;
    m.direct = [c](const Voltages& v) { return c->direct.predict(v); };
    if (j.contains("inverse")) {
      m.compound = [c](const DensityMatrix& s) { return c->reconstruct(s); };
      m.voltages = [c](const DensityMatrix& s) { return c->predict_voltages(s); };
    }
  } else {
    throw Error(Errc::Parse, path + ": unrecognized model file");
  }
  return m;
}

json stats_json(const InfidelityStats& s) {
  return {{"mean", s.mean}, {"p5", s.p5}, {"p95", s.p95}, {"count", s.count}, {"formatted", format_percentiles(s)}};
}

TrainConfig load_config(const std::string& path, const TrainConfig& fallback, Manifest& m) {
  if (path.empty()) return fallback;
  m.input("config", path);
  return read_json(path).get<TrainConfig>();
}

EpochCallback progress(const std::string& tag) {
  return [tag](int epoch, double loss, double val) {
    if ((epoch + 1) % 25 == 0)
      std::cerr << tag << " epoch " << epoch + 1 << " loss " << loss << " val_infidelity " << val << "\n";
  };
}

// ---- subcommands --------------------------------------------------------------

struct GenDataArgs {
  std::size_t n = 27000;
  std::string mode = "random";
  std::string noise = "none";
};

int run_gen_data(const Globals& g, const GenDataArgs& a, Manifest& m) {
  require_out(g, "gen-data");
  const auto mode = parse_sample_mode(a.mode);
  const auto noise = NoiseModel::parse(a.noise);
  const DeviceConfig dev = load_device(g, m);
  const auto records = generate(a.n, mode, noise, dev, g.seed, g.jobs);
  save_jsonl(g.out, {dev, g.seed, a.mode, noise.str()}, records);
  m.dataset("generated", records);
  m.extra()["generator"] = {{"n", a.n}, {"mode", a.mode}, {"noise", noise.str()}};
  std::cerr << "wrote " << records.size() << " records to " << g.out << "\n";
  return 0;
}

struct TrainArgs {
  std::string data;
  std::string config;
  std::string direct;
  std::optional<int> epochs;
  int pretrain_epochs = 50;
  int restarts = 4;
  SplitOptions split;
};

int run_train_direct(const Globals& g, const TrainArgs& a, Manifest& m) {
  require_out(g, "train-direct");
  const auto d = load_split(a.data, a.split, g, m);
  TrainConfig c = load_config(a.config, TrainConfig{}, m);
  if (a.epochs) c.epochs = *a.epochs;
  if (a.config.empty()) c.seed = g.seed;
  m.config("train", c);
  auto r = train_direct(d.split.train, d.split.val, c, progress("direct"));
  const auto test = evaluate(direct_predictor(r.model), d.split.test);
  r.model.metadata()["test"] = stats_json(test);
  write_text(g.out, json(r.model).dump() + "\n");
  std::cout << json{{"model", g.out}, {"best_epoch", r.history.best_epoch},
                    {"val_infidelity", r.history.best_val_infidelity}, {"test", stats_json(test)}}
                   .dump()
            << "\n";
  return 0;
}

int run_train_compound(const Globals& g, const TrainArgs& a, Manifest& m) {
  require_out(g, "train-compound");
  const auto d = load_split(a.data, a.split, g, m);
  m.input("direct", a.direct);
  const Mlp direct = read_json(a.direct).get<Mlp>();
  TrainConfig c = load_config(a.config, default_compound_config(), m);
  if (a.epochs) c.epochs = *a.epochs;
  if (a.config.empty()) c.seed = g.seed;
  PretrainOptions pre;
  pre.epochs = a.pretrain_epochs;
  pre.restarts = a.restarts;
  m.config("train", c);
  m.config("pretrain", pre);
  auto r = train_compound(direct, d.split.train, d.split.val, c, progress("compound"), pre);
  const auto test = evaluate_reconstruction(compound_reconstructor(r.model), d.split.test);
  r.model.inverse.metadata()["test"] = stats_json(test);
  json out = r.model;
  out["kind"] = "dnn_compound";
  write_text(g.out, out.dump() + "\n");
  std::cout << json{{"model", g.out}, {"best_epoch", r.history.best_epoch},
                    {"val_infidelity", r.history.best_val_infidelity}, {"test", stats_json(test)}}
                   .dump()
            << "\n";
  return 0;
}

struct FitArgs {
  std::string data;
  std::string kernel = "cubic";
  std::size_t max_centers = 4000;
  bool no_inverse = false;
  std::string inverse_data;
  std::size_t resolution = 0;
  SplitOptions split;
};

int run_fit_rbf(const Globals& g, const FitArgs& a, Manifest& m) {
  require_out(g, "fit-rbf");
  const auto d = load_split(a.data, a.split, g, m);
  const std::size_t n = std::min(a.max_centers, d.split.train.size());
  const std::vector<Record> centers(d.split.train.begin(), d.split.train.begin() + static_cast<std::ptrdiff_t>(n));
  m.dataset("centers", centers);
  std::vector<RbfKernel> candidates;
  if (a.kernel == "best") candidates.assign(kAllKernels.begin(), kAllKernels.end());
  else candidates.push_back(parse_kernel(a.kernel));

  std::optional<RbfDirect> best;
  double best_val = std::numeric_limits<double>::infinity();
  for (auto k : candidates) {
    auto model = fit_rbf_direct(centers, k);
    const double val = evaluate([&](const Voltages& v) { return model.predict(v); }, d.split.val).mean;
    std::cerr << "rbf " << to_string(k) << " val_infidelity " << val << "\n";
    if (!best || val < best_val) {
      best_val = val;
      best = std::move(model);
    }
  }
  json out{{"kind", "rbf_models"}, {"direct", best->rbf}};
  json summary{{"model", g.out}, {"kernel", to_string(best->rbf.kernel)}, {"centers", n}, {"val_infidelity", best_val}};
  summary["direct_test"] = stats_json(evaluate([&](const Voltages& v) { return best->predict(v); }, d.split.test));
  if (!a.no_inverse) {
    const auto comp = fit_rbf_compound(centers, *best, best->rbf.kernel);
    out["inverse"] = comp.inverse;
    summary["compound_test"] = stats_json(evaluate_reconstruction([&](const DensityMatrix& s) { return comp.reconstruct(s); }, d.split.test));
  }
  write_text(g.out, out.dump() + "\n");
  std::cout << summary.dump() << "\n";
  return 0;
}

int run_fit_linear(const Globals& g, const FitArgs& a, Manifest& m) {
  require_out(g, "fit-linear");
  m.input("grid_data", a.data);
  const auto grid = load_jsonl(a.data);
  m.dataset("grid", grid.records);
  const auto direct = fit_grid_direct(grid.records);
  json out{{"kind", "grid_models"}, {"direct", direct.grid}};
  json summary{{"model", g.out}, {"lattice", std::to_string(direct.grid.axes[0].size()) + "^3"}};
  if (!a.inverse_data.empty()) {
    const auto d = load_split(a.inverse_data, a.split, g, m);
    const auto comp = fit_grid_compound(d.split.train, direct, a.resolution);
    out["inverse"] = comp.inverse;
    summary["direct_test"] = stats_json(evaluate([&](const Voltages& v) { return direct.predict(v); }, d.split.test));
    summary["compound_test"] = stats_json(evaluate_reconstruction([&](const DensityMatrix& s) { return comp.reconstruct(s); }, d.split.test));
  }
  write_text(g.out, out.dump() + "\n");
  std::cout << summary.dump() << "\n";
  return 0;
}

struct EvalArgs {
  std::string model;
  std::string data;
  std::string subset = "test";
  SplitOptions split;
};

int run_eval(const Globals& g, const EvalArgs& a, Manifest& m) {
  const auto d = load_split(a.data, a.split, g, m);
  m.input("model", a.model);
  const auto model = load_model(a.model);
  const auto recs = pick_subset(d.split, a.subset);
  json out{{"model", a.model}, {"method", model.kind}, {"subset", a.subset}};
  out["direct"] = stats_json(evaluate(model.direct, recs));
  if (model.compound) out["compound"] = stats_json(evaluate_reconstruction(model.compound, recs));
  emit(g, out.dump(2) + "\n");
  return 0;
}

struct HyperoptArgs {
  std::string data;
  std::string space;
  std::string trace;
  std::string base_config;
  std::size_t budget = 60;
  int search_epochs = 30;
  SplitOptions split;
};

int run_hyperopt(const Globals& g, const HyperoptArgs& a, Manifest& m) {
  require_out(g, "hyperopt");
  const auto d = load_split(a.data, a.split, g, m);
  hyperopt::SearchSpace space = hyperopt::default_training_space();
  if (!a.space.empty()) {
    m.input("space", a.space);
    space = read_json(a.space).get<hyperopt::SearchSpace>();
  }
  TrainConfig base = load_config(a.base_config, TrainConfig{}, m);
  m.config("space", space);
  m.config("base", base);
  m.extra()["budget"] = a.budget;
  m.extra()["search_epochs"] = a.search_epochs;
  const auto r = hyperopt::tune_training(space, d.split.train, d.split.val, a.budget, g.seed, base, a.search_epochs, g.jobs);
  write_text(g.out, json(r.best).dump(2) + "\n");
  if (!a.trace.empty()) {
    std::ofstream os(a.trace, std::ios::binary);
    if (!os) throw Error(Errc::Parse, "cannot open " + a.trace);
    hyperopt::write_trace_csv(os, space, r.search.trace);
  }
  std::cout << json{{"best", r.best}, {"objective", r.search.best_value}, {"evaluations", r.search.trace.entries.size()}}.dump()
            << "\n";
  return 0;
}

struct StudyArgs {
  std::string data;
  std::string config;
  std::vector<std::size_t> sizes{250, 1000, 4000, 16000};
  std::vector<std::string> methods{"dnn", "rbf", "linear"};
  std::vector<std::string> kernels;
  std::size_t max_centers = 4000;
  std::size_t max_subsets = 4;
  std::optional<int> epochs;
  int halvings = 4;
  SplitOptions split;
};

void write_study(const Globals& g, const StudyReport& rep) {
  std::ostringstream csv;
  write_study_csv(csv, rep);
  emit(g, csv.str());
  if (!g.out.empty()) write_text(g.out + ".json", json(rep).dump(2) + "\n");
}

int run_scaling(const Globals& g, const StudyArgs& a, Manifest& m) {
  const auto d = load_split(a.data, a.split, g, m);
  ScalingOptions o;
  o.sizes = a.sizes;
  o.methods.clear();
  for (const auto& s : a.methods) o.methods.push_back(parse_method(s));
  if (!a.kernels.empty()) {
    o.kernels.clear();
    for (const auto& k : a.kernels) o.kernels.push_back(parse_kernel(k));
  }
  o.train_config = load_config(a.config, TrainConfig{}, m);
  if (a.epochs) o.train_config.epochs = *a.epochs;
  o.max_rbf_centers = a.max_centers;
  o.max_subsets = a.max_subsets;
  o.seed = g.seed;
  o.jobs = g.jobs;
  const DeviceConfig dev = load_device(g, m, d.ds.header.device);
  const NoiseModel noise = NoiseModel::parse(d.ds.header.noise);
  const std::uint64_t grid_seed = mix_seed(g.seed, 0x67726964);
  o.grid_source = [dev, noise, grid_seed](std::size_t k) {
    return generate(k * k * k, SampleMode::Grid, noise, dev, grid_seed);
  };
  m.config("train", o.train_config);
  m.extra()["grid_seed"] = grid_seed;
  write_study(g, scaling_study(d.split.train, d.split.val, d.split.test, o));
  return 0;
}

int run_shrink(const Globals& g, const StudyArgs& a, Manifest& m) {
  const auto d = load_split(a.data, a.split, g, m);
  TrainConfig c = load_config(a.config, TrainConfig{}, m);
  if (a.epochs) c.epochs = *a.epochs;
  m.config("train", c);
  write_study(g, shrink_study(c, d.split.train, d.split.val, d.split.test, a.halvings, g.jobs));
  return 0;
}

struct RspArgs {
  std::string resource = "singlet";
  std::string targets = "spiral:1024";
  std::string compound;
};

int run_rsp(const Globals& g, const RspArgs& a, Manifest& m) {
  const auto resource = entangle::parse_resource(a.resource);
  const auto targets = entangle::parse_targets(a.targets);
  entangle::ProjectorSource source = entangle::oracle_source();
  LoadedModel model;
  if (!a.compound.empty()) {
    m.input("compound", a.compound);
    model = load_model(a.compound);
    if (!model.voltages) throw Error(Errc::Parse, a.compound + " has no inverse section");
    const DeviceConfig dev = load_device(g, m);
    // The inverse picks voltages; the twin then prepares the qubit-1 state.
    source = [&model, dev](const DensityMatrix& t) { return device_transform(model.voltages(t), dev); };
  }
  m.extra()["resource"] = a.resource;
  m.extra()["targets"] = a.targets;
  const auto rep = entangle::rsp_demo(targets, resource, source, g.jobs);
  std::ostringstream csv;
  entangle::write_rsp_csv(csv, rep);
  if (!g.out.empty()) write_text(g.out, csv.str());
  std::cout << json{{"targets", targets.size()},
                    {"skipped", rep.skipped},
                    {"mean_fidelity", rep.fidelity.mean},
                    {"p5", rep.fidelity.p5},
                    {"p95", rep.fidelity.p95},
                    {"concurrence", entangle::concurrence(resource)}}
                   .dump()
            << "\n";
  return 0;
}

struct TomoArgs {
  std::vector<std::int64_t> counts;
  std::int64_t shots = 0;
  int max_iters = 1000;
  double tol = 1e-12;
};

int run_tomo(const Globals& g, const TomoArgs& a, Manifest& m) {
  if (a.counts.size() != tomo::kNumProjections) throw CLI::ValidationError("--counts", "needs six values h,v,d,a,r,l");
  tomo::CountVector cv;
  for (std::size_t i = 0; i < tomo::kNumProjections; ++i) {
    if (a.counts[i] < 0 || (a.shots > 0 && a.counts[i] > a.shots))
      throw Error(Errc::OutOfRange, "count " + std::to_string(a.counts[i]) + " outside [0, shots]");
    cv.counts[i] = a.counts[i];
  }
  cv.shots_per_projection = a.shots;
  tomo::MleOptions opt;
  opt.max_iters = a.max_iters;
  opt.tol = a.tol;
  m.extra()["counts"] = a.counts;
  m.extra()["shots"] = a.shots;
  const auto r = tomo::mle_reconstruct(cv, opt);
  emit(g, json(r.state).dump() + "\n");
  if (!r.converged) {
    std::cerr << "NoConvergence: tolerance not met after " << r.iterations << " iterations; printed the last iterate\n";
    return kExitNumerical;
  }
  return 0;
}

struct ReportArgs {
  std::string data;
  std::vector<std::string> models;
  bool no_twin = false;
  std::size_t timing_samples = 1000;
  SplitOptions split;
};

int run_report(const Globals& g, const ReportArgs& a, Manifest& m) {
  const auto d = load_split(a.data, a.split, g, m);
  std::vector<LoadedModel> loaded;
  std::vector<TableEntry> entries;
  for (const auto& path : a.models) {
    m.input("model", path);
    loaded.push_back(load_model(path));
  }
  for (const auto& lm : loaded) entries.push_back({lm.kind, "direct", lm.direct, nullptr});
  for (const auto& lm : loaded)
    if (lm.compound) entries.push_back({lm.kind, "compound", nullptr, lm.compound});
  const DeviceConfig dev = load_device(g, m, d.ds.header.device);
  if (!a.no_twin) entries.push_back({"twin", "direct", [&dev](const Voltages& v) { return device_transform(v, dev); }, nullptr});
  const auto rep = report_table(entries, d.split.test, a.timing_samples);
  for (const auto& r : rep.rows)
    std::cerr << r.method << " " << r.variant << " " << format_percentiles(r.stats) << "  " << r.seconds_per_sample
              << " s/sample\n";
  write_study(g, rep);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Surrogate models for a three-cell liquid-crystal polarization device"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "run seed")->capture_default_str();
  app.add_option("--jobs", g.jobs, "worker threads")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--device", g.device_path, "device JSON (defaults built in)")->check(CLI::ExistingFile);
  app.add_option("--out", g.out, "output file");
  app.add_option("--manifest", g.manifest, "manifest path (default <out>.manifest.json, else stderr)");

  GenDataArgs gen;
  auto* c_gen = app.add_subcommand("gen-data", "generate a twin dataset (JSONL)");
  c_gen->add_option("--n", gen.n, "record count")->capture_default_str();
  c_gen->add_option("--mode", gen.mode, "random | grid")->capture_default_str();
  c_gen->add_option("--noise", gen.noise, "none | tomo:<shots>")->capture_default_str();

  TrainArgs tdir, tcomp;
  auto* c_tdir = app.add_subcommand("train-direct", "train the voltages -> state network");
  c_tdir->add_option("--data", tdir.data)->required()->check(CLI::ExistingFile);
  c_tdir->add_option("--config", tdir.config, "TrainConfig JSON")->check(CLI::ExistingFile);
  c_tdir->add_option("--epochs", tdir.epochs);
  add_split_option(c_tdir, tdir.split);

  auto* c_tcomp = app.add_subcommand("train-compound", "train the inverse network through a frozen direct network");
  c_tcomp->add_option("--data", tcomp.data)->required()->check(CLI::ExistingFile);
  c_tcomp->add_option("--direct", tcomp.direct, "direct model JSON")->required()->check(CLI::ExistingFile);
  c_tcomp->add_option("--config", tcomp.config, "TrainConfig JSON")->check(CLI::ExistingFile);
  c_tcomp->add_option("--epochs", tcomp.epochs);
  c_tcomp->add_option("--pretrain-epochs", tcomp.pretrain_epochs, "supervised warm-start epochs")->capture_default_str();
  c_tcomp->add_option("--restarts", tcomp.restarts, "independent initializations; best validation kept")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  add_split_option(c_tcomp, tcomp.split);

  FitArgs frbf, flin;
  auto* c_frbf = app.add_subcommand("fit-rbf", "fit RBF direct and inverse interpolants");
  c_frbf->add_option("--data", frbf.data)->required()->check(CLI::ExistingFile);
  c_frbf->add_option("--kernel", frbf.kernel, "kernel name or 'best'")->capture_default_str();
  c_frbf->add_option("--max-centers", frbf.max_centers)->capture_default_str();
  c_frbf->add_flag("--no-inverse", frbf.no_inverse, "skip the compound inverse");
  add_split_option(c_frbf, frbf.split);

  auto* c_flin = app.add_subcommand("fit-linear", "fit the trilinear lattice baseline");
  c_flin->add_option("--data", flin.data, "grid-mode dataset")->required()->check(CLI::ExistingFile);
  c_flin->add_option("--inverse-data", flin.inverse_data, "random dataset for the inverse lattice")->check(CLI::ExistingFile);
  c_flin->add_option("--resolution", flin.resolution, "inverse knots per Bloch axis (0: cube root of train size)");
  add_split_option(c_flin, flin.split);

  EvalArgs ev;
  auto* c_eval = app.add_subcommand("eval", "evaluate a saved model");
  c_eval->add_option("--model", ev.model)->required()->check(CLI::ExistingFile);
  c_eval->add_option("--data", ev.data)->required()->check(CLI::ExistingFile);
  c_eval->add_option("--subset", ev.subset, "train | val | test")->capture_default_str();
  add_split_option(c_eval, ev.split);

  HyperoptArgs ho;
  auto* c_ho = app.add_subcommand("hyperopt", "search direct-network hyperparameters");
  c_ho->add_option("--data", ho.data)->required()->check(CLI::ExistingFile);
  c_ho->add_option("--budget", ho.budget)->capture_default_str();
  c_ho->add_option("--search-epochs", ho.search_epochs)->capture_default_str();
  c_ho->add_option("--space", ho.space, "search space JSON")->check(CLI::ExistingFile);
  c_ho->add_option("--config", ho.base_config, "base TrainConfig JSON")->check(CLI::ExistingFile);
  c_ho->add_option("--trace", ho.trace, "trace CSV");
  add_split_option(c_ho, ho.split);

  StudyArgs sc, sh;
  auto* c_sc = app.add_subcommand("scaling-study", "infidelity versus training-set size");
  c_sc->add_option("--data", sc.data)->required()->check(CLI::ExistingFile);
  c_sc->add_option("--config", sc.config)->check(CLI::ExistingFile);
  c_sc->add_option("--sizes", sc.sizes)->delimiter(',')->capture_default_str();
  c_sc->add_option("--methods", sc.methods)->delimiter(',')->capture_default_str();
  c_sc->add_option("--kernels", sc.kernels, "RBF kernels (default all six)")->delimiter(',');
  c_sc->add_option("--max-centers", sc.max_centers)->capture_default_str();
  c_sc->add_option("--max-subsets", sc.max_subsets)->capture_default_str();
  c_sc->add_option("--epochs", sc.epochs);
  add_split_option(c_sc, sc.split);

  auto* c_sh = app.add_subcommand("shrink-study", "infidelity versus network size");
  c_sh->add_option("--data", sh.data)->required()->check(CLI::ExistingFile);
  c_sh->add_option("--config", sh.config, "best TrainConfig JSON")->check(CLI::ExistingFile);
  c_sh->add_option("--halvings", sh.halvings)->capture_default_str();
  c_sh->add_option("--epochs", sh.epochs);
  add_split_option(c_sh, sh.split);

  RspArgs rsp;
  auto* c_rsp = app.add_subcommand("rsp-demo", "remote state preparation over a target point set");
  c_rsp->add_option("--resource", rsp.resource, "singlet | werner:<v>")->capture_default_str();
  c_rsp->add_option("--targets", rsp.targets, "spiral:<n>[:<cap degrees>]")->capture_default_str();
  c_rsp->add_option("--compound", rsp.compound, "model with an inverse section")->check(CLI::ExistingFile);

  TomoArgs tm;
  auto* c_tomo = app.add_subcommand("tomo", "maximum-likelihood reconstruction from six counts");
  c_tomo->add_option("--counts", tm.counts, "h,v,d,a,r,l")->required()->delimiter(',');
  c_tomo->add_option("--shots", tm.shots, "shots per projection")->required();
  c_tomo->add_option("--max-iters", tm.max_iters)->capture_default_str();
  c_tomo->add_option("--tol", tm.tol)->capture_default_str();

  ReportArgs rp;
  auto* c_rep = app.add_subcommand("report", "comparison table over saved models");
  c_rep->add_option("--data", rp.data)->required()->check(CLI::ExistingFile);
  c_rep->add_option("--model", rp.models, "model JSON (repeatable)")->required()->check(CLI::ExistingFile);
  c_rep->add_flag("--no-twin", rp.no_twin, "omit the twin self-oracle row");
  c_rep->add_option("--timing-samples", rp.timing_samples)->capture_default_str();
  add_split_option(c_rep, rp.split);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  const auto* sub = app.get_subcommands().front();
  Manifest m(g, sub->get_name(), argc, argv);
  const auto t0 = std::chrono::steady_clock::now();
  int rc = 0;
  try {
    if (sub == c_gen) rc = run_gen_data(g, gen, m);
    else if (sub == c_tdir) rc = run_train_direct(g, tdir, m);
    else if (sub == c_tcomp) rc = run_train_compound(g, tcomp, m);
    else if (sub == c_frbf) rc = run_fit_rbf(g, frbf, m);
    else if (sub == c_flin) rc = run_fit_linear(g, flin, m);
    else if (sub == c_eval) rc = run_eval(g, ev, m);
    else if (sub == c_ho) rc = run_hyperopt(g, ho, m);
    else if (sub == c_sc) rc = run_scaling(g, sc, m);
    else if (sub == c_sh) rc = run_shrink(g, sh, m);
    else if (sub == c_rsp) rc = run_rsp(g, rsp, m);
    else if (sub == c_tomo) rc = run_tomo(g, tm, m);
    else if (sub == c_rep) rc = run_report(g, rp, m);
  } catch (const CLI::Error& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: malformed JSON: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
  m.extra()["exit_code"] = rc;
  m.extra()["seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  try {
    m.flush();
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return rc;
}
