#pragma once

// Dense feed-forward networks with hand-written backpropagation, Adam,
// inverted dropout and frozen sections. Batches are stored column-wise:
// an (features x batch) matrix holds one sample per column.

#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "lcs/error.hpp"
#include "lcs/qstate.hpp"
#include "lcs/util.hpp"

namespace lcs {

enum class Activation { Relu, Linear, SigmoidScaled };

inline std::string to_string(Activation a) {
  switch (a) {
    case Activation::Relu: return "relu";
    case Activation::Linear: return "linear";
    case Activation::SigmoidScaled: return "sigmoid_scaled";
  }
  return "linear";
}

inline Activation parse_activation(const std::string& s) {
  if (s == "relu") return Activation::Relu;
  if (s == "linear") return Activation::Linear;
  if (s == "sigmoid_scaled") return Activation::SigmoidScaled;
  throw Error(Errc::Parse, "unknown activation '" + s + "'");
}

struct DenseLayer {
  Eigen::MatrixXd weights;  // out x in
  Eigen::VectorXd bias;     // out
  Activation activation = Activation::Linear;

  Eigen::Index inputs() const { return weights.cols(); }
  Eigen::Index outputs() const { return weights.rows(); }
};

namespace detail {

inline void apply_activation(Eigen::MatrixXd& z, Activation a) {
  switch (a) {
    case Activation::Relu: z = z.cwiseMax(0.0); break;
    case Activation::Linear: break;
    // Internal range (0, 1); callers emitting voltages scale by 10.
    case Activation::SigmoidScaled: z = (1.0 + (-z.array()).exp()).inverse().matrix(); break;
  }
}

/// Multiplies the upstream gradient by the activation derivative, expressed through the activation output.
inline void activation_backward(Eigen::MatrixXd& grad, const Eigen::MatrixXd& out, Activation a) {
  switch (a) {
    case Activation::Relu: grad = (out.array() > 0.0).select(grad, 0.0); break;
    case Activation::Linear: break;
    case Activation::SigmoidScaled: grad.array() *= out.array() * (1.0 - out.array()); break;
  }
}

}  // namespace detail

class Mlp {
 public:
  Mlp() = default;

  explicit Mlp(std::vector<DenseLayer> layers, bool trainable = true) : layers_(std::move(layers)), trainable_(trainable) {
    validate();
  }

  /// dims = {input, hidden..., output}; hidden layers use ReLU. Weights and
  /// biases are uniform in +-1/sqrt(fan_in).
  static Mlp random(const std::vector<int>& dims, Activation output_activation, std::uint64_t seed) {
    if (dims.size() < 2) throw Error(Errc::DimensionMismatch, "network needs at least input and output dims");
    std::mt19937_64 rng(seed);
    std::vector<DenseLayer> layers;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
      if (dims[l] < 1 || dims[l + 1] < 1) throw Error(Errc::DimensionMismatch, "layer widths must be positive");
      const double bound = 1.0 / std::sqrt(static_cast<double>(dims[l]));
      std::uniform_real_distribution<double> u(-bound, bound);
      DenseLayer layer;
      layer.weights.resize(dims[l + 1], dims[l]);
      layer.bias.resize(dims[l + 1]);
      for (Eigen::Index r = 0; r < layer.weights.rows(); ++r)
        for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) layer.weights(r, c) = u(rng);
      for (Eigen::Index r = 0; r < layer.bias.size(); ++r) layer.bias(r) = u(rng);
      layer.activation = l + 2 == dims.size() ? output_activation : Activation::Relu;
      layers.push_back(std::move(layer));
    }
    return Mlp(std::move(layers));
  }

  /// input -> hidden_layers x neurons -> output.
  static Mlp dense(int input_dim, int hidden_layers, int neurons, int output_dim, Activation output_activation,
                   std::uint64_t seed) {
    std::vector<int> dims{input_dim};
    for (int i = 0; i < hidden_layers; ++i) dims.push_back(neurons);
    dims.push_back(output_dim);
    return random(dims, output_activation, seed);
  }

  Eigen::Index input_dim() const { return layers_.empty() ? 0 : layers_.front().inputs(); }
  Eigen::Index output_dim() const { return layers_.empty() ? 0 : layers_.back().outputs(); }
  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& mutable_layers() { return layers_; }
  bool trainable() const { return trainable_; }
  void set_trainable(bool t) { trainable_ = t; }

  nlohmann::json& metadata() { return metadata_; }
  const nlohmann::json& metadata() const { return metadata_; }

  /// Weight and bias elements; zero for a frozen network.
  std::size_t count_params() const { return trainable_ ? total_params() : 0; }

  std::size_t total_params() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += static_cast<std::size_t>(l.weights.size() + l.bias.size());
    return n;
  }

  Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& x) const {
    if (x.rows() != input_dim()) throw Error(Errc::DimensionMismatch, "input has wrong dimension");
    Eigen::MatrixXd a = x;
    for (const auto& l : layers_) {
      Eigen::MatrixXd z = l.weights * a;
      z.colwise() += l.bias;
      detail::apply_activation(z, l.activation);
      a = std::move(z);
    }
    return a;
  }

  Eigen::VectorXd forward(const Eigen::VectorXd& x) const { return forward_batch(x); }

  Eigen::VectorXd forward(std::span<const double> x) const {
    return forward(Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()))));
  }

  bool bitwise_equal(const Mlp& other) const {
    if (layers_.size() != other.layers_.size()) return false;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const auto& a = layers_[i];
      const auto& b = other.layers_[i];
      if (a.activation != b.activation || a.weights.rows() != b.weights.rows() || a.weights.cols() != b.weights.cols())
        return false;
      if (std::memcmp(a.weights.data(), b.weights.data(), sizeof(double) * static_cast<std::size_t>(a.weights.size())) != 0)
        return false;
      if (std::memcmp(a.bias.data(), b.bias.data(), sizeof(double) * static_cast<std::size_t>(a.bias.size())) != 0)
        return false;
    }
    return true;
  }

 private:
  void validate() const {
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const auto& l = layers_[i];
      if (l.bias.size() != l.weights.rows()) throw Error(Errc::DimensionMismatch, "bias length != layer rows");
      if (i > 0 && l.inputs() != layers_[i - 1].outputs()) throw Error(Errc::DimensionMismatch, "layer dims do not chain");
      if (!l.weights.allFinite() || !l.bias.allFinite()) throw Error(Errc::Parse, "non-finite weights");
    }
  }

  std::vector<DenseLayer> layers_;
  bool trainable_ = true;
  nlohmann::json metadata_ = nlohmann::json::object();
};

/// Per-layer gradients, same shapes as the network parameters.
struct Gradients {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> bias;

  static Gradients zeros_like(const Mlp& m) {
    Gradients g;
    for (const auto& l : m.layers()) {
      g.weights.push_back(Eigen::MatrixXd::Zero(l.weights.rows(), l.weights.cols()));
      g.bias.push_back(Eigen::VectorXd::Zero(l.bias.size()));
    }
    return g;
  }
};

/// Activations kept from a training-mode forward pass.
struct ForwardTape {
  std::vector<Eigen::MatrixXd> outputs;  // outputs[0] is the input, outputs[l+1] the (dropped-out) output of layer l
  std::vector<Eigen::MatrixXd> masks;    // dropout scale per hidden layer; empty when no dropout
  std::vector<Eigen::MatrixXd> pre_dropout;  // activation outputs before masking, per hidden layer
  double dropout_rate = 0.0;

  const Eigen::MatrixXd& result() const { return outputs.back(); }
};

/// Forward pass that records activations. Inverted dropout is applied to
/// hidden-layer outputs only, and only when rate > 0 and an rng is supplied.
inline ForwardTape forward_train(const Mlp& model, const Eigen::MatrixXd& x, double dropout_rate = 0.0,
                                 std::mt19937_64* rng = nullptr) {
  if (x.rows() != model.input_dim()) throw Error(Errc::DimensionMismatch, "input has wrong dimension");
  ForwardTape tape;
  tape.dropout_rate = dropout_rate;
  const bool drop = dropout_rate > 0.0 && rng != nullptr;
  tape.outputs.reserve(model.layers().size() + 1);
  tape.outputs.push_back(x);
  const auto& layers = model.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    Eigen::MatrixXd z = layers[l].weights * tape.outputs.back();
    z.colwise() += layers[l].bias;
    detail::apply_activation(z, layers[l].activation);
    if (drop && l + 1 < layers.size()) {
      std::bernoulli_distribution keep(1.0 - dropout_rate);
      const double scale = 1.0 / (1.0 - dropout_rate);
      Eigen::MatrixXd mask(z.rows(), z.cols());
      for (Eigen::Index c = 0; c < mask.cols(); ++c)
        for (Eigen::Index r = 0; r < mask.rows(); ++r) mask(r, c) = keep(*rng) ? scale : 0.0;
      tape.pre_dropout.push_back(z);
      z.array() *= mask.array();
      tape.masks.push_back(std::move(mask));
    }
    tape.outputs.push_back(std::move(z));
  }
  return tape;
}

struct BackwardResult {
  Gradients grads;               // empty when the model is frozen
  Eigen::MatrixXd input_grads;   // dL/dx, same shape as the input batch
};

/// Backpropagates dL/d(output) through the recorded pass.
inline BackwardResult backward(const Mlp& model, const ForwardTape& tape, Eigen::MatrixXd grad_out) {
  const auto& layers = model.layers();
  if (grad_out.rows() != model.output_dim() || grad_out.cols() != tape.result().cols())
    throw Error(Errc::DimensionMismatch, "output gradient has wrong shape");
  BackwardResult res;
  const bool want_params = model.trainable();
  if (want_params) {
    res.grads.weights.resize(layers.size());
    res.grads.bias.resize(layers.size());
  }
  Eigen::MatrixXd g = std::move(grad_out);
  for (std::size_t li = layers.size(); li-- > 0;) {
    const auto& layer = layers[li];
    const Eigen::MatrixXd& out = tape.outputs[li + 1];
    if (!tape.masks.empty() && li + 1 < layers.size()) {
      g.array() *= tape.masks[li].array();
      detail::activation_backward(g, tape.pre_dropout[li], layer.activation);
    } else {
      detail::activation_backward(g, out, layer.activation);
    }
    const Eigen::MatrixXd& in = tape.outputs[li];
    if (want_params) {
      res.grads.weights[li].noalias() = g * in.transpose();
      res.grads.bias[li] = g.rowwise().sum();
    }
    Eigen::MatrixXd prev(layer.weights.cols(), g.cols());
    prev.noalias() = layer.weights.transpose() * g;
    g = std::move(prev);
  }
  res.input_grads = std::move(g);
  return res;
}

struct BackpropResult {
  double loss = 0.0;
  Gradients grads;
  Eigen::MatrixXd input_grads;
};

/// Mean-over-batch, mean-over-components squared error and its gradients.
inline BackpropResult backprop_batch(const Mlp& model, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                                     double dropout_rate = 0.0, std::mt19937_64* rng = nullptr) {
  if (x.cols() == 0) throw Error(Errc::EmptyDataset, "empty batch");
  if (y.rows() != model.output_dim() || y.cols() != x.cols()) throw Error(Errc::DimensionMismatch, "target shape mismatch");
  const ForwardTape tape = forward_train(model, x, dropout_rate, rng);
  const Eigen::MatrixXd diff = tape.result() - y;
  const double denom = static_cast<double>(diff.size());
  BackpropResult r;
  r.loss = diff.squaredNorm() / denom;
  auto back = backward(model, tape, (2.0 / denom) * diff);
  r.grads = std::move(back.grads);
  r.input_grads = std::move(back.input_grads);
  return r;
}

struct AdamParams {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  Gradients m;
  Gradients v;
  long step = 0;

  static AdamState for_model(const Mlp& model) { return {Gradients::zeros_like(model), Gradients::zeros_like(model), 0}; }
};

/// Bias-corrected Adam update; frozen models are left untouched.
inline void adam_step(Mlp& model, AdamState& state, const Gradients& g, const AdamParams& p) {
  ++state.step;
  if (!model.trainable()) return;
  auto& layers = model.mutable_layers();
  if (g.weights.size() != layers.size() || state.m.weights.size() != layers.size())
    throw Error(Errc::DimensionMismatch, "gradient/optimizer state does not match model");
  const double c1 = 1.0 - std::pow(p.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(p.beta2, static_cast<double>(state.step));
  auto update = [&](auto& param, auto& m, auto& v, const auto& grad) {
    m = p.beta1 * m + (1.0 - p.beta1) * grad;
    v.array() = p.beta2 * v.array() + (1.0 - p.beta2) * grad.array().square();
    param.array() -= p.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + p.eps);
  };
  for (std::size_t l = 0; l < layers.size(); ++l) {
    update(layers[l].weights, state.m.weights[l], state.v.weights[l], g.weights[l]);
    update(layers[l].bias, state.m.bias[l], state.v.bias[l], g.bias[l]);
  }
}

enum class LrSchedule { Constant, Cosine };

struct TrainConfig {
  int hidden_layers = 8;
  int neurons_per_layer = 64;
  int batch_size = 256;
  double learning_rate = 3e-3;  // initial rate; cosine-annealed to zero over the run
  LrSchedule schedule = LrSchedule::Cosine;
  double dropout_rate = 0.0;
  int epochs = 300;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 1;

  void validate() const {
    if (hidden_layers < 1 || neurons_per_layer < 1 || batch_size < 1 || epochs < 1)
      throw Error(Errc::BadSize, "layer, neuron, batch and epoch counts must be positive");
    if (!(learning_rate > 0.0)) throw Error(Errc::OutOfRange, "learning rate must be positive");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw Error(Errc::OutOfRange, "dropout rate must lie in [0, 1)");
  }

  double rate_at(int epoch) const {
    if (schedule == LrSchedule::Constant) return learning_rate;
    return 0.5 * learning_rate * (1.0 + std::cos(std::numbers::pi * epoch / epochs));
  }

  AdamParams adam(int epoch) const { return {rate_at(epoch), adam_beta1, adam_beta2, adam_eps}; }
};

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"hidden_layers", c.hidden_layers},
                     {"neurons_per_layer", c.neurons_per_layer},
                     {"batch_size", c.batch_size},
                     {"learning_rate", c.learning_rate},
                     {"schedule", c.schedule == LrSchedule::Cosine ? "cosine" : "constant"},
                     {"dropout_rate", c.dropout_rate},
                     {"epochs", c.epochs},
                     {"adam_beta1", c.adam_beta1},
                     {"adam_beta2", c.adam_beta2},
                     {"adam_eps", c.adam_eps},
                     {"seed", c.seed}};
}

inline void from_json(const nlohmann::json& j, TrainConfig& c) {
  const TrainConfig d;
  c.hidden_layers = j.value("hidden_layers", d.hidden_layers);
  c.neurons_per_layer = j.value("neurons_per_layer", d.neurons_per_layer);
  c.batch_size = j.value("batch_size", d.batch_size);
  c.learning_rate = j.value("learning_rate", d.learning_rate);
  const std::string sched = j.value("schedule", std::string("cosine"));
  if (sched != "cosine" && sched != "constant") throw Error(Errc::Parse, "schedule must be cosine or constant");
  c.schedule = sched == "cosine" ? LrSchedule::Cosine : LrSchedule::Constant;
  c.dropout_rate = j.value("dropout_rate", d.dropout_rate);
  c.epochs = j.value("epochs", d.epochs);
  c.adam_beta1 = j.value("adam_beta1", d.adam_beta1);
  c.adam_beta2 = j.value("adam_beta2", d.adam_beta2);
  c.adam_eps = j.value("adam_eps", d.adam_eps);
  c.seed = j.value("seed", d.seed);
  c.validate();
}

inline void to_json(nlohmann::json& j, const Mlp& m) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : m.layers()) {
    std::vector<double> w(static_cast<std::size_t>(l.weights.size()));
    std::size_t k = 0;
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) w[k++] = l.weights(r, c);
    layers.push_back({{"rows", l.weights.rows()},
                      {"cols", l.weights.cols()},
                      {"activation", to_string(l.activation)},
                      {"weights", w},
                      {"bias", std::vector<double>(l.bias.data(), l.bias.data() + l.bias.size())}});
  }
  j = nlohmann::json{{"input_dim", m.input_dim()}, {"output_dim", m.output_dim()}, {"trainable", m.trainable()},
                     {"layers", layers},         {"metadata", m.metadata()}};
}

inline void from_json(const nlohmann::json& j, Mlp& m) {
  std::vector<DenseLayer> layers;
  for (const auto& jl : j.at("layers")) {
    DenseLayer l;
    const auto rows = jl.at("rows").get<Eigen::Index>();
    const auto cols = jl.at("cols").get<Eigen::Index>();
    const auto w = jl.at("weights").get<std::vector<double>>();
    const auto b = jl.at("bias").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(w.size()) != rows * cols || static_cast<Eigen::Index>(b.size()) != rows)
      throw Error(Errc::Parse, "layer array sizes do not match rows/cols");
    l.weights.resize(rows, cols);
    std::size_t k = 0;
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c) l.weights(r, c) = w[k++];
    l.bias = Eigen::Map<const Eigen::VectorXd>(b.data(), rows);
    l.activation = parse_activation(jl.at("activation").get<std::string>());
    layers.push_back(std::move(l));
  }
  m = Mlp(std::move(layers), j.value("trainable", true));
  if (j.contains("metadata")) m.metadata() = j.at("metadata");
  if (j.contains("input_dim") && j.at("input_dim").get<Eigen::Index>() != m.input_dim())
    throw Error(Errc::Parse, "input_dim does not match layers");
  if (j.contains("output_dim") && j.at("output_dim").get<Eigen::Index>() != m.output_dim())
    throw Error(Errc::Parse, "output_dim does not match layers");
}

}  // namespace lcs
