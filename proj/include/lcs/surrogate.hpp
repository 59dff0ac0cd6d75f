#pragma once

// Direct model (voltages -> tau) and compound model (state -> voltages ->
// state through a frozen direct network), plus infidelity evaluation.

#include <algorithm>
#include <functional>
#include <limits>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "lcs/dataset.hpp"
#include "lcs/error.hpp"
#include "lcs/lcsim.hpp"
#include "lcs/mlp.hpp"
#include "lcs/qstate.hpp"
#include "lcs/util.hpp"

namespace lcs {

// ---- representations ------------------------------------------------------

/// Network input for a voltage triple: each component scaled to [0, 1].
inline Eigen::Vector3d voltage_features(const Voltages& v) {
  return {v.v1 / kMaxVoltage, v.v2 / kMaxVoltage, v.v3 / kMaxVoltage};
}

inline Eigen::Vector4d state_features(const DensityMatrix& r) {
  const auto e = r.elements();
  return {e[0], e[1], e[2], e[3]};
}

inline DensityMatrix state_from_tau_output(const double* t) { return tau_to_rho({t[0], t[1], t[2], t[3]}); }

inline Eigen::MatrixXd voltage_matrix(const std::vector<Record>& records) {
  Eigen::MatrixXd x(3, static_cast<Eigen::Index>(records.size()));
  for (std::size_t i = 0; i < records.size(); ++i) x.col(static_cast<Eigen::Index>(i)) = voltage_features(records[i].voltages);
  return x;
}

inline Eigen::MatrixXd tau_matrix(const std::vector<Record>& records) {
  Eigen::MatrixXd y(4, static_cast<Eigen::Index>(records.size()));
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto t = rho_to_tau(records[i].state).values();
    y.col(static_cast<Eigen::Index>(i)) << t[0], t[1], t[2], t[3];
  }
  return y;
}

inline Eigen::MatrixXd state_matrix(const std::vector<Record>& records) {
  Eigen::MatrixXd y(4, static_cast<Eigen::Index>(records.size()));
  for (std::size_t i = 0; i < records.size(); ++i) y.col(static_cast<Eigen::Index>(i)) = state_features(records[i].state);
  return y;
}

/// Column-wise tau -> [rho00, rho01_re, rho01_im, rho11].
inline Eigen::MatrixXd tau_to_state_batch(const Eigen::MatrixXd& tau) {
  Eigen::MatrixXd out(4, tau.cols());
  for (Eigen::Index c = 0; c < tau.cols(); ++c) out.col(c) = state_features(state_from_tau_output(tau.col(c).data()));
  return out;
}

/// Vector-Jacobian product of tau_to_state_batch.
inline Eigen::MatrixXd tau_to_state_backward(const Eigen::MatrixXd& tau, const Eigen::MatrixXd& grad_state) {
  Eigen::MatrixXd g(4, tau.cols());
  for (Eigen::Index c = 0; c < tau.cols(); ++c) {
    const double t0 = tau(0, c), t1 = tau(1, c), t2 = tau(2, c), t3 = tau(3, c);
    const double n = t0 * t0 + t1 * t1 + t2 * t2 + t3 * t3;
    if (!(n > 1e-300)) throw Error(Errc::ZeroTrace, "tau output collapsed to zero");
    const Eigen::Vector4d u(t0 * t0, t0 * t2, -t0 * t3, t1 * t1 + t2 * t2 + t3 * t3);
    const Eigen::Vector4d gr = grad_state.col(c);
    Eigen::Matrix4d du;  // du_k / dt_m
    du << 2 * t0, 0, 0, 0,
          t2, 0, t0, 0,
          -t3, 0, 0, -t0,
          0, 2 * t1, 2 * t2, 2 * t3;
    const Eigen::Vector4d t(t0, t1, t2, t3);
    g.col(c) = du.transpose() * gr / n - (gr.dot(u)) * 2.0 * t / (n * n);
  }
  return g;
}

// ---- evaluation -----------------------------------------------------------

using StatePredictor = std::function<DensityMatrix(const Voltages&)>;
using StateReconstructor = std::function<DensityMatrix(const DensityMatrix&)>;

/// Infidelity of predicted vs recorded states.
inline InfidelityStats evaluate(const StatePredictor& predictor, const std::vector<Record>& data) {
  if (data.empty()) throw Error(Errc::EmptyDataset, "evaluation set is empty");
  std::vector<double> inf(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) inf[i] = infidelity(predictor(data[i].voltages), data[i].state);
  return summarize(std::move(inf));
}

/// Infidelity between each recorded (input) state and its round trip.
inline InfidelityStats evaluate_reconstruction(const StateReconstructor& roundtrip, const std::vector<Record>& data) {
  if (data.empty()) throw Error(Errc::EmptyDataset, "evaluation set is empty");
  std::vector<double> inf(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) inf[i] = infidelity(roundtrip(data[i].state), data[i].state);
  return summarize(std::move(inf));
}

inline double mean_infidelity_columns(const Eigen::MatrixXd& predicted_states, const std::vector<Record>& data) {
  double sum = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto c = predicted_states.col(static_cast<Eigen::Index>(i));
    sum += infidelity(DensityMatrix{c(0), c(3), c(1), c(2)}, data[i].state);
  }
  return sum / static_cast<double>(data.size());
}

// ---- training loop --------------------------------------------------------

struct TrainHistory {
  std::vector<double> train_loss;
  std::vector<double> val_infidelity;
  int best_epoch = -1;
  double best_val_infidelity = std::numeric_limits<double>::infinity();
};

inline void to_json(nlohmann::json& j, const TrainHistory& h) {
  j = nlohmann::json{{"train_loss", h.train_loss},
                     {"val_infidelity", h.val_infidelity},
                     {"best_epoch", h.best_epoch},
                     {"best_val_infidelity", h.best_val_infidelity}};
}

/// Per-epoch hook: (epoch, train loss, validation mean infidelity).
using EpochCallback = std::function<void(int, double, double)>;

namespace detail {

/// Shared minibatch loop. `step(batch_columns, rng)` performs one update and
/// returns the batch loss; `validate()` scores the current weights. The best
/// validation snapshot (taken through `snapshot`) is restored at the end.
template <class Step, class Validate, class Snapshot, class Restore>
TrainHistory run_epochs(std::size_t n, const TrainConfig& cfg, Step&& step, Validate&& validate, Snapshot&& snapshot,
                        Restore&& restore, const EpochCallback& on_epoch) {
  TrainHistory h;
  std::mt19937_64 shuffle_rng(mix_seed(cfg.seed, 1));
  std::mt19937_64 dropout_rng(mix_seed(cfg.seed, 2));
  std::vector<Eigen::Index> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<Eigen::Index>(i);
  const auto batch = static_cast<std::size_t>(cfg.batch_size);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t end = std::min(n, start + batch);
      std::vector<Eigen::Index> cols(order.begin() + static_cast<std::ptrdiff_t>(start),
                                     order.begin() + static_cast<std::ptrdiff_t>(end));
      loss_sum += step(cols, epoch, dropout_rng);
      ++batches;
    }
    const double train_loss = loss_sum / static_cast<double>(batches);
    const double val = validate();
    h.train_loss.push_back(train_loss);
    h.val_infidelity.push_back(val);
    if (val < h.best_val_infidelity || h.best_epoch < 0) {
      h.best_val_infidelity = val;
      h.best_epoch = epoch;
      snapshot();
    }
    if (on_epoch) on_epoch(epoch, train_loss, val);
  }
  restore();
  return h;
}

}  // namespace detail

struct DirectTrainResult {
  Mlp model;
  TrainHistory history;
};

/// Direct model prediction with the network's raw tau output.
inline DensityMatrix predict_direct(const Mlp& model, const Voltages& v) {
  const Eigen::VectorXd t = model.forward(Eigen::VectorXd(voltage_features(v)));
  return state_from_tau_output(t.data());
}

inline StatePredictor direct_predictor(const Mlp& model) {
  return [&model](const Voltages& v) { return predict_direct(model, v); };
}

/// Trains a 3 -> hidden -> 4 network on MSE between predicted and recorded tau
/// parameters; keeps the epoch with the lowest validation mean infidelity
/// (training infidelity when `val` is empty).
inline DirectTrainResult train_direct(const std::vector<Record>& train, const std::vector<Record>& val,
                                     const TrainConfig& cfg, const EpochCallback& on_epoch = {}) {
  if (train.empty()) throw Error(Errc::EmptyDataset, "training set is empty");
  cfg.validate();
  const Eigen::MatrixXd x = voltage_matrix(train);
  const Eigen::MatrixXd y = tau_matrix(train);
  const auto& score_set = val.empty() ? train : val;
  const Eigen::MatrixXd xv = voltage_matrix(score_set);

  DirectTrainResult res;
  res.model = Mlp::dense(3, cfg.hidden_layers, cfg.neurons_per_layer, 4, Activation::Linear, cfg.seed);
  AdamState adam = AdamState::for_model(res.model);
  Mlp best = res.model;

  auto step = [&](const std::vector<Eigen::Index>& cols, int epoch, std::mt19937_64& rng) {
    const Eigen::MatrixXd xb = x(Eigen::all, cols);
    const Eigen::MatrixXd yb = y(Eigen::all, cols);
    const auto bp = backprop_batch(res.model, xb, yb, cfg.dropout_rate, &rng);
    adam_step(res.model, adam, bp.grads, cfg.adam(epoch));
    return bp.loss;
  };
  auto validate = [&] { return mean_infidelity_columns(tau_to_state_batch(res.model.forward_batch(xv)), score_set); };
  res.history = detail::run_epochs(
      train.size(), cfg, step, validate, [&] { best = res.model; }, [&] { res.model = best; }, on_epoch);
  res.model.metadata() = {{"kind", "direct"},
                          {"config", cfg},
                          {"train_hash", dataset_hash(train)},
                          {"best_epoch", res.history.best_epoch},
                          {"best_val_infidelity", res.history.best_val_infidelity}};
  return res;
}

// ---- compound model -------------------------------------------------------

/// Trainable inverse network (state -> voltages/10) feeding a frozen direct network.
struct CompoundModel {
  Mlp inverse;
  Mlp direct;

  Voltages predict_voltages(const DensityMatrix& target) const {
    const Eigen::VectorXd u = inverse.forward(Eigen::VectorXd(state_features(target)));
    return {kMaxVoltage * u(0), kMaxVoltage * u(1), kMaxVoltage * u(2)};
  }

  DensityMatrix reconstruct(const DensityMatrix& target) const {
    const Eigen::VectorXd u = inverse.forward(Eigen::VectorXd(state_features(target)));
    const Eigen::VectorXd t = direct.forward(u);
    return state_from_tau_output(t.data());
  }
};

inline void to_json(nlohmann::json& j, const CompoundModel& m) {
  j = nlohmann::json{{"inverse", m.inverse}, {"direct", m.direct}};
}
inline void from_json(const nlohmann::json& j, CompoundModel& m) {
  m.inverse = j.at("inverse").get<Mlp>();
  m.direct = j.at("direct").get<Mlp>();
  m.direct.set_trainable(false);
  if (m.inverse.input_dim() != 4 || m.inverse.output_dim() != 3 || m.direct.input_dim() != 3 || m.direct.output_dim() != 4)
    throw Error(Errc::DimensionMismatch, "compound model needs a 4->3 inverse and a 3->4 direct network");
}

struct CompoundLoss {
  double loss = 0.0;
  Gradients inverse_grads;
  Eigen::MatrixXd input_grads;
};

/// MSE between the input state representation and the compound output state,
/// with gradients for the inverse section flowing through the frozen direct net.
inline CompoundLoss compound_backprop(const Mlp& inverse, const Mlp& direct, const Eigen::MatrixXd& states,
                                      double dropout_rate = 0.0, std::mt19937_64* rng = nullptr) {
  if (states.cols() == 0) throw Error(Errc::EmptyDataset, "empty batch");
  const ForwardTape inv_tape = forward_train(inverse, states, dropout_rate, rng);
  const ForwardTape dir_tape = forward_train(direct, inv_tape.result());
  const Eigen::MatrixXd out = tau_to_state_batch(dir_tape.result());
  const Eigen::MatrixXd diff = out - states;
  const double denom = static_cast<double>(diff.size());
  CompoundLoss r;
  r.loss = diff.squaredNorm() / denom;
  const Eigen::MatrixXd g_tau = tau_to_state_backward(dir_tape.result(), (2.0 / denom) * diff);
  const auto dir_back = backward(direct, dir_tape, g_tau);
  auto inv_back = backward(inverse, inv_tape, dir_back.input_grads);
  r.inverse_grads = std::move(inv_back.grads);
  r.input_grads = std::move(inv_back.input_grads);
  return r;
}

struct CompoundTrainResult {
  CompoundModel model;
  TrainHistory history;
};

/// Supervised warm start for the inverse section: fit state -> voltages/10 on
/// the training pairs before switching to the round-trip loss. Zero epochs
/// disables it. `restarts` independent initializations are trained and the
/// one with the lowest validation infidelity is kept; no continuous inverse
/// of the device exists, and where the unavoidable seam lands depends on the
/// initialization.
struct PretrainOptions {
  int epochs = 50;
  double learning_rate = 1e-3;
  int batch_size = 256;
  int restarts = 4;
};

inline void to_json(nlohmann::json& j, const PretrainOptions& p) {
  j = nlohmann::json{
      {"epochs", p.epochs}, {"learning_rate", p.learning_rate}, {"batch_size", p.batch_size}, {"restarts", p.restarts}};
}

/// Defaults for the inverse section. The round-trip loss gets stuck in poor
/// voltage branches at the direct network's learning rate.
inline TrainConfig default_compound_config() {
  TrainConfig c;
  c.learning_rate = 1e-3;
  return c;
}

/// Trains a 4 -> hidden -> 3 sigmoid inverse network against a frozen copy of
/// `direct`. Throws if the direct weights change during training.
inline CompoundTrainResult train_compound(const Mlp& direct, const std::vector<Record>& train,
                                          const std::vector<Record>& val, const TrainConfig& cfg,
                                          const EpochCallback& on_epoch = {}, const PretrainOptions& pre = {}) {
  if (train.empty()) throw Error(Errc::EmptyDataset, "training set is empty");
  if (direct.input_dim() != 3 || direct.output_dim() != 4)
    throw Error(Errc::DimensionMismatch, "direct network must map 3 -> 4");
  cfg.validate();
  if (pre.epochs < 0 || pre.batch_size < 1 || !(pre.learning_rate > 0.0) || pre.restarts < 1)
    throw Error(Errc::OutOfRange, "bad pretraining options");
  CompoundTrainResult res;
  res.model.direct = direct;
  res.model.direct.set_trainable(false);

  const Eigen::MatrixXd x = state_matrix(train);
  const Eigen::MatrixXd u = voltage_matrix(train);
  const auto& score_set = val.empty() ? train : val;
  const Eigen::MatrixXd xv = state_matrix(score_set);
  const Mlp& frozen = res.model.direct;

  // One initialization: optional warm start, then the round-trip loss.
  auto attempt = [&](std::uint64_t seed, TrainHistory& history) {
    TrainConfig c = cfg;
    c.seed = seed;
    Mlp inverse = Mlp::dense(4, c.hidden_layers, c.neurons_per_layer, 3, Activation::SigmoidScaled, seed);
    Mlp best = inverse;
    auto validate = [&] {
      return mean_infidelity_columns(tau_to_state_batch(frozen.forward_batch(inverse.forward_batch(xv))), score_set);
    };
    auto keep = [&] { best = inverse; };
    auto restore = [&] { inverse = best; };
    if (pre.epochs > 0) {
      TrainConfig pc = c;
      pc.epochs = pre.epochs;
      pc.learning_rate = pre.learning_rate;
      pc.batch_size = pre.batch_size;
      pc.seed = mix_seed(seed, 7);
      AdamState pre_adam = AdamState::for_model(inverse);
      auto pre_step = [&](const std::vector<Eigen::Index>& cols, int epoch, std::mt19937_64& rng) {
        const auto bp = backprop_batch(inverse, x(Eigen::all, cols), u(Eigen::all, cols), pc.dropout_rate, &rng);
        adam_step(inverse, pre_adam, bp.grads, pc.adam(epoch));
        return bp.loss;
      };
      detail::run_epochs(train.size(), pc, pre_step, validate, keep, restore, {});
    }
    AdamState adam = AdamState::for_model(inverse);
    auto step = [&](const std::vector<Eigen::Index>& cols, int epoch, std::mt19937_64& rng) {
      const Eigen::MatrixXd xb = x(Eigen::all, cols);
      const auto cl = compound_backprop(inverse, frozen, xb, c.dropout_rate, &rng);
      adam_step(inverse, adam, cl.inverse_grads, c.adam(epoch));
      return cl.loss;
    };
    history = detail::run_epochs(train.size(), c, step, validate, keep, restore, on_epoch);
    return inverse;
  };

  for (int r = 0; r < pre.restarts; ++r) {
    TrainHistory h;
    Mlp inverse = attempt(r == 0 ? cfg.seed : mix_seed(cfg.seed, 1000 + static_cast<std::uint64_t>(r)), h);
    if (r == 0 || h.best_val_infidelity < res.history.best_val_infidelity) {
      res.model.inverse = std::move(inverse);
      res.history = std::move(h);
    }
  }

  Mlp frozen_check = direct;
  frozen_check.set_trainable(false);
  if (!res.model.direct.bitwise_equal(frozen_check))
    throw Error(Errc::NonPhysical, "frozen direct network was modified during compound training");
  res.model.inverse.metadata() = {{"kind", "inverse"},
                                  {"config", cfg},
                                  {"pretrain", pre},
                                  {"train_hash", dataset_hash(train)},
                                  {"best_epoch", res.history.best_epoch},
                                  {"best_val_infidelity", res.history.best_val_infidelity}};
  return res;
}

inline StateReconstructor compound_reconstructor(const CompoundModel& m) {
  return [&m](const DensityMatrix& target) { return m.reconstruct(target); };
}

}  // namespace lcs
