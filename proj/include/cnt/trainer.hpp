// SPDX-License-Identifier: Apache-2.0
#pragma once

// Fully connected ReLU classifier: initialization, forward pass, softmax
// cross-entropy backprop, mini-batch SGD with early stopping, and seeded
// population generation. Everything is a pure function of (config, data).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cnt/dataset.hpp"
#include "cnt/errors.hpp"
#include "cnt/parallel.hpp"
#include "cnt/rng.hpp"
#include "cnt/snapshot.hpp"

namespace cnt {

// final: only the terminal state (early-stop point or last epoch) is emitted.
enum class ScheduleKind { every_epoch, on_accuracy_crossings, final };

struct SnapshotSchedule {
  ScheduleKind kind = ScheduleKind::every_epoch;
  std::vector<double> thresholds;  // ascending; used by on_accuracy_crossings
};

struct TrainConfig {
  std::vector<std::size_t> layer_sizes;
  InitFamily init_family = InitFamily::normal;
  double init_scale = 0.05;
  double learning_rate = 0.05;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 30;
  std::optional<double> early_stop_at_accuracy;
  std::uint64_t seed = 0;
  SnapshotSchedule snapshot_schedule;
  std::size_t eval_every_batches = 0;  // 0: evaluate once per epoch
  std::string task_tag = "task";
};

inline void validate(const TrainConfig& c) {
  if (c.layer_sizes.size() < 2) throw ValidationError("layer_sizes needs at least 2 entries");
  for (std::size_t i = 0; i < c.layer_sizes.size(); ++i) {
    if (c.layer_sizes[i] == 0) throw ValidationError("layer_sizes[" + std::to_string(i) + "] must be positive");
  }
  if (!(c.init_scale > 0 && std::isfinite(c.init_scale))) throw ValidationError("init_scale must be positive");
  if (!(c.learning_rate > 0 && std::isfinite(c.learning_rate))) throw ValidationError("learning_rate must be positive");
  if (c.batch_size == 0) throw ValidationError("batch_size must be positive");
  if (c.max_epochs == 0) throw ValidationError("max_epochs must be positive");
  if (c.early_stop_at_accuracy && !(*c.early_stop_at_accuracy >= 0 && *c.early_stop_at_accuracy <= 1)) {
    throw ValidationError("early_stop_at_accuracy must lie in [0,1]");
  }
  const auto& t = c.snapshot_schedule.thresholds;
  if (c.snapshot_schedule.kind == ScheduleKind::on_accuracy_crossings && t.empty()) {
    throw ValidationError("on_accuracy_crossings needs at least one threshold");
  }
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!(t[i] >= 0 && t[i] <= 1)) throw ValidationError("snapshot thresholds must lie in [0,1]");
    if (i > 0 && !(t[i] > t[i - 1])) throw ValidationError("snapshot thresholds must be strictly ascending");
  }
}

struct ForwardResult {
  std::vector<double> logits;
  std::vector<double> probabilities;
  std::size_t prediction = 0;
};

/// Max-subtracted softmax; rows sum to 1 and stay finite for any finite logits.
inline std::vector<double> softmax(std::span<const double> logits) {
  if (logits.empty()) throw std::invalid_argument("softmax: empty logits");
  const double m = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) z += p[i] = std::exp(logits[i] - m);
  for (double& x : p) x /= z;
  return p;
}

namespace detail {

inline const Dense& dense_block(const NetworkSnapshot& s, std::size_t b) {
  const auto* d = std::get_if<Dense>(&s.layers[b]);
  if (!d) throw std::invalid_argument("trainer supports dense layers only (block " + std::to_string(b) + ")");
  return *d;
}

// z = W^T a + b for a row-major (in x out) weight matrix.
inline void affine(const Dense& d, std::span<const double> a, std::vector<double>& z) {
  z.assign(d.bias.begin(), d.bias.end());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double ai = a[i];
    if (ai == 0.0) continue;
    const auto row = d.weights.row(i);
    for (std::size_t j = 0; j < z.size(); ++j) z[j] += ai * row[j];
  }
}

// Activations of every neuron layer; the last entry holds the logits.
inline void forward_all(const NetworkSnapshot& s, std::span<const double> x, std::vector<std::vector<double>>& acts) {
  const std::size_t blocks = s.layers.size();
  acts.resize(blocks + 1);
  acts[0].assign(x.begin(), x.end());
  for (std::size_t b = 0; b < blocks; ++b) {
    affine(dense_block(s, b), acts[b], acts[b + 1]);
    if (b + 1 < blocks) {
      for (double& v : acts[b + 1]) v = v > 0.0 ? v : 0.0;
    }
  }
}

inline std::size_t argmax(std::span<const double> v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace detail

inline ForwardResult forward(const NetworkSnapshot& s, std::span<const double> x) {
  if (s.layers.empty()) throw std::invalid_argument("forward: network has no layers");
  const std::size_t in = detail::dense_block(s, 0).weights.rows();
  if (x.size() != in) {
    throw std::invalid_argument("forward: input has " + std::to_string(x.size()) + " features, network expects " +
                                std::to_string(in));
  }
  std::vector<std::vector<double>> acts;
  detail::forward_all(s, x, acts);
  ForwardResult r;
  r.logits = std::move(acts.back());
  r.probabilities = softmax(r.logits);
  r.prediction = detail::argmax(r.logits);
  return r;
}

inline double accuracy(const NetworkSnapshot& s, const Dataset& d) {
  if (d.size() == 0) throw std::invalid_argument("accuracy: empty dataset");
  std::vector<std::vector<double>> acts;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    detail::forward_all(s, d.inputs.row(i), acts);
    if (detail::argmax(acts.back()) == d.labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(d.size());
}

/// Gradients of the mean cross-entropy, shaped like the network's blocks.
struct Gradients {
  std::vector<Matrix> weights;
  std::vector<std::vector<double>> bias;
};

struct LossGradient {
  double loss = 0.0;
  Gradients grad;
};

/// Mean softmax cross-entropy over `batch` (sample indices into `data`) and its gradient.
inline LossGradient loss_and_gradient(const NetworkSnapshot& s, const Dataset& data,
                                      std::span<const std::size_t> batch) {
  if (batch.empty()) throw std::invalid_argument("loss_and_gradient: empty batch");
  const std::size_t blocks = s.layers.size();
  LossGradient out;
  for (std::size_t b = 0; b < blocks; ++b) {
    const auto& d = detail::dense_block(s, b);
    out.grad.weights.emplace_back(d.weights.rows(), d.weights.cols());
    out.grad.bias.emplace_back(d.bias.size(), 0.0);
  }
  std::vector<std::vector<double>> acts;
  std::vector<double> delta, prev_delta;
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  for (std::size_t idx : batch) {
    detail::forward_all(s, data.inputs.row(idx), acts);
    const auto& logits = acts.back();
    const std::size_t label = data.labels[idx];
    const double m = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (double v : logits) z += std::exp(v - m);
    out.loss += (std::log(z) + m - logits[label]) * inv_n;

    delta.resize(logits.size());
    for (std::size_t j = 0; j < logits.size(); ++j) delta[j] = std::exp(logits[j] - m) / z * inv_n;
    delta[label] -= inv_n;

    for (std::size_t b = blocks; b-- > 0;) {
      const auto& a = acts[b];
      auto& gw = out.grad.weights[b];
      for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] == 0.0) continue;
        auto row = gw.row(i);
        for (std::size_t j = 0; j < delta.size(); ++j) row[j] += a[i] * delta[j];
      }
      for (std::size_t j = 0; j < delta.size(); ++j) out.grad.bias[b][j] += delta[j];
      if (b == 0) break;
      // Back through W and the ReLU of layer b; a[i] > 0 iff the unit was active.
      const auto& w = detail::dense_block(s, b).weights;
      prev_delta.assign(a.size(), 0.0);
      for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] <= 0.0) continue;
        const auto row = w.row(i);
        double acc = 0.0;
        for (std::size_t j = 0; j < delta.size(); ++j) acc += row[j] * delta[j];
        prev_delta[i] = acc;
      }
      std::swap(delta, prev_delta);
    }
  }
  return out;
}

inline double mean_loss(const NetworkSnapshot& s, const Dataset& data) {
  std::vector<std::size_t> all(data.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return loss_and_gradient(s, data, all).loss;
}

inline void sgd_step(NetworkSnapshot& s, const Gradients& g, double lr) {
  for (std::size_t b = 0; b < s.layers.size(); ++b) {
    auto& d = std::get<Dense>(s.layers[b]);
    auto& w = d.weights.values();
    const auto& gw = g.weights[b].values();
    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr * gw[i];
    for (std::size_t j = 0; j < d.bias.size(); ++j) d.bias[j] -= lr * g.bias[b][j];
  }
}

/// Weights from the configured family, zero biases, accuracy left at 0.
inline NetworkSnapshot init_network(const TrainConfig& cfg) {
  validate(cfg);
  Rng rng(cfg.seed);
  NetworkSnapshot s;
  for (std::size_t b = 0; b + 1 < cfg.layer_sizes.size(); ++b) {
    const std::size_t in = cfg.layer_sizes[b], out = cfg.layer_sizes[b + 1];
    Matrix w(in, out);
    for (double& x : w.values()) {
      x = cfg.init_family == InitFamily::normal ? rng.normal(cfg.init_scale) : rng.uniform_symmetric(cfg.init_scale);
    }
    s.layers.emplace_back(Dense{std::move(w), std::vector<double>(out, 0.0)});
  }
  s.meta.epoch = 0;
  s.meta.init_family = cfg.init_family;
  s.meta.init_scale = cfg.init_scale;
  s.meta.seed = cfg.seed;
  s.meta.task_tag = cfg.task_tag;
  s.meta.output_activation = OutputActivation::softmax;
  return s;
}

/// Initialized network tagged with its accuracy on `eval`.
inline NetworkSnapshot init_network(const TrainConfig& cfg, const Dataset& eval) {
  auto s = init_network(cfg);
  s.meta.accuracy = accuracy(s, eval);
  return s;
}

struct TrainResult {
  std::vector<NetworkSnapshot> snapshots;
  NetworkSnapshot final_state;
  NetworkSnapshot best_state;
  bool reached_target = false;
  std::size_t epochs = 0;            // epochs started
  std::vector<double> epoch_losses;  // mean mini-batch loss per epoch
};

inline TrainResult train_detailed(const TrainConfig& cfg, const Dataset& data, const Dataset& eval) {
  validate(cfg);
  validate(data);
  validate(eval);
  if (data.dim() != cfg.layer_sizes.front() || eval.dim() != cfg.layer_sizes.front()) {
    throw ValidationError("dataset has " + std::to_string(data.dim()) + " features, config expects " +
                          std::to_string(cfg.layer_sizes.front()));
  }
  if (data.class_count > cfg.layer_sizes.back() || eval.class_count > cfg.layer_sizes.back()) {
    throw ValidationError("dataset has more classes than output units");
  }

  TrainResult r;
  auto net = init_network(cfg, eval);
  r.best_state = net;
  Rng rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);  // shuffle stream, independent of the init stream
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  const auto& thresholds = cfg.snapshot_schedule.thresholds;
  std::size_t crossed = 0;
  bool last_emitted_current = false;
  auto emit = [&] {
    r.snapshots.push_back(net);
    last_emitted_current = true;
  };
  // Returns true when training should stop.
  auto evaluate = [&](std::size_t epoch, bool epoch_end) {
    net.meta.epoch = epoch;
    net.meta.accuracy = accuracy(net, eval);
    last_emitted_current = false;
    if (net.meta.accuracy > r.best_state.meta.accuracy) r.best_state = net;
    if (cfg.snapshot_schedule.kind == ScheduleKind::on_accuracy_crossings) {
      bool fire = false;
      while (crossed < thresholds.size() && net.meta.accuracy >= thresholds[crossed]) {
        ++crossed;
        fire = true;
      }
      if (fire) emit();
    } else if (cfg.snapshot_schedule.kind == ScheduleKind::every_epoch && epoch_end) {
      emit();
    }
    if (cfg.early_stop_at_accuracy && net.meta.accuracy >= *cfg.early_stop_at_accuracy) {
      r.reached_target = true;
      return true;
    }
    return false;
  };

  bool stop = cfg.early_stop_at_accuracy && net.meta.accuracy >= *cfg.early_stop_at_accuracy;
  r.reached_target = stop;
  std::size_t batches_seen = 0;
  for (std::size_t epoch = 1; epoch <= cfg.max_epochs && !stop; ++epoch) {
    r.epochs = epoch;
    rng.shuffle(std::span<std::size_t>(order));
    double loss_sum = 0.0;
    std::size_t batch_count = 0;
    bool evaluated_at_end = false;
    for (std::size_t start = 0; start < order.size() && !stop; start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const auto lg = loss_and_gradient(net, data, std::span<const std::size_t>(order).subspan(start, end - start));
      if (!std::isfinite(lg.loss)) throw DivergenceError(epoch);
      sgd_step(net, lg.grad, cfg.learning_rate);
      loss_sum += lg.loss;
      ++batch_count;
      ++batches_seen;
      const bool last_batch = end == order.size();
      if (cfg.eval_every_batches > 0 && batches_seen % cfg.eval_every_batches == 0) {
        stop = evaluate(epoch, last_batch);
        evaluated_at_end = last_batch;
      }
    }
    r.epoch_losses.push_back(loss_sum / static_cast<double>(batch_count));
    if (!stop && !evaluated_at_end) stop = evaluate(epoch, true);
  }
  if (!last_emitted_current) emit();  // the terminal state is always part of the output
  r.final_state = net;
  return r;
}

inline std::vector<NetworkSnapshot> train(const TrainConfig& cfg, const Dataset& data, const Dataset& eval) {
  return train_detailed(cfg, data, eval).snapshots;
}

struct PopulationMember {
  std::uint64_t seed = 0;
  double target = 0.0;
  bool reached_target = false;  // false: snapshots end with the best state seen instead
  std::vector<NetworkSnapshot> snapshots;
};

/// Trains `count` networks with seeds base.seed + i, early-stopping network i
/// at accuracy_targets[i % targets]. Networks run concurrently up to CNT_THREADS.
inline std::vector<PopulationMember> generate_population(const TrainConfig& base, std::size_t count,
                                                         std::span<const double> accuracy_targets,
                                                         const Dataset& data, const Dataset& eval) {
  if (count == 0) throw std::invalid_argument("generate_population: count must be positive");
  if (accuracy_targets.empty()) throw std::invalid_argument("generate_population: no accuracy targets");
  std::vector<PopulationMember> out(count);
  parallel_for(count, [&](std::size_t i) {
    TrainConfig cfg = base;
    cfg.seed = base.seed + i;
    cfg.early_stop_at_accuracy = accuracy_targets[i % accuracy_targets.size()];
    auto r = train_detailed(cfg, data, eval);
    auto& m = out[i];
    m.seed = cfg.seed;
    m.target = *cfg.early_stop_at_accuracy;
    m.reached_target = r.reached_target;
    m.snapshots = std::move(r.snapshots);
    if (!r.reached_target && !(m.snapshots.back() == r.best_state)) m.snapshots.push_back(std::move(r.best_state));
  });
  return out;
}

}  // namespace cnt
