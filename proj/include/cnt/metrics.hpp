// SPDX-License-Identifier: Apache-2.0
#pragma once

// Link-weight moments, node strength, layer fluctuation and node disparity
// over a snapshot's bipartite graph. Biases never enter any metric.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cnt/conv_strength.hpp"
#include "cnt/numeric.hpp"
#include "cnt/snapshot.hpp"

namespace cnt {

struct LayerLinkStats {
  std::size_t layer_index = 0;
  double mu = 0.0;
  double delta = 0.0;  // population variance
};

struct StrengthVector {
  std::size_t layer_index = 0;
  std::vector<double> s_in;
  std::vector<double> s_out;
  std::vector<double> s;
};

struct NodeStrength {
  double s_in = 0.0;
  double s_out = 0.0;
  double s = 0.0;
};

struct LayerFluctuation {
  std::size_t layer_index = 0;
  double value = 0.0;
};

/// Per-node disparity of one neuron layer; nullopt marks a cancelled denominator.
struct LayerDisparity {
  std::size_t layer_index = 0;
  std::vector<std::optional<double>> values;
};

struct MetricRecord {
  SnapshotMeta meta;
  std::vector<std::size_t> topology;  // neuron count per neuron layer
  std::vector<LayerLinkStats> link_stats;       // one per parameter block
  std::vector<StrengthVector> strengths;        // one per neuron layer
  std::vector<LayerFluctuation> fluctuations;   // one per neuron layer
  std::optional<std::vector<LayerDisparity>> disparities;
  std::vector<std::vector<double>> link_weights;  // raw weights per block, for pooling
};

/// How conv kernel entries enter the link-weight moments.
enum class ConvLinkMode {
  realized_edges,  // each entry weighted by the number of graph edges it realizes
  unique_weights,  // each entry counted once
};

inline constexpr double kDisparityEpsilon = 1e-12;

struct AnalyzeOptions {
  bool disparity = false;
  double disparity_epsilon = kDisparityEpsilon;
  ConvLinkMode conv_link_mode = ConvLinkMode::realized_edges;
  bool keep_link_weights = true;
};

inline LayerLinkStats link_weight_stats(const LayerWeights& layer, std::size_t layer_index = 0,
                                        ConvLinkMode mode = ConvLinkMode::realized_edges) {
  LayerLinkStats out{layer_index, 0.0, 0.0};
  const auto* conv = std::get_if<Conv2D>(&layer);
  if (!conv || mode == ConvLinkMode::unique_weights) {
    const auto& w = weight_values(layer);
    out.mu = mean(w);
    out.delta = population_variance(w, out.mu);
    return out;
  }
  const auto g = geometry(*conv);
  const auto rows = offset_multiplicity(g.rows);
  const auto cols = offset_multiplicity(g.cols);
  const auto& k = conv->kernel;
  CompensatedSum total, weighted;
  for (std::size_t h = 0; h < k.kh(); ++h) {
    for (std::size_t w = 0; w < k.kw(); ++w) {
      const double m = static_cast<double>(rows[h] * cols[w]);
      for (std::size_t ci = 0; ci < k.c_in(); ++ci) {
        for (std::size_t co = 0; co < k.c_out(); ++co) {
          total.add(m);
          weighted.add(m * k(h, w, ci, co));
        }
      }
    }
  }
  out.mu = weighted.value() / total.value();
  CompensatedSum sq;
  for (std::size_t h = 0; h < k.kh(); ++h) {
    for (std::size_t w = 0; w < k.kw(); ++w) {
      const double m = static_cast<double>(rows[h] * cols[w]);
      for (std::size_t ci = 0; ci < k.c_in(); ++ci) {
        for (std::size_t co = 0; co < k.c_out(); ++co) {
          const double d = k(h, w, ci, co) - out.mu;
          sq.add(m * d * d);
        }
      }
    }
  }
  out.delta = sq.value() / total.value();
  return out;
}

/// Strength of neuron k sitting between `prev` (may be null: network input)
/// and `next` (may be null: network output).
inline NodeStrength node_strength_dense(const Dense* prev, const Dense* next, std::size_t k) {
  if (!prev && !next) throw std::invalid_argument("node_strength_dense: no adjacent layer");
  if (prev && next && prev->weights.cols() != next->weights.rows()) {
    throw std::invalid_argument("node_strength_dense: layers are not shape-compatible");
  }
  const std::size_t count = prev ? prev->weights.cols() : next->weights.rows();
  if (k >= count) {
    throw std::out_of_range("node_strength_dense: neuron " + std::to_string(k) + " out of range [0," +
                            std::to_string(count) + ")");
  }
  NodeStrength out;
  if (prev) {
    for (std::size_t i = 0; i < prev->weights.rows(); ++i) out.s_in += prev->weights(i, k);
  }
  if (next) {
    for (double w : next->weights.row(k)) out.s_out += w;
  }
  out.s = out.s_in + out.s_out;
  return out;
}

/// In-strength of every output neuron of a block.
inline std::vector<double> in_strengths(const LayerWeights& layer) {
  if (const auto* d = std::get_if<Dense>(&layer)) {
    std::vector<double> s(d->weights.cols(), 0.0);
    for (std::size_t i = 0; i < d->weights.rows(); ++i) {
      const auto row = d->weights.row(i);
      for (std::size_t j = 0; j < row.size(); ++j) s[j] += row[j];
    }
    return s;
  }
  return conv_in_strengths(std::get<Conv2D>(layer));
}

/// Out-strength of every input neuron of a block.
inline std::vector<double> out_strengths(const LayerWeights& layer) {
  if (const auto* d = std::get_if<Dense>(&layer)) {
    std::vector<double> s(d->weights.rows(), 0.0);
    for (std::size_t i = 0; i < d->weights.rows(); ++i) {
      for (double w : d->weights.row(i)) s[i] += w;
    }
    return s;
  }
  return conv_out_strengths(std::get<Conv2D>(layer));
}

inline std::vector<StrengthVector> strengths_for_snapshot(const NetworkSnapshot& s) {
  const std::size_t blocks = s.block_count();
  std::vector<StrengthVector> out(blocks + 1);
  for (std::size_t k = 0; k <= blocks; ++k) {
    auto& sv = out[k];
    sv.layer_index = k;
    const std::size_t n = s.layer_size(k);
    sv.s_in = k > 0 ? in_strengths(s.layers[k - 1]) : std::vector<double>(n, 0.0);
    sv.s_out = k < blocks ? out_strengths(s.layers[k]) : std::vector<double>(n, 0.0);
    sv.s.resize(n);
    for (std::size_t i = 0; i < n; ++i) sv.s[i] = sv.s_in[i] + sv.s_out[i];
  }
  return out;
}

/// Population standard deviation of the strengths of one layer.
inline double layer_fluctuation(std::span<const double> strengths) {
  if (strengths.empty()) throw std::invalid_argument("layer_fluctuation: empty strength vector");
  // A rounded mean of equal values can differ from them; constant layers are exactly 0.
  const auto [lo, hi] = std::minmax_element(strengths.begin(), strengths.end());
  if (*lo == *hi) return 0.0;
  return std::sqrt(population_variance(strengths));
}

inline double layer_fluctuation(const StrengthVector& sv) { return layer_fluctuation(sv.s); }

/// Sum of squared weight shares; nullopt when |sum of weights| < epsilon.
inline std::optional<double> node_disparity(std::span<const double> incident, double epsilon = kDisparityEpsilon) {
  if (incident.empty()) throw std::invalid_argument("node_disparity: empty weight vector");
  const double s = compensated_sum(incident);
  if (!(std::abs(s) >= epsilon)) return std::nullopt;
  CompensatedSum y;
  for (double w : incident) {
    const double share = w / s;
    y.add(share * share);
  }
  return y.value();
}

/// Disparity of every output neuron of a block over its incoming weights.
inline std::vector<std::optional<double>> in_disparities(const LayerWeights& layer, double epsilon) {
  std::vector<std::optional<double>> out;
  if (const auto* d = std::get_if<Dense>(&layer)) {
    std::vector<double> column(d->weights.rows());
    out.reserve(d->weights.cols());
    for (std::size_t j = 0; j < d->weights.cols(); ++j) {
      for (std::size_t i = 0; i < column.size(); ++i) column[i] = d->weights(i, j);
      out.push_back(node_disparity(column, epsilon));
    }
    return out;
  }
  // Same receptive-field classes as the in-strengths: Y = (sum w^2) / (sum w)^2.
  const auto& conv = std::get<Conv2D>(layer);
  const auto sums = conv_in_strengths(conv);
  const auto squares = conv_in_square_sums(conv);
  out.reserve(sums.size());
  for (std::size_t i = 0; i < sums.size(); ++i) {
    if (!(std::abs(sums[i]) >= epsilon)) {
      out.emplace_back(std::nullopt);
    } else {
      out.emplace_back(squares[i] / (sums[i] * sums[i]));
    }
  }
  return out;
}

inline std::vector<std::size_t> topology(const NetworkSnapshot& s) {
  std::vector<std::size_t> t(s.neuron_layer_count());
  for (std::size_t k = 0; k < t.size(); ++k) t[k] = s.layer_size(k);
  return t;
}

inline MetricRecord analyze_snapshot(const NetworkSnapshot& s, const AnalyzeOptions& opts = {}) {
  validate(s);
  MetricRecord r;
  r.meta = s.meta;
  r.topology = topology(s);
  for (std::size_t b = 0; b < s.block_count(); ++b) {
    r.link_stats.push_back(link_weight_stats(s.layers[b], b, opts.conv_link_mode));
    if (opts.keep_link_weights) r.link_weights.push_back(weight_values(s.layers[b]));
  }
  r.strengths = strengths_for_snapshot(s);
  for (const auto& sv : r.strengths) r.fluctuations.push_back({sv.layer_index, layer_fluctuation(sv)});
  if (opts.disparity) {
    std::vector<LayerDisparity> d;
    d.push_back({0, std::vector<std::optional<double>>(r.topology[0])});  // input layer has no incoming edges
    for (std::size_t b = 0; b < s.block_count(); ++b) {
      d.push_back({b + 1, in_disparities(s.layers[b], opts.disparity_epsilon)});
    }
    r.disparities = std::move(d);
  }
  return r;
}

}  // namespace cnt
