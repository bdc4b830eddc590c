// SPDX-License-Identifier: Apache-2.0
#pragma once

// Network-as-graph data model.
//
// A snapshot is an ordered chain of parameter blocks. Block l connects neuron
// layer l to neuron layer l+1, so a snapshot with L blocks has L+1 neuron
// layers. Conv neurons are activation-map cells, flattened channel-major:
//   flat = (channel * height + row) * width + col.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "cnt/errors.hpp"
#include "cnt/tensor.hpp"

namespace cnt {

enum class Padding { valid, same };
enum class InitFamily { normal, uniform };
enum class OutputActivation { softmax, linear };
enum class Side { input, output };

inline const char* to_string(Padding p) { return p == Padding::valid ? "valid" : "same"; }
inline const char* to_string(InitFamily f) { return f == InitFamily::normal ? "normal" : "uniform"; }
inline const char* to_string(OutputActivation a) {
  return a == OutputActivation::softmax ? "softmax" : "linear";
}

struct Dims3 {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;

  std::size_t count() const noexcept { return height * width * channels; }
  friend bool operator==(const Dims3&, const Dims3&) = default;
};

struct Stride2 {
  std::size_t rows = 1;
  std::size_t cols = 1;
  friend bool operator==(const Stride2&, const Stride2&) = default;
};

struct Dense {
  Matrix weights;  // rows = inputs, cols = outputs
  std::vector<double> bias;

  friend bool operator==(const Dense&, const Dense&) = default;
};

struct Conv2D {
  Kernel4 kernel;  // (kh, kw, c_in, c_out)
  std::vector<double> bias;
  Stride2 stride;
  Padding padding = Padding::valid;
  Dims3 input_dims;

  friend bool operator==(const Conv2D&, const Conv2D&) = default;
};

using LayerWeights = std::variant<Dense, Conv2D>;

/// Resolved geometry along one spatial axis.
struct AxisGeometry {
  std::size_t in = 0;
  std::size_t kernel = 0;
  std::size_t stride = 1;
  std::size_t pad_before = 0;
  std::size_t pad_after = 0;
  std::size_t out = 0;
};

inline AxisGeometry resolve_axis(std::size_t in, std::size_t kernel, std::size_t stride, Padding padding) {
  AxisGeometry g{in, kernel, stride, 0, 0, 0};
  if (stride == 0 || kernel == 0 || in == 0) return g;
  if (padding == Padding::valid) {
    g.out = kernel <= in ? (in - kernel) / stride + 1 : 0;
    return g;
  }
  g.out = (in + stride - 1) / stride;
  const std::size_t span = (g.out - 1) * stride + kernel;
  const std::size_t total = span > in ? span - in : 0;
  g.pad_before = total / 2;
  g.pad_after = total - g.pad_before;
  return g;
}

struct ConvGeometry {
  AxisGeometry rows;
  AxisGeometry cols;
  std::size_t c_in = 0;
  std::size_t c_out = 0;

  Dims3 input() const noexcept { return {rows.in, cols.in, c_in}; }
  Dims3 output() const noexcept { return {rows.out, cols.out, c_out}; }
};

inline ConvGeometry geometry(const Conv2D& conv) {
  return {resolve_axis(conv.input_dims.height, conv.kernel.kh(), conv.stride.rows, conv.padding),
          resolve_axis(conv.input_dims.width, conv.kernel.kw(), conv.stride.cols, conv.padding),
          conv.kernel.c_in(), conv.kernel.c_out()};
}

inline std::size_t flat_index(const Dims3& d, std::size_t channel, std::size_t row, std::size_t col) {
  return (channel * d.height + row) * d.width + col;
}

struct CellCoord {
  std::size_t channel = 0;
  std::size_t row = 0;
  std::size_t col = 0;
  friend bool operator==(const CellCoord&, const CellCoord&) = default;
};

inline CellCoord cell_coord(const Dims3& d, std::size_t flat) {
  const std::size_t plane = d.height * d.width;
  return {flat / plane, (flat % plane) / d.width, flat % d.width};
}

/// A vertex of the network graph.
struct NeuronId {
  std::size_t layer_index = 0;
  std::size_t flat_index = 0;
  friend auto operator<=>(const NeuronId&, const NeuronId&) = default;
};

inline std::size_t neuron_count(const LayerWeights& layer, Side side) {
  if (const auto* d = std::get_if<Dense>(&layer)) {
    return side == Side::input ? d->weights.rows() : d->weights.cols();
  }
  const auto& c = std::get<Conv2D>(layer);
  return side == Side::input ? c.input_dims.count() : geometry(c).output().count();
}

struct SnapshotMeta {
  double accuracy = 0.0;
  std::uint64_t epoch = 0;
  InitFamily init_family = InitFamily::normal;
  double init_scale = 0.05;
  std::uint64_t seed = 0;
  std::string task_tag;
  OutputActivation output_activation = OutputActivation::softmax;

  friend bool operator==(const SnapshotMeta&, const SnapshotMeta&) = default;
};

struct NetworkSnapshot {
  std::vector<LayerWeights> layers;
  SnapshotMeta meta;

  std::size_t block_count() const noexcept { return layers.size(); }
  std::size_t neuron_layer_count() const noexcept { return layers.size() + 1; }

  /// Neuron count of neuron layer `k` (0 = network input, block_count() = network output).
  std::size_t layer_size(std::size_t k) const {
    return k < layers.size() ? neuron_count(layers[k], Side::input)
                             : neuron_count(layers.back(), Side::output);
  }

  friend bool operator==(const NetworkSnapshot&, const NetworkSnapshot&) = default;
};

namespace detail {

inline bool all_finite(const std::vector<double>& v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

}  // namespace detail

inline void validate(const LayerWeights& layer, std::size_t index) {
  const std::string where = "layer " + std::to_string(index) + ": ";
  if (const auto* d = std::get_if<Dense>(&layer)) {
    if (d->weights.rows() == 0 || d->weights.cols() == 0) {
      throw ValidationError(where + "dense weight matrix is empty");
    }
    if (d->weights.size() != d->weights.rows() * d->weights.cols()) {
      throw ValidationError(where + "dense weight matrix is not rectangular");
    }
    if (d->bias.size() != d->weights.cols()) {
      throw ValidationError(where + "bias length " + std::to_string(d->bias.size()) +
                            " != output count " + std::to_string(d->weights.cols()));
    }
    if (!detail::all_finite(d->weights.values()) || !detail::all_finite(d->bias)) {
      throw ValidationError(where + "non-finite value in dense weights or bias");
    }
    return;
  }
  const auto& c = std::get<Conv2D>(layer);
  const auto& k = c.kernel;
  if (k.kh() == 0 || k.kw() == 0 || k.c_in() == 0 || k.c_out() == 0) {
    throw ValidationError(where + "conv kernel has a zero dimension");
  }
  if (k.size() != k.kh() * k.kw() * k.c_in() * k.c_out()) {
    throw ValidationError(where + "conv kernel payload does not match its shape");
  }
  if (c.stride.rows == 0 || c.stride.cols == 0) {
    throw ValidationError(where + "conv stride must be >= 1");
  }
  if (c.input_dims.channels != k.c_in()) {
    throw ValidationError(where + "input channels " + std::to_string(c.input_dims.channels) +
                          " != kernel c_in " + std::to_string(k.c_in()));
  }
  if (c.input_dims.height == 0 || c.input_dims.width == 0) {
    throw ValidationError(where + "conv input spatial dims must be >= 1");
  }
  const auto g = geometry(c);
  if (g.rows.kernel > g.rows.in + g.rows.pad_before + g.rows.pad_after ||
      g.cols.kernel > g.cols.in + g.cols.pad_before + g.cols.pad_after) {
    throw ValidationError(where + "kernel larger than padded input");
  }
  if (g.rows.out == 0 || g.cols.out == 0) {
    throw ValidationError(where + "conv output spatial dims are empty");
  }
  if (c.bias.size() != k.c_out()) {
    throw ValidationError(where + "bias length " + std::to_string(c.bias.size()) + " != c_out " +
                          std::to_string(k.c_out()));
  }
  if (!detail::all_finite(k.values()) || !detail::all_finite(c.bias)) {
    throw ValidationError(where + "non-finite value in conv kernel or bias");
  }
}

inline void validate(const SnapshotMeta& meta) {
  if (!(meta.accuracy >= 0.0 && meta.accuracy <= 1.0)) {
    throw ValidationError("meta: accuracy must lie in [0,1]");
  }
  if (!(meta.init_scale > 0.0) || !std::isfinite(meta.init_scale)) {
    throw ValidationError("meta: init_scale must be positive");
  }
}

/// Throws ValidationError naming the first offending layer or layer pair.
inline void validate(const NetworkSnapshot& s) {
  if (s.layers.empty()) throw ValidationError("snapshot has no layers");
  validate(s.meta);
  for (std::size_t i = 0; i < s.layers.size(); ++i) validate(s.layers[i], i);
  for (std::size_t i = 0; i + 1 < s.layers.size(); ++i) {
    const auto out = neuron_count(s.layers[i], Side::output);
    const auto in = neuron_count(s.layers[i + 1], Side::input);
    if (out != in) {
      throw ValidationError("layers " + std::to_string(i) + "/" + std::to_string(i + 1) +
                            ": output count " + std::to_string(out) + " != input count " +
                            std::to_string(in));
    }
  }
}

/// Marks the output layer as linear; weights are untouched. Idempotent.
inline NetworkSnapshot strip_output_softmax(NetworkSnapshot s) {
  s.meta.output_activation = OutputActivation::linear;
  return s;
}

inline std::size_t parameter_count(const NetworkSnapshot& s) {
  std::size_t n = 0;
  for (const auto& layer : s.layers) {
    std::visit(
        [&](const auto& l) {
          if constexpr (std::is_same_v<std::decay_t<decltype(l)>, Dense>) {
            n += l.weights.size() + l.bias.size();
          } else {
            n += l.kernel.size() + l.bias.size();
          }
        },
        layer);
  }
  return n;
}

/// Weight values of one block, without biases (dense: row-major; conv: kernel order).
inline const std::vector<double>& weight_values(const LayerWeights& layer) {
  if (const auto* d = std::get_if<Dense>(&layer)) return d->weights.values();
  return std::get<Conv2D>(layer).kernel.values();
}

}  // namespace cnt
