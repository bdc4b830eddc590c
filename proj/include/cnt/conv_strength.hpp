// SPDX-License-Identifier: Apache-2.0
#pragma once

// Closed-form node strengths for a 2-D convolution seen as a bipartite graph.
//
// Every kernel entry (kh, kw, c_in, c_out) realizes one edge per output cell
// whose receptive field keeps that offset inside the unpadded input. Along each
// spatial axis the set of usable kernel offsets depends only on the position,
// and interior positions all share the same set. Positions are therefore
// grouped into boundary classes per axis, each (row class, column class,
// channel) triple is summed once over its offsets, and the value is broadcast
// to every cell of the class. Work is O(#classes * kernel volume) plus one
// write per neuron.

#include <cstddef>
#include <map>
#include <vector>

#include "cnt/snapshot.hpp"

namespace cnt {

/// Positions along one axis grouped by their set of usable kernel offsets.
struct AxisClasses {
  std::vector<std::vector<std::size_t>> offsets;  // class id -> usable kernel offsets
  std::vector<std::size_t> class_of;              // position -> class id
};

namespace detail {

template <typename UsableFn>
AxisClasses classify(std::size_t positions, std::size_t kernel, UsableFn&& usable) {
  AxisClasses out;
  out.class_of.resize(positions);
  std::map<std::vector<std::size_t>, std::size_t> seen;
  std::vector<std::size_t> key;
  for (std::size_t p = 0; p < positions; ++p) {
    key.clear();
    for (std::size_t k = 0; k < kernel; ++k) {
      if (usable(p, k)) key.push_back(k);
    }
    auto [it, inserted] = seen.try_emplace(key, out.offsets.size());
    if (inserted) out.offsets.push_back(key);
    out.class_of[p] = it->second;
  }
  return out;
}

}  // namespace detail

/// Output positions grouped by the kernel offsets that land inside the input.
inline AxisClasses output_axis_classes(const AxisGeometry& a) {
  return detail::classify(a.out, a.kernel, [&](std::size_t y, std::size_t k) {
    const std::size_t padded = y * a.stride + k;  // coordinate in the padded input
    return padded >= a.pad_before && padded - a.pad_before < a.in;
  });
}

/// Input positions grouped by the kernel offsets that reach a valid output position.
inline AxisClasses input_axis_classes(const AxisGeometry& a) {
  return detail::classify(a.in, a.kernel, [&](std::size_t r, std::size_t k) {
    const std::size_t padded = r + a.pad_before;
    if (padded < k) return false;
    const std::size_t t = padded - k;
    return t % a.stride == 0 && t / a.stride < a.out;
  });
}

/// Number of output positions along an axis that use each kernel offset.
inline std::vector<std::size_t> offset_multiplicity(const AxisGeometry& a) {
  const auto classes = output_axis_classes(a);
  std::vector<std::size_t> per_class(classes.offsets.size(), 0);
  for (std::size_t c : classes.class_of) ++per_class[c];
  std::vector<std::size_t> mult(a.kernel, 0);
  for (std::size_t c = 0; c < classes.offsets.size(); ++c) {
    for (std::size_t k : classes.offsets[c]) mult[k] += per_class[c];
  }
  return mult;
}

/// Per-channel kernel planes, plane[ch][kh * kw_count + kw].
using KernelPlanes = std::vector<std::vector<double>>;

/// Sums each plane over every (row class, column class) offset set and
/// broadcasts into a channel-major map of shape (rows.size, cols.size, planes).
inline std::vector<double> broadcast_class_sums(const KernelPlanes& planes, std::size_t kw_count,
                                                const AxisClasses& rows, const AxisClasses& cols) {
  const std::size_t height = rows.class_of.size();
  const std::size_t width = cols.class_of.size();
  const std::size_t nrc = rows.offsets.size();
  const std::size_t ncc = cols.offsets.size();
  std::vector<double> out(planes.size() * height * width);
  std::vector<double> table(nrc * ncc);
  for (std::size_t ch = 0; ch < planes.size(); ++ch) {
    const auto& plane = planes[ch];
    for (std::size_t rc = 0; rc < nrc; ++rc) {
      for (std::size_t cc = 0; cc < ncc; ++cc) {
        double acc = 0.0;
        for (std::size_t h : rows.offsets[rc]) {
          for (std::size_t w : cols.offsets[cc]) acc += plane[h * kw_count + w];
        }
        table[rc * ncc + cc] = acc;
      }
    }
    double* dst = out.data() + ch * height * width;
    for (std::size_t r = 0; r < height; ++r) {
      const double* row_table = table.data() + rows.class_of[r] * ncc;
      for (std::size_t c = 0; c < width; ++c) dst[r * width + c] = row_table[cols.class_of[c]];
    }
  }
  return out;
}

enum class KernelReduce { plain, squared };

/// Collapses the kernel over c_in (output-side planes, one per c_out).
inline KernelPlanes planes_by_output_channel(const Kernel4& k, KernelReduce mode = KernelReduce::plain) {
  KernelPlanes planes(k.c_out(), std::vector<double>(k.kh() * k.kw(), 0.0));
  for (std::size_t h = 0; h < k.kh(); ++h) {
    for (std::size_t w = 0; w < k.kw(); ++w) {
      for (std::size_t ci = 0; ci < k.c_in(); ++ci) {
        for (std::size_t co = 0; co < k.c_out(); ++co) {
          const double v = k(h, w, ci, co);
          planes[co][h * k.kw() + w] += mode == KernelReduce::plain ? v : v * v;
        }
      }
    }
  }
  return planes;
}

/// Collapses the kernel over c_out (input-side planes, one per c_in).
inline KernelPlanes planes_by_input_channel(const Kernel4& k) {
  KernelPlanes planes(k.c_in(), std::vector<double>(k.kh() * k.kw(), 0.0));
  for (std::size_t h = 0; h < k.kh(); ++h) {
    for (std::size_t w = 0; w < k.kw(); ++w) {
      for (std::size_t ci = 0; ci < k.c_in(); ++ci) {
        for (std::size_t co = 0; co < k.c_out(); ++co) planes[ci][h * k.kw() + w] += k(h, w, ci, co);
      }
    }
  }
  return planes;
}

/// In-strength of every output neuron, channel-major over (c_out, h_out, w_out).
inline std::vector<double> conv_in_strengths(const Conv2D& conv) {
  const auto g = geometry(conv);
  return broadcast_class_sums(planes_by_output_channel(conv.kernel), conv.kernel.kw(),
                              output_axis_classes(g.rows), output_axis_classes(g.cols));
}

/// Sum of squared incoming weights of every output neuron.
inline std::vector<double> conv_in_square_sums(const Conv2D& conv) {
  const auto g = geometry(conv);
  return broadcast_class_sums(planes_by_output_channel(conv.kernel, KernelReduce::squared), conv.kernel.kw(),
                              output_axis_classes(g.rows), output_axis_classes(g.cols));
}

/// Out-strength of every input neuron, channel-major over (c_in, h, w).
inline std::vector<double> conv_out_strengths(const Conv2D& conv) {
  const auto g = geometry(conv);
  return broadcast_class_sums(planes_by_input_channel(conv.kernel), conv.kernel.kw(),
                              input_axis_classes(g.rows), input_axis_classes(g.cols));
}

enum class ConvRole { as_input_layer, as_output_layer };

/// as_input_layer: out-strengths of the conv's input neurons.
/// as_output_layer: in-strengths of its output neurons.
inline std::vector<double> node_strength_conv(const Conv2D& conv, ConvRole role) {
  return role == ConvRole::as_input_layer ? conv_out_strengths(conv) : conv_in_strengths(conv);
}

}  // namespace cnt
