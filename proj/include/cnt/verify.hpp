// SPDX-License-Identifier: Apache-2.0
#pragma once

// Fast-path metrics against the edge-list oracle, per block (mu, delta) and
// per neuron layer (s_in, s_out, s, fluctuation).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "cnt/metrics.hpp"
#include "cnt/oracle.hpp"

namespace cnt {

inline constexpr double kDenseOracleTolerance = 1e-12;
inline constexpr double kConvOracleTolerance = 1e-9;

inline double oracle_tolerance(const LayerWeights& layer) {
  return std::holds_alternative<Conv2D>(layer) ? kConvOracleTolerance : kDenseOracleTolerance;
}

struct Deviation {
  std::string scope;  // "block 2" or "layer 3"
  double max_abs = 0.0;
  double tolerance = 0.0;
  bool ok() const { return max_abs <= tolerance; }
};

struct OracleComparison {
  std::vector<std::size_t> edges;  // per block
  std::vector<Deviation> deviations;
  double max_abs = 0.0;
  bool ok() const {
    return std::all_of(deviations.begin(), deviations.end(), [](const Deviation& d) { return d.ok(); });
  }
};

namespace detail {

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return INFINITY;
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace detail

/// Raises SizeError when any block unrolls to more than `cap` edges.
inline OracleComparison compare_with_oracle(const NetworkSnapshot& s, std::size_t cap = oracle::kDefaultEdgeCap) {
  validate(s);
  for (const auto& layer : s.layers) {
    const auto n = oracle::edge_count(layer);
    if (n > cap) throw SizeError("oracle edge list", n, cap);
  }
  const auto ref = oracle::oracle_analyze(s, cap);
  AnalyzeOptions opts;
  opts.keep_link_weights = false;
  const auto fast = analyze_snapshot(s, opts);

  OracleComparison out;
  for (std::size_t b = 0; b < s.block_count(); ++b) {
    out.edges.push_back(oracle::edge_count(s.layers[b]));
    const double d = std::max(std::abs(fast.link_stats[b].mu - ref.mu[b]), std::abs(fast.link_stats[b].delta - ref.delta[b]));
    out.deviations.push_back({"block " + std::to_string(b), d, oracle_tolerance(s.layers[b])});
  }
  for (std::size_t k = 0; k < s.neuron_layer_count(); ++k) {
    double tol = kDenseOracleTolerance;
    if (k > 0) tol = std::max(tol, oracle_tolerance(s.layers[k - 1]));
    if (k < s.block_count()) tol = std::max(tol, oracle_tolerance(s.layers[k]));
    const auto& sv = fast.strengths[k];
    double d = std::max({detail::max_abs_diff(sv.s_in, ref.s_in[k]), detail::max_abs_diff(sv.s_out, ref.s_out[k]),
                         detail::max_abs_diff(sv.s, ref.s[k])});
    d = std::max(d, std::abs(fast.fluctuations[k].value - ref.fluctuation[k]));
    out.deviations.push_back({"layer " + std::to_string(k), d, tol});
  }
  for (const auto& d : out.deviations) out.max_abs = std::max(out.max_abs, d.max_abs);
  return out;
}

}  // namespace cnt
