// SPDX-License-Identifier: Apache-2.0
#pragma once

// Brute-force reference. Materializes each block as an explicit edge list and
// recomputes every metric by direct summation over edges. Deliberately naive:
// no weight-sharing shortcuts and no shared code with the fast paths beyond
// the geometry definitions of the data model.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "cnt/errors.hpp"
#include "cnt/numeric.hpp"
#include "cnt/snapshot.hpp"

namespace cnt::oracle {

inline constexpr std::size_t kDefaultEdgeCap = 10'000'000;

struct Edge {
  NeuronId from;
  NeuronId to;
  double weight = 0.0;
  friend bool operator==(const Edge&, const Edge&) = default;
};

struct EdgeList {
  std::size_t layer_index = 0;  // index of the source neuron layer
  std::size_t from_count = 0;
  std::size_t to_count = 0;
  std::vector<Edge> edges;
};

/// Edge count of a block, by enumerating output cells and in-bounds offsets.
inline std::size_t edge_count(const LayerWeights& layer) {
  if (const auto* d = std::get_if<Dense>(&layer)) return d->weights.rows() * d->weights.cols();
  const auto& c = std::get<Conv2D>(layer);
  const auto g = geometry(c);
  std::size_t rows = 0;
  for (std::size_t y = 0; y < g.rows.out; ++y) {
    for (std::size_t kh = 0; kh < g.rows.kernel; ++kh) {
      const long r = static_cast<long>(y * g.rows.stride + kh) - static_cast<long>(g.rows.pad_before);
      if (r >= 0 && r < static_cast<long>(g.rows.in)) ++rows;
    }
  }
  std::size_t cols = 0;
  for (std::size_t x = 0; x < g.cols.out; ++x) {
    for (std::size_t kw = 0; kw < g.cols.kernel; ++kw) {
      const long col = static_cast<long>(x * g.cols.stride + kw) - static_cast<long>(g.cols.pad_before);
      if (col >= 0 && col < static_cast<long>(g.cols.in)) ++cols;
    }
  }
  return rows * cols * g.c_in * g.c_out;
}

inline EdgeList unroll_layer(const LayerWeights& layer, std::size_t layer_index = 0,
                             std::size_t cap = kDefaultEdgeCap) {
  const std::size_t count = edge_count(layer);
  if (count > cap) {
    throw SizeError("layer " + std::to_string(layer_index) + " unrolls to " + std::to_string(count) + " edges",
                    count, cap);
  }
  EdgeList out;
  out.layer_index = layer_index;
  out.from_count = neuron_count(layer, Side::input);
  out.to_count = neuron_count(layer, Side::output);
  out.edges.reserve(count);
  const std::size_t next = layer_index + 1;

  if (const auto* d = std::get_if<Dense>(&layer)) {
    for (std::size_t i = 0; i < d->weights.rows(); ++i) {
      for (std::size_t j = 0; j < d->weights.cols(); ++j) {
        out.edges.push_back({{layer_index, i}, {next, j}, d->weights(i, j)});
      }
    }
    return out;
  }

  const auto& c = std::get<Conv2D>(layer);
  const auto g = geometry(c);
  const Dims3 in = g.input();
  const Dims3 outd = g.output();
  for (std::size_t co = 0; co < g.c_out; ++co) {
    for (std::size_t y = 0; y < g.rows.out; ++y) {
      for (std::size_t x = 0; x < g.cols.out; ++x) {
        const std::size_t to = flat_index(outd, co, y, x);
        for (std::size_t kh = 0; kh < g.rows.kernel; ++kh) {
          const long r = static_cast<long>(y * g.rows.stride + kh) - static_cast<long>(g.rows.pad_before);
          if (r < 0 || r >= static_cast<long>(g.rows.in)) continue;  // padding cell: no edge
          for (std::size_t kw = 0; kw < g.cols.kernel; ++kw) {
            const long col = static_cast<long>(x * g.cols.stride + kw) - static_cast<long>(g.cols.pad_before);
            if (col < 0 || col >= static_cast<long>(g.cols.in)) continue;
            for (std::size_t ci = 0; ci < g.c_in; ++ci) {
              const std::size_t from =
                  flat_index(in, ci, static_cast<std::size_t>(r), static_cast<std::size_t>(col));
              out.edges.push_back({{layer_index, from}, {next, to}, c.kernel(kh, kw, ci, co)});
            }
          }
        }
      }
    }
  }
  return out;
}

struct LayerMetrics {
  double mu = 0.0;
  double delta = 0.0;
  std::vector<double> s_out;  // per source neuron
  std::vector<double> s_in;   // per target neuron
  double fluctuation_out = 0.0;  // population std of s_out
  double fluctuation_in = 0.0;   // population std of s_in
};

inline double naive_population_std(const std::vector<double>& v) {
  double sum = 0.0;
  for (double x : v) sum += x;
  const double m = sum / static_cast<double>(v.size());
  double sq = 0.0;
  for (double x : v) sq += (x - m) * (x - m);
  return std::sqrt(sq / static_cast<double>(v.size()));
}

inline LayerMetrics oracle_metrics(const EdgeList& list) {
  if (list.edges.empty()) throw std::invalid_argument("oracle_metrics: empty edge list");
  LayerMetrics m;
  m.s_out.assign(list.from_count, 0.0);
  m.s_in.assign(list.to_count, 0.0);
  double sum = 0.0;
  for (const auto& e : list.edges) {
    sum += e.weight;
    if (e.from.flat_index >= m.s_out.size()) m.s_out.resize(e.from.flat_index + 1, 0.0);
    if (e.to.flat_index >= m.s_in.size()) m.s_in.resize(e.to.flat_index + 1, 0.0);
    m.s_out[e.from.flat_index] += e.weight;
    m.s_in[e.to.flat_index] += e.weight;
  }
  const double n = static_cast<double>(list.edges.size());
  m.mu = sum / n;
  double sq = 0.0;
  for (const auto& e : list.edges) sq += (e.weight - m.mu) * (e.weight - m.mu);
  m.delta = sq / n;
  m.fluctuation_out = naive_population_std(m.s_out);
  m.fluctuation_in = naive_population_std(m.s_in);
  return m;
}

/// Whole-snapshot reference metrics.
struct SnapshotMetrics {
  std::vector<double> mu, delta;  // per block
  std::vector<std::vector<double>> s_in, s_out, s;  // per neuron layer
  std::vector<double> fluctuation;  // per neuron layer
};

inline SnapshotMetrics oracle_analyze(const NetworkSnapshot& snap, std::size_t cap = kDefaultEdgeCap) {
  SnapshotMetrics out;
  const std::size_t layers = snap.neuron_layer_count();
  out.s_in.resize(layers);
  out.s_out.resize(layers);
  for (std::size_t k = 0; k < layers; ++k) {
    out.s_in[k].assign(snap.layer_size(k), 0.0);
    out.s_out[k].assign(snap.layer_size(k), 0.0);
  }
  for (std::size_t b = 0; b < snap.block_count(); ++b) {
    const auto m = oracle_metrics(unroll_layer(snap.layers[b], b, cap));
    out.mu.push_back(m.mu);
    out.delta.push_back(m.delta);
    out.s_out[b] = m.s_out;
    out.s_in[b + 1] = m.s_in;
  }
  for (std::size_t k = 0; k < layers; ++k) {
    std::vector<double> total(out.s_in[k].size());
    for (std::size_t i = 0; i < total.size(); ++i) total[i] = out.s_in[k][i] + out.s_out[k][i];
    out.fluctuation.push_back(naive_population_std(total));
    out.s.push_back(std::move(total));
  }
  return out;
}

enum class ExportFormat { csv, graphml };

namespace detail {

inline std::string repr(double v) { return shortest_repr(v); }

}  // namespace detail

/// CSV columns: from_layer,from_index,to_index,weight. GraphML: weighted digraph.
inline std::string export_edge_list(const EdgeList& list, ExportFormat format) {
  std::ostringstream os;
  if (format == ExportFormat::csv) {
    os << "from_layer,from_index,to_index,weight\n";
    for (const auto& e : list.edges) {
      os << e.from.layer_index << ',' << e.from.flat_index << ',' << e.to.flat_index << ','
         << detail::repr(e.weight) << '\n';
    }
    return os.str();
  }
  const std::size_t src = list.layer_index;
  const std::size_t dst = list.layer_index + 1;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
     << "<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\">\n"
     << "  <key id=\"weight\" for=\"edge\" attr.name=\"weight\" attr.type=\"double\"/>\n"
     << "  <key id=\"layer\" for=\"node\" attr.name=\"layer\" attr.type=\"int\"/>\n"
     << "  <graph id=\"layer" << src << "\" edgedefault=\"directed\">\n";
  auto node = [&](std::size_t layer, std::size_t i) {
    os << "    <node id=\"n" << layer << '_' << i << "\"><data key=\"layer\">" << layer << "</data></node>\n";
  };
  for (std::size_t i = 0; i < list.from_count; ++i) node(src, i);
  for (std::size_t i = 0; i < list.to_count; ++i) node(dst, i);
  std::size_t id = 0;
  for (const auto& e : list.edges) {
    os << "    <edge id=\"e" << id++ << "\" source=\"n" << e.from.layer_index << '_' << e.from.flat_index
       << "\" target=\"n" << e.to.layer_index << '_' << e.to.flat_index << "\"><data key=\"weight\">"
       << detail::repr(e.weight) << "</data></edge>\n";
  }
  os << "  </graph>\n</graphml>\n";
  return os.str();
}

/// Parses the CSV form written by export_edge_list.
inline EdgeList parse_edge_list_csv(std::string_view text) {
  EdgeList out;
  std::istringstream is{std::string(text)};
  std::string line;
  if (!std::getline(is, line) || line != "from_layer,from_index,to_index,weight") {
    throw FormatError("edge list CSV: missing header");
  }
  bool first = true;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    Edge e;
    std::size_t fields[3];
    const char* p = line.data();
    const char* end = line.data() + line.size();
    for (auto& f : fields) {
      auto res = std::from_chars(p, end, f);
      if (res.ec != std::errc() || res.ptr == end || *res.ptr != ',') throw FormatError("edge list CSV: bad row");
      p = res.ptr + 1;
    }
    auto res = std::from_chars(p, end, e.weight);
    if (res.ec != std::errc() || res.ptr != end) throw FormatError("edge list CSV: bad weight");
    e.from = {fields[0], fields[1]};
    e.to = {fields[0] + 1, fields[2]};
    if (first) {
      out.layer_index = fields[0];
      first = false;
    }
    out.from_count = std::max(out.from_count, fields[1] + 1);
    out.to_count = std::max(out.to_count, fields[2] + 1);
    out.edges.push_back(e);
  }
  return out;
}

}  // namespace cnt::oracle
