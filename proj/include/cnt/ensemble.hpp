// SPDX-License-Identifier: Apache-2.0
#pragma once

// Ensemble analysis: accuracy binning, pooled per-layer metric samples,
// histogram densities and moments. Individual analysis: fluctuation series
// over the snapshots of one network.
//
// Layer numbering in reports: link_weights are keyed by parameter block
// (0 .. L-1); strength and fluctuation by the neuron layer each block feeds
// (1 .. L). The network input layer carries no incoming edges and is left out
// of the report; it remains available in every MetricRecord.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cnt/errors.hpp"
#include "cnt/metrics.hpp"
#include "cnt/numeric.hpp"

namespace cnt {

inline constexpr std::size_t kAccuracyBinCount = 10;
inline constexpr std::size_t kDefaultMinPopulation = 50;
inline constexpr std::size_t kDefaultHistogramBins = 100;
inline constexpr double kMomentVarianceFloor = 1e-15;

enum class Metric { link_weights, strength, fluctuation };

inline const char* to_string(Metric m) {
  switch (m) {
    case Metric::link_weights: return "link_weights";
    case Metric::strength: return "strength";
    case Metric::fluctuation: return "fluctuation";
  }
  return "?";
}

inline constexpr std::array<Metric, 3> kAllMetrics{Metric::link_weights, Metric::strength, Metric::fluctuation};

inline std::array<double, kAccuracyBinCount + 1> accuracy_bin_edges() {
  std::array<double, kAccuracyBinCount + 1> e{};
  for (std::size_t i = 0; i <= kAccuracyBinCount; ++i) e[i] = static_cast<double>(i) / 10.0;
  return e;
}

/// Bin i holds [i/10, (i+1)/10); the last bin is closed at 1.0.
inline std::size_t accuracy_bin(double accuracy) {
  if (!(accuracy >= 0.0 && accuracy <= 1.0)) {
    throw std::invalid_argument("accuracy " + std::to_string(accuracy) + " outside [0,1]");
  }
  const auto edges = accuracy_bin_edges();
  std::size_t bin = 0;
  while (bin + 1 < kAccuracyBinCount && accuracy >= edges[bin + 1]) ++bin;
  return bin;
}

struct AccuracyBins {
  std::array<double, kAccuracyBinCount + 1> edges = accuracy_bin_edges();
  std::array<std::vector<MetricRecord>, kAccuracyBinCount> bins;

  std::array<std::size_t, kAccuracyBinCount> counts() const {
    std::array<std::size_t, kAccuracyBinCount> c{};
    for (std::size_t i = 0; i < kAccuracyBinCount; ++i) c[i] = bins[i].size();
    return c;
  }

  /// Occupied bins holding fewer than `min_population` records.
  std::vector<std::size_t> underpopulated(std::size_t min_population = kDefaultMinPopulation) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < kAccuracyBinCount; ++i) {
      if (!bins[i].empty() && bins[i].size() < min_population) out.push_back(i);
    }
    return out;
  }

  std::vector<std::size_t> occupied() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < kAccuracyBinCount; ++i) {
      if (!bins[i].empty()) out.push_back(i);
    }
    return out;
  }
};

inline AccuracyBins bin_by_accuracy(std::vector<MetricRecord> records) {
  AccuracyBins b;
  for (auto& r : records) b.bins[accuracy_bin(r.meta.accuracy)].push_back(std::move(r));
  return b;
}

/// Number of report layers (parameter blocks) of a record.
inline std::size_t report_layer_count(const MetricRecord& r) { return r.link_stats.size(); }

inline std::size_t first_report_layer(Metric m) { return m == Metric::link_weights ? 0 : 1; }

enum class EmptyPolicy { error, empty_vector };

namespace detail {

inline std::string record_label(const MetricRecord& r, std::size_t index) {
  return "record " + std::to_string(index) + " (seed " + std::to_string(r.meta.seed) + ", accuracy " +
         std::to_string(r.meta.accuracy) + ")";
}

inline std::size_t metric_width(const MetricRecord& r, std::size_t layer, Metric m) {
  switch (m) {
    case Metric::link_weights:
      if (layer >= r.link_weights.size()) {
        throw TopologyError("layer " + std::to_string(layer) + " has no stored link weights");
      }
      return r.link_weights[layer].size();
    case Metric::strength:
      if (layer >= r.strengths.size()) throw TopologyError("layer " + std::to_string(layer) + " out of range");
      return r.strengths[layer].s.size();
    case Metric::fluctuation:
      if (layer >= r.fluctuations.size()) throw TopologyError("layer " + std::to_string(layer) + " out of range");
      return 1;
  }
  return 0;
}

}  // namespace detail

/// Pools one metric of one layer across records. `layer` is a block index for
/// link_weights and a neuron-layer index otherwise.
inline std::vector<double> pool_layer_metric(std::span<const MetricRecord> records, std::size_t layer, Metric metric,
                                             EmptyPolicy empty = EmptyPolicy::error) {
  if (records.empty()) {
    if (empty == EmptyPolicy::error) throw std::invalid_argument("pool_layer_metric: empty bin");
    return {};
  }
  const std::size_t width = detail::metric_width(records[0], layer, metric);
  std::vector<double> out;
  out.reserve(width * records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (detail::metric_width(r, layer, metric) != width) {
      throw TopologyError("layer " + std::to_string(layer) + " " + to_string(metric) + ": " +
                          detail::record_label(records[0], 0) + " and " + detail::record_label(r, i) +
                          " have incompatible shapes");
    }
    switch (metric) {
      case Metric::link_weights:
        out.insert(out.end(), r.link_weights[layer].begin(), r.link_weights[layer].end());
        break;
      case Metric::strength:
        out.insert(out.end(), r.strengths[layer].s.begin(), r.strengths[layer].s.end());
        break;
      case Metric::fluctuation:
        out.push_back(r.fluctuations[layer].value);
        break;
    }
  }
  return out;
}

struct Histogram {
  std::vector<double> bin_edges;  // bins + 1 entries
  std::vector<double> densities;  // bins entries, sum(density * width) = 1
};

struct DistributionSummary {
  Histogram histogram;
  std::size_t n = 0;
  double mean = 0.0;
  double variance = 0.0;             // population (m2)
  std::optional<double> skewness;    // Fisher-Pearson g1; undefined for degenerate samples
  std::optional<double> kurtosis;    // excess g2
};

/// Equal-width edges over [min, max] of `samples`; a degenerate range is widened to a unit interval.
inline std::vector<double> histogram_edges(std::span<const double> samples, std::size_t bin_count) {
  if (samples.empty()) throw std::invalid_argument("histogram_edges: empty samples");
  if (bin_count == 0) throw std::invalid_argument("histogram_edges: bin_count must be positive");
  auto [lo_it, hi_it] = std::minmax_element(samples.begin(), samples.end());
  double lo = *lo_it, hi = *hi_it;
  if (!(hi > lo)) {
    lo -= 0.5;
    hi += 0.5;
  }
  std::vector<double> e(bin_count + 1);
  const double width = (hi - lo) / static_cast<double>(bin_count);
  for (std::size_t i = 0; i <= bin_count; ++i) e[i] = lo + width * static_cast<double>(i);
  e.back() = hi;
  return e;
}

/// Density-normalized histogram on fixed edges. Samples outside the edges are not counted.
inline Histogram histogram(std::span<const double> samples, std::vector<double> edges) {
  const std::size_t bins = edges.size() - 1;
  std::vector<std::size_t> counts(bins, 0);
  std::size_t inside = 0;
  const double lo = edges.front(), hi = edges.back();
  const double width = (hi - lo) / static_cast<double>(bins);
  for (double x : samples) {
    if (x < lo || x > hi) continue;
    auto i = static_cast<std::size_t>((x - lo) / width);
    if (i >= bins) i = bins - 1;
    // Respect the stored edges when rounding put x across a boundary.
    while (i > 0 && x < edges[i]) --i;
    while (i + 1 < bins && x >= edges[i + 1]) ++i;
    ++counts[i];
    ++inside;
  }
  Histogram h{std::move(edges), std::vector<double>(bins, 0.0)};
  if (inside == 0) return h;
  for (std::size_t i = 0; i < bins; ++i) {
    const double w = h.bin_edges[i + 1] - h.bin_edges[i];
    h.densities[i] = static_cast<double>(counts[i]) / (static_cast<double>(inside) * w);
  }
  return h;
}

struct Moments {
  std::size_t n = 0;
  double mean = 0.0;
  double m2 = 0.0;
  double m3 = 0.0;
  double m4 = 0.0;
};

/// Central moments with compensated accumulation.
inline Moments central_moments(std::span<const double> samples) {
  Moments m;
  m.n = samples.size();
  if (m.n == 0) return m;
  m.mean = mean(samples);
  CompensatedSum s2, s3, s4;
  for (double x : samples) {
    const double d = x - m.mean;
    const double d2 = d * d;
    s2.add(d2);
    s3.add(d2 * d);
    s4.add(d2 * d2);
  }
  const double n = static_cast<double>(m.n);
  m.m2 = s2.value() / n;
  m.m3 = s3.value() / n;
  m.m4 = s4.value() / n;
  return m;
}

inline DistributionSummary summarize_on_edges(std::span<const double> samples, std::vector<double> edges) {
  if (samples.empty()) throw std::invalid_argument("summarize: empty samples");
  DistributionSummary d;
  const auto m = central_moments(samples);
  d.n = m.n;
  d.mean = m.mean;
  d.variance = m.m2;
  if (m.m2 >= kMomentVarianceFloor) {
    d.skewness = m.m3 / std::pow(m.m2, 1.5);
    d.kurtosis = m.m4 / (m.m2 * m.m2) - 3.0;
  }
  d.histogram = histogram(samples, std::move(edges));
  return d;
}

inline DistributionSummary summarize(std::span<const double> samples, std::size_t bin_count = kDefaultHistogramBins) {
  if (samples.empty()) throw std::invalid_argument("summarize: empty samples");
  return summarize_on_edges(samples, histogram_edges(samples, bin_count));
}

/// Gaussian kernel density with Silverman's rule-of-thumb bandwidth, for plot output.
inline std::vector<double> gaussian_kde(std::span<const double> samples, std::span<const double> points) {
  if (samples.empty()) throw std::invalid_argument("gaussian_kde: empty samples");
  const double n = static_cast<double>(samples.size());
  const double sd = std::sqrt(population_variance(samples));
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  auto quantile = [&](double q) {
    const double pos = q * (n - 1);
    const auto i = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(i);
    return i + 1 < sorted.size() ? sorted[i] * (1 - frac) + sorted[i + 1] * frac : sorted[i];
  };
  const double iqr = quantile(0.75) - quantile(0.25);
  double spread = sd;
  if (iqr > 0) spread = std::min(sd, iqr / 1.34);
  if (!(spread > 0)) spread = sd > 0 ? sd : 1.0;
  const double h = 0.9 * spread * std::pow(n, -0.2);
  const double norm = 1.0 / (n * h * std::sqrt(2.0 * 3.14159265358979323846));
  std::vector<double> out(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    CompensatedSum acc;
    for (double x : samples) {
      const double z = (points[i] - x) / h;
      acc.add(std::exp(-0.5 * z * z));
    }
    out[i] = acc.value() * norm;
  }
  return out;
}

struct StatSpread {
  double min = 0.0;
  double max = 0.0;
  double mean = 0.0;
};

/// Spread of summary statistics across bootstrap resamples of the bin's records.
struct BootstrapSummary {
  std::size_t rounds = 0;
  StatSpread mean;
  StatSpread variance;
  std::optional<StatSpread> skewness;
  std::optional<StatSpread> kurtosis;
};

struct BinSummary {
  std::size_t accuracy_bin = 0;
  std::size_t records = 0;
  DistributionSummary summary;
  std::optional<BootstrapSummary> bootstrap;
};

struct LayerMetricReport {
  Metric metric = Metric::strength;
  std::size_t layer = 0;
  std::vector<double> bin_edges;  // shared by every accuracy bin
  std::vector<BinSummary> bins;
};

/// Per (layer, accuracy bin) statistics used for trend checks.
struct TrendRow {
  std::size_t layer = 0;
  std::size_t accuracy_bin = 0;
  double strength_variance = 0.0;
  std::optional<double> strength_kurtosis;
  double mean_fluctuation = 0.0;
};

struct EnsembleReport {
  std::array<std::size_t, kAccuracyBinCount> counts{};
  std::vector<std::size_t> underpopulated;
  std::size_t min_population = kDefaultMinPopulation;
  std::size_t histogram_bins = kDefaultHistogramBins;
  std::size_t bootstrap_rounds = 0;
  std::vector<LayerMetricReport> entries;
  std::vector<TrendRow> trends;

  const LayerMetricReport* find(Metric m, std::size_t layer) const {
    for (const auto& e : entries) {
      if (e.metric == m && e.layer == layer) return &e;
    }
    return nullptr;
  }
};

struct ReportOptions {
  std::size_t histogram_bins = kDefaultHistogramBins;
  std::size_t bootstrap_rounds = 0;
  std::uint64_t bootstrap_seed = 0x5eed;
  std::size_t min_population = kDefaultMinPopulation;
};

namespace detail {

inline StatSpread spread_of(const std::vector<double>& v) {
  StatSpread s;
  s.min = *std::min_element(v.begin(), v.end());
  s.max = *std::max_element(v.begin(), v.end());
  s.mean = mean(v);
  return s;
}

inline BootstrapSummary bootstrap(std::span<const MetricRecord> records, std::size_t layer, Metric metric,
                                  std::size_t rounds, std::mt19937_64& eng) {
  std::vector<double> means, variances, skews, kurts;
  std::vector<MetricRecord> resample;
  bool moments_defined = true;
  for (std::size_t r = 0; r < rounds; ++r) {
    resample.clear();
    for (std::size_t i = 0; i < records.size(); ++i) {
      // Modulo bias is negligible for populations far below 2^64.
      resample.push_back(records[eng() % records.size()]);
    }
    const auto samples = pool_layer_metric(resample, layer, metric);
    const auto m = central_moments(samples);
    means.push_back(m.mean);
    variances.push_back(m.m2);
    if (m.m2 >= kMomentVarianceFloor) {
      skews.push_back(m.m3 / std::pow(m.m2, 1.5));
      kurts.push_back(m.m4 / (m.m2 * m.m2) - 3.0);
    } else {
      moments_defined = false;
    }
  }
  BootstrapSummary b;
  b.rounds = rounds;
  b.mean = spread_of(means);
  b.variance = spread_of(variances);
  if (moments_defined) {
    b.skewness = spread_of(skews);
    b.kurtosis = spread_of(kurts);
  }
  return b;
}

// Records in a canonical order so summaries do not depend on input order.
inline std::vector<MetricRecord> canonical(std::vector<MetricRecord> v) {
  std::stable_sort(v.begin(), v.end(), [](const MetricRecord& a, const MetricRecord& b) {
    if (a.meta.seed != b.meta.seed) return a.meta.seed < b.meta.seed;
    if (a.meta.accuracy != b.meta.accuracy) return a.meta.accuracy < b.meta.accuracy;
    return a.meta.epoch < b.meta.epoch;
  });
  return v;
}

}  // namespace detail

/// Per-network summaries of one metric, for comparison against pooling.
inline std::vector<DistributionSummary> per_network_summaries(std::span<const MetricRecord> records, std::size_t layer,
                                                             Metric metric, std::size_t bin_count) {
  std::vector<DistributionSummary> out;
  for (const auto& r : records) {
    const auto samples = pool_layer_metric(std::span<const MetricRecord>(&r, 1), layer, metric);
    out.push_back(summarize(samples, bin_count));
  }
  return out;
}

inline EnsembleReport ensemble_report(const AccuracyBins& input, const ReportOptions& opts = {}) {
  const auto occupied = input.occupied();
  if (occupied.empty()) throw std::invalid_argument("ensemble_report: every accuracy bin is empty");

  AccuracyBins bins;
  for (std::size_t i = 0; i < kAccuracyBinCount; ++i) bins.bins[i] = detail::canonical(input.bins[i]);

  EnsembleReport rep;
  rep.counts = bins.counts();
  rep.min_population = opts.min_population;
  rep.underpopulated = bins.underpopulated(opts.min_population);
  rep.histogram_bins = opts.histogram_bins;
  rep.bootstrap_rounds = opts.bootstrap_rounds;

  const std::size_t layers = report_layer_count(bins.bins[occupied.front()].front());
  for (std::size_t b : occupied) {
    for (const auto& r : bins.bins[b]) {
      if (report_layer_count(r) != layers) {
        throw TopologyError("records with " + std::to_string(layers) + " and " +
                            std::to_string(report_layer_count(r)) + " layers cannot share a report");
      }
    }
  }

  std::mt19937_64 eng(opts.bootstrap_seed);
  for (Metric metric : kAllMetrics) {
    for (std::size_t i = 0; i < layers; ++i) {
      const std::size_t layer = i + first_report_layer(metric);
      std::map<std::size_t, std::vector<double>> pooled;
      std::vector<double> all;
      for (std::size_t b : occupied) {
        auto samples = pool_layer_metric(bins.bins[b], layer, metric);
        all.insert(all.end(), samples.begin(), samples.end());
        pooled.emplace(b, std::move(samples));
      }
      LayerMetricReport entry{metric, layer, histogram_edges(all, opts.histogram_bins), {}};
      for (auto& [b, samples] : pooled) {
        BinSummary bs{b, bins.bins[b].size(), summarize_on_edges(samples, entry.bin_edges), std::nullopt};
        if (opts.bootstrap_rounds > 0) {
          bs.bootstrap = detail::bootstrap(bins.bins[b], layer, metric, opts.bootstrap_rounds, eng);
        }
        entry.bins.push_back(std::move(bs));
      }
      rep.entries.push_back(std::move(entry));
    }
  }

  for (std::size_t layer = 1; layer <= layers; ++layer) {
    const auto* strength = rep.find(Metric::strength, layer);
    const auto* fluct = rep.find(Metric::fluctuation, layer);
    for (std::size_t k = 0; k < strength->bins.size(); ++k) {
      rep.trends.push_back({layer, strength->bins[k].accuracy_bin, strength->bins[k].summary.variance,
                            strength->bins[k].summary.kurtosis, fluct->bins[k].summary.mean});
    }
  }
  return rep;
}

struct FluctuationPoint {
  double accuracy = 0.0;
  std::uint64_t epoch = 0;
  double value = 0.0;
  double spread_lo = 0.0;
  double spread_hi = 0.0;
};

struct TrajectoryReport {
  std::uint64_t seed = 0;
  std::vector<std::size_t> topology;
  std::vector<std::pair<double, std::uint64_t>> snapshots;  // (accuracy, epoch), ascending accuracy
  std::vector<std::vector<FluctuationPoint>> fluctuation;   // [report layer][snapshot]
  std::vector<std::vector<DistributionSummary>> strength;   // [report layer][snapshot]
};

/// Fluctuation series of one network across its snapshots. Points are ordered
/// by accuracy (then epoch); each point's error bar spans the fluctuation
/// values of every snapshot in the same accuracy bin.
inline TrajectoryReport trajectory_report(std::vector<MetricRecord> snapshots,
                                          std::size_t bin_count = kDefaultHistogramBins) {
  if (snapshots.size() < 2) throw std::invalid_argument("trajectory_report: need at least 2 snapshots");
  const auto& first = snapshots.front();
  for (std::size_t i = 1; i < snapshots.size(); ++i) {
    const auto& r = snapshots[i];
    if (r.meta.seed != first.meta.seed || r.topology != first.topology ||
        r.meta.task_tag != first.meta.task_tag) {
      throw TopologyError("trajectory mixes network identities: " + detail::record_label(first, 0) + " vs " +
                          detail::record_label(r, i));
    }
  }
  std::stable_sort(snapshots.begin(), snapshots.end(), [](const MetricRecord& a, const MetricRecord& b) {
    if (a.meta.accuracy != b.meta.accuracy) return a.meta.accuracy < b.meta.accuracy;
    return a.meta.epoch < b.meta.epoch;
  });

  TrajectoryReport rep;
  rep.seed = first.meta.seed;
  rep.topology = snapshots.front().topology;
  for (const auto& r : snapshots) rep.snapshots.emplace_back(r.meta.accuracy, r.meta.epoch);

  const std::size_t layers = report_layer_count(snapshots.front());
  for (std::size_t layer = 1; layer <= layers; ++layer) {
    std::vector<FluctuationPoint> series;
    std::vector<DistributionSummary> pdfs;
    std::map<std::size_t, std::pair<double, double>> bin_range;
    for (const auto& r : snapshots) {
      const double y = r.fluctuations.at(layer).value;
      const auto b = accuracy_bin(r.meta.accuracy);
      auto [it, inserted] = bin_range.try_emplace(b, y, y);
      if (!inserted) {
        it->second.first = std::min(it->second.first, y);
        it->second.second = std::max(it->second.second, y);
      }
      series.push_back({r.meta.accuracy, r.meta.epoch, y, y, y});
      pdfs.push_back(summarize(r.strengths.at(layer).s, bin_count));
    }
    for (auto& p : series) {
      const auto& range = bin_range.at(accuracy_bin(p.accuracy));
      p.spread_lo = range.first;
      p.spread_hi = range.second;
    }
    rep.fluctuation.push_back(std::move(series));
    rep.strength.push_back(std::move(pdfs));
  }
  return rep;
}

}  // namespace cnt
