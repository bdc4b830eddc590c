// SPDX-License-Identifier: Apache-2.0
#pragma once

// Report serialization. Ensemble reports: JSON nested by metric, layer and
// accuracy bin; a tidy CSV (metric,layer,accuracy_bin,stat_name,value); and one
// plot CSV per metric family. Trajectory reports: JSON plus an error-bar CSV.
// Undefined statistics are JSON null and empty CSV fields.

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cnt/ensemble.hpp"
#include "cnt/numeric.hpp"

namespace cnt {

inline constexpr int kReportSchemaVersion = 1;

namespace detail {

inline nlohmann::json opt_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); }

inline std::string opt_csv(const std::optional<double>& v) { return v ? shortest_repr(*v) : std::string(); }

inline nlohmann::json spread_json(const StatSpread& s) { return {{"min", s.min}, {"max", s.max}, {"mean", s.mean}}; }

inline nlohmann::json summary_json(const DistributionSummary& d) {
  return {{"n", d.n},
          {"mean", d.mean},
          {"variance", d.variance},
          {"skewness", opt_json(d.skewness)},
          {"kurtosis", opt_json(d.kurtosis)},
          {"densities", d.histogram.densities}};
}

inline std::string joined(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ' ';
    out += shortest_repr(v[i]);
  }
  return out;
}

}  // namespace detail

inline nlohmann::json ensemble_report_json(const EnsembleReport& rep) {
  using nlohmann::json;
  json j;
  j["schema"] = "cnt.ensemble_report";
  j["version"] = kReportSchemaVersion;
  j["kurtosis_convention"] = "excess";
  j["accuracy_bin_edges"] = accuracy_bin_edges();
  j["counts"] = rep.counts;
  j["min_population"] = rep.min_population;
  j["underpopulated_bins"] = rep.underpopulated;
  j["histogram_bins"] = rep.histogram_bins;
  j["bootstrap_rounds"] = rep.bootstrap_rounds;
  json metrics = json::object();
  for (const auto& e : rep.entries) {
    json bins = json::array();
    for (const auto& b : e.bins) {
      json bj = detail::summary_json(b.summary);
      bj["accuracy_bin"] = b.accuracy_bin;
      bj["records"] = b.records;
      if (b.bootstrap) {
        json boot{{"rounds", b.bootstrap->rounds},
                  {"mean", detail::spread_json(b.bootstrap->mean)},
                  {"variance", detail::spread_json(b.bootstrap->variance)}};
        boot["skewness"] = b.bootstrap->skewness ? detail::spread_json(*b.bootstrap->skewness) : json();
        boot["kurtosis"] = b.bootstrap->kurtosis ? detail::spread_json(*b.bootstrap->kurtosis) : json();
        bj["bootstrap"] = std::move(boot);
      }
      bins.push_back(std::move(bj));
    }
    metrics[to_string(e.metric)][std::to_string(e.layer)] = {{"bin_edges", e.bin_edges}, {"bins", std::move(bins)}};
  }
  j["metrics"] = std::move(metrics);
  j["trends"] = json::array();
  for (const auto& t : rep.trends) {
    j["trends"].push_back({{"layer", t.layer},
                           {"accuracy_bin", t.accuracy_bin},
                           {"strength_variance", t.strength_variance},
                           {"strength_kurtosis", detail::opt_json(t.strength_kurtosis)},
                           {"mean_fluctuation", t.mean_fluctuation}});
  }
  return j;
}

/// Columns: metric,layer,accuracy_bin,stat_name,value.
inline std::string ensemble_tidy_csv(const EnsembleReport& rep) {
  std::string out = "metric,layer,accuracy_bin,stat_name,value\n";
  for (const auto& e : rep.entries) {
    for (const auto& b : e.bins) {
      const std::string prefix =
          std::string(to_string(e.metric)) + "," + std::to_string(e.layer) + "," + std::to_string(b.accuracy_bin) + ",";
      auto row = [&](const std::string& stat, const std::string& value) { out += prefix + stat + "," + value + "\n"; };
      const auto& s = b.summary;
      row("records", std::to_string(b.records));
      row("n", std::to_string(s.n));
      row("mean", shortest_repr(s.mean));
      row("variance", shortest_repr(s.variance));
      row("skewness", detail::opt_csv(s.skewness));
      row("kurtosis", detail::opt_csv(s.kurtosis));
      if (b.bootstrap) {
        auto spread = [&](const std::string& name, const std::optional<StatSpread>& sp) {
          row("bootstrap_" + name + "_min", sp ? shortest_repr(sp->min) : "");
          row("bootstrap_" + name + "_max", sp ? shortest_repr(sp->max) : "");
          row("bootstrap_" + name + "_mean", sp ? shortest_repr(sp->mean) : "");
        };
        spread("mean", b.bootstrap->mean);
        spread("variance", b.bootstrap->variance);
        spread("skewness", b.bootstrap->skewness);
        spread("kurtosis", b.bootstrap->kurtosis);
      }
    }
  }
  return out;
}

/// One row per (layer, accuracy bin) distribution of `metric`; bin_edges and
/// densities are space-separated lists on the shared edges.
inline std::string ensemble_figure_csv(const EnsembleReport& rep, Metric metric) {
  std::string out = "layer,accuracy_bin,records,n,mean,variance,skewness,kurtosis,bin_edges,densities\n";
  for (const auto& e : rep.entries) {
    if (e.metric != metric) continue;
    const auto edges = detail::joined(e.bin_edges);
    for (const auto& b : e.bins) {
      const auto& s = b.summary;
      out += std::to_string(e.layer) + "," + std::to_string(b.accuracy_bin) + "," + std::to_string(b.records) + "," +
             std::to_string(s.n) + "," + shortest_repr(s.mean) + "," + shortest_repr(s.variance) + "," +
             detail::opt_csv(s.skewness) + "," + detail::opt_csv(s.kurtosis) + "," + edges + "," +
             detail::joined(s.histogram.densities) + "\n";
    }
  }
  return out;
}

/// Long-form density rows for plotting, optionally with a smoothed density at each bin centre.
inline std::string ensemble_density_csv(const EnsembleReport& rep, Metric metric,
                                        const std::map<std::pair<std::size_t, std::size_t>, std::vector<double>>* kde =
                                            nullptr) {
  std::string out = kde ? "layer,accuracy_bin,bin_lo,bin_hi,density,kde\n" : "layer,accuracy_bin,bin_lo,bin_hi,density\n";
  for (const auto& e : rep.entries) {
    if (e.metric != metric) continue;
    for (const auto& b : e.bins) {
      const std::vector<double>* smooth = nullptr;
      if (kde) {
        auto it = kde->find({e.layer, b.accuracy_bin});
        if (it != kde->end()) smooth = &it->second;
      }
      for (std::size_t i = 0; i < b.summary.histogram.densities.size(); ++i) {
        out += std::to_string(e.layer) + "," + std::to_string(b.accuracy_bin) + "," + shortest_repr(e.bin_edges[i]) +
               "," + shortest_repr(e.bin_edges[i + 1]) + "," + shortest_repr(b.summary.histogram.densities[i]);
        if (kde) out += "," + (smooth ? shortest_repr((*smooth)[i]) : std::string());
        out += "\n";
      }
    }
  }
  return out;
}

inline nlohmann::json trajectory_report_json(const TrajectoryReport& t) {
  using nlohmann::json;
  json j;
  j["schema"] = "cnt.trajectory_report";
  j["version"] = kReportSchemaVersion;
  j["seed"] = t.seed;
  j["topology"] = t.topology;
  j["snapshots"] = json::array();
  for (const auto& [acc, epoch] : t.snapshots) j["snapshots"].push_back({{"accuracy", acc}, {"epoch", epoch}});
  j["layers"] = json::array();
  for (std::size_t l = 0; l < t.fluctuation.size(); ++l) {
    json series = json::array();
    for (const auto& p : t.fluctuation[l]) {
      series.push_back({{"accuracy", p.accuracy},
                        {"epoch", p.epoch},
                        {"fluctuation", p.value},
                        {"spread_lo", p.spread_lo},
                        {"spread_hi", p.spread_hi}});
    }
    json pdfs = json::array();
    for (const auto& d : t.strength[l]) {
      json dj = detail::summary_json(d);
      dj["bin_edges"] = d.histogram.bin_edges;
      pdfs.push_back(std::move(dj));
    }
    j["layers"].push_back({{"layer", l + 1}, {"fluctuation", std::move(series)}, {"strength", std::move(pdfs)}});
  }
  return j;
}

/// Columns: layer,accuracy,Y,spread_lo,spread_hi; one row per (layer, snapshot).
inline std::string trajectory_errorbar_csv(const TrajectoryReport& t) {
  std::string out = "layer,accuracy,Y,spread_lo,spread_hi\n";
  for (std::size_t l = 0; l < t.fluctuation.size(); ++l) {
    for (const auto& p : t.fluctuation[l]) {
      out += std::to_string(l + 1) + "," + shortest_repr(p.accuracy) + "," + shortest_repr(p.value) + "," +
             shortest_repr(p.spread_lo) + "," + shortest_repr(p.spread_hi) + "\n";
    }
  }
  return out;
}

/// Strength distribution per (layer, snapshot).
inline std::string trajectory_strength_csv(const TrajectoryReport& t) {
  std::string out = "layer,accuracy,epoch,n,mean,variance,skewness,kurtosis,bin_edges,densities\n";
  for (std::size_t l = 0; l < t.strength.size(); ++l) {
    for (std::size_t k = 0; k < t.strength[l].size(); ++k) {
      const auto& s = t.strength[l][k];
      const auto& p = t.fluctuation[l][k];
      out += std::to_string(l + 1) + "," + shortest_repr(p.accuracy) + "," + std::to_string(p.epoch) + "," +
             std::to_string(s.n) + "," + shortest_repr(s.mean) + "," + shortest_repr(s.variance) + "," +
             detail::opt_csv(s.skewness) + "," + detail::opt_csv(s.kurtosis) + "," +
             detail::joined(s.histogram.bin_edges) + "," + detail::joined(s.histogram.densities) + "\n";
    }
  }
  return out;
}

}  // namespace cnt
