// SPDX-License-Identifier: Apache-2.0
#pragma once

// MetricRecord as JSON (schema "cnt.metric_record", version 1) and as long-form
// CSV rows. JSON numbers use the shortest round-trip representation, so a
// record read back compares equal to the one written.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cnt/errors.hpp"
#include "cnt/metrics.hpp"
#include "cnt/numeric.hpp"
#include "cnt/snapshot_io.hpp"

namespace cnt {

inline constexpr int kRecordSchemaVersion = 1;

inline nlohmann::json record_to_json(const MetricRecord& r) {
  using nlohmann::json;
  json j;
  j["schema"] = "cnt.metric_record";
  j["version"] = kRecordSchemaVersion;
  j["meta"] = detail::meta_to_json(r.meta);
  j["topology"] = r.topology;
  j["link_stats"] = json::array();
  for (const auto& s : r.link_stats) j["link_stats"].push_back({{"layer", s.layer_index}, {"mu", s.mu}, {"delta", s.delta}});
  j["strengths"] = json::array();
  for (const auto& s : r.strengths) {
    j["strengths"].push_back({{"layer", s.layer_index}, {"s_in", s.s_in}, {"s_out", s.s_out}, {"s", s.s}});
  }
  j["fluctuations"] = json::array();
  for (const auto& f : r.fluctuations) j["fluctuations"].push_back({{"layer", f.layer_index}, {"value", f.value}});
  if (r.disparities) {
    j["disparities"] = json::array();
    for (const auto& d : *r.disparities) {
      json values = json::array();
      for (const auto& v : d.values) values.push_back(v ? json(*v) : json(nullptr));
      j["disparities"].push_back({{"layer", d.layer_index}, {"values", std::move(values)}});
    }
  }
  j["link_weights"] = r.link_weights;
  return j;
}

inline std::string write_record_json(const MetricRecord& r) { return record_to_json(r).dump(1) + "\n"; }

inline MetricRecord record_from_json(const nlohmann::json& j) {
  return detail::guard_json("metric record", [&] {
    if (j.at("schema").get<std::string>() != "cnt.metric_record") throw FormatError("not a metric record");
    if (j.at("version").get<int>() != kRecordSchemaVersion) {
      throw FormatError("unsupported metric record version " + std::to_string(j["version"].get<int>()));
    }
    MetricRecord r;
    r.meta = detail::meta_from_json(j.at("meta"));
    r.topology = j.at("topology").get<std::vector<std::size_t>>();
    for (const auto& s : j.at("link_stats")) {
      r.link_stats.push_back({s.at("layer").get<std::size_t>(), s.at("mu").get<double>(), s.at("delta").get<double>()});
    }
    for (const auto& s : j.at("strengths")) {
      r.strengths.push_back({s.at("layer").get<std::size_t>(), s.at("s_in").get<std::vector<double>>(),
                             s.at("s_out").get<std::vector<double>>(), s.at("s").get<std::vector<double>>()});
    }
    for (const auto& f : j.at("fluctuations")) {
      r.fluctuations.push_back({f.at("layer").get<std::size_t>(), f.at("value").get<double>()});
    }
    if (j.contains("disparities")) {
      std::vector<LayerDisparity> ds;
      for (const auto& d : j["disparities"]) {
        LayerDisparity ld{d.at("layer").get<std::size_t>(), {}};
        for (const auto& v : d.at("values")) {
          ld.values.push_back(v.is_null() ? std::nullopt : std::optional<double>(v.get<double>()));
        }
        ds.push_back(std::move(ld));
      }
      r.disparities = std::move(ds);
    }
    r.link_weights = j.at("link_weights").get<std::vector<std::vector<double>>>();
    if (r.strengths.size() != r.topology.size() || r.fluctuations.size() != r.topology.size() ||
        r.link_stats.size() + 1 != r.topology.size()) {
      throw FormatError("metric record: layer lists disagree with topology");
    }
    for (std::size_t k = 0; k < r.topology.size(); ++k) {
      if (r.strengths[k].s.size() != r.topology[k]) {
        throw FormatError("metric record: layer " + std::to_string(k) + " strength count disagrees with topology");
      }
    }
    return r;
  });
}

inline MetricRecord read_record_json(const std::string& text) {
  return detail::guard_json("metric record", [&] { return record_from_json(nlohmann::json::parse(text)); });
}

inline MetricRecord load_record(const std::filesystem::path& p) {
  const auto bytes = read_file_bytes(p);
  return read_record_json(std::string(bytes.begin(), bytes.end()));
}

inline const char* kRecordCsvHeader = "snapshot,accuracy,epoch,seed,layer,metric,node,value\n";

/// Long-form rows: mu and delta per block; s_in, s_out, s and (when present)
/// disparity per node; fluctuation per neuron layer. Invalid disparities are
/// written as an empty value.
inline void append_record_csv(std::string& out, const std::string& snapshot, const MetricRecord& r) {
  const std::string prefix = snapshot + "," + shortest_repr(r.meta.accuracy) + "," + std::to_string(r.meta.epoch) +
                             "," + std::to_string(r.meta.seed) + ",";
  auto row = [&](std::size_t layer, const char* metric, const std::string& node, const std::string& value) {
    out += prefix;
    out += std::to_string(layer);
    out += ',';
    out += metric;
    out += ',';
    out += node;
    out += ',';
    out += value;
    out += '\n';
  };
  for (const auto& s : r.link_stats) {
    row(s.layer_index, "mu", "", shortest_repr(s.mu));
    row(s.layer_index, "delta", "", shortest_repr(s.delta));
  }
  for (const auto& f : r.fluctuations) row(f.layer_index, "fluctuation", "", shortest_repr(f.value));
  for (const auto& sv : r.strengths) {
    for (std::size_t i = 0; i < sv.s.size(); ++i) {
      const auto node = std::to_string(i);
      row(sv.layer_index, "s_in", node, shortest_repr(sv.s_in[i]));
      row(sv.layer_index, "s_out", node, shortest_repr(sv.s_out[i]));
      row(sv.layer_index, "s", node, shortest_repr(sv.s[i]));
    }
  }
  if (r.disparities) {
    for (const auto& d : *r.disparities) {
      for (std::size_t i = 0; i < d.values.size(); ++i) {
        row(d.layer_index, "disparity", std::to_string(i), d.values[i] ? shortest_repr(*d.values[i]) : "");
      }
    }
  }
}

}  // namespace cnt
