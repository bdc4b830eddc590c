// SPDX-License-Identifier: Apache-2.0
#pragma once

// Training manifest as JSON: the TrainConfig fields at top level, plus
// optional "population" and "dataset" objects. Unknown keys are rejected.
//
//   {"layer_sizes": [64, 32, 32, 10], "init_family": "normal", "init_scale": 0.05,
//    "learning_rate": 0.05, "batch_size": 32, "max_epochs": 30, "seed": 1000,
//    "early_stop_at_accuracy": 0.9, "eval_every_batches": 1, "task_tag": "digits",
//    "snapshot_schedule": {"kind": "on_accuracy_crossings", "thresholds": [0.3, 0.85]},
//    "population": {"count": 20, "accuracy_targets": [0.3, 0.85]},
//    "dataset": {"kind": "bundled"}}

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "cnt/dataset.hpp"
#include "cnt/errors.hpp"
#include "cnt/snapshot_io.hpp"
#include "cnt/trainer.hpp"

namespace cnt {

enum class DatasetKind { bundled, csv, idx, blobs };

struct DatasetSpec {
  DatasetKind kind = DatasetKind::bundled;
  std::filesystem::path path;    // csv
  std::filesystem::path images;  // idx
  std::filesystem::path labels;  // idx
  std::optional<std::filesystem::path> eval_images;  // idx; otherwise the fixed 80/20 split
  std::optional<std::filesystem::path> eval_labels;
  BlobSpec blobs;
};

struct PopulationSpec {
  std::size_t count = 1;
  std::vector<double> accuracy_targets;
};

struct RunConfig {
  TrainConfig train;
  std::optional<PopulationSpec> population;
  DatasetSpec dataset;
};

namespace detail {

inline void reject_unknown_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ValidationError(where + " must be a JSON object");
  for (const auto& [k, _] : j.items()) {
    if (!allowed.count(k)) throw ValidationError(where + ": unknown key '" + k + "'");
  }
}

inline std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

}  // namespace detail

/// Relative dataset paths resolve against `base_dir` (the config file's directory).
inline RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base_dir = {}) {
  using detail::json;
  return detail::guard_json("config", [&] {
    const json j = json::parse(text);
    detail::reject_unknown_keys(j,
                                {"layer_sizes", "init_family", "init_scale", "learning_rate", "batch_size",
                                 "max_epochs", "early_stop_at_accuracy", "seed", "snapshot_schedule",
                                 "eval_every_batches", "task_tag", "population", "dataset"},
                                "config");
    RunConfig rc;
    auto& c = rc.train;
    c.layer_sizes = j.at("layer_sizes").get<std::vector<std::size_t>>();
    if (j.contains("init_family")) c.init_family = detail::parse_init_family(j["init_family"].get<std::string>());
    if (j.contains("init_scale")) c.init_scale = j["init_scale"].get<double>();
    if (j.contains("learning_rate")) c.learning_rate = j["learning_rate"].get<double>();
    if (j.contains("batch_size")) c.batch_size = j["batch_size"].get<std::size_t>();
    if (j.contains("max_epochs")) c.max_epochs = j["max_epochs"].get<std::size_t>();
    if (j.contains("early_stop_at_accuracy") && !j["early_stop_at_accuracy"].is_null()) {
      c.early_stop_at_accuracy = j["early_stop_at_accuracy"].get<double>();
    }
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("eval_every_batches")) c.eval_every_batches = j["eval_every_batches"].get<std::size_t>();
    if (j.contains("task_tag")) c.task_tag = j["task_tag"].get<std::string>();
    if (j.contains("snapshot_schedule")) {
      const auto& s = j["snapshot_schedule"];
      detail::reject_unknown_keys(s, {"kind", "thresholds"}, "snapshot_schedule");
      const auto kind = s.at("kind").get<std::string>();
      if (kind == "every_epoch") {
        c.snapshot_schedule.kind = ScheduleKind::every_epoch;
      } else if (kind == "on_accuracy_crossings") {
        c.snapshot_schedule.kind = ScheduleKind::on_accuracy_crossings;
      } else if (kind == "final") {
        c.snapshot_schedule.kind = ScheduleKind::final;
      } else {
        throw ValidationError("snapshot_schedule: unknown kind '" + kind + "'");
      }
      if (s.contains("thresholds")) c.snapshot_schedule.thresholds = s["thresholds"].get<std::vector<double>>();
    }
    validate(c);

    if (j.contains("population")) {
      const auto& p = j["population"];
      detail::reject_unknown_keys(p, {"count", "accuracy_targets"}, "population");
      PopulationSpec ps;
      ps.count = p.at("count").get<std::size_t>();
      ps.accuracy_targets = p.at("accuracy_targets").get<std::vector<double>>();
      if (ps.count == 0) throw ValidationError("population.count must be positive");
      if (ps.accuracy_targets.empty()) throw ValidationError("population.accuracy_targets must not be empty");
      for (double t : ps.accuracy_targets) {
        if (!(t >= 0 && t <= 1)) throw ValidationError("population.accuracy_targets must lie in [0,1]");
      }
      rc.population = std::move(ps);
    }

    if (j.contains("dataset")) {
      const auto& d = j["dataset"];
      detail::reject_unknown_keys(d,
                                  {"kind", "path", "images", "labels", "eval_images", "eval_labels", "classes",
                                   "dim", "per_class", "spread", "seed"},
                                  "dataset");
      const auto kind = d.at("kind").get<std::string>();
      auto& ds = rc.dataset;
      if (kind == "bundled") {
        ds.kind = DatasetKind::bundled;
      } else if (kind == "csv") {
        ds.kind = DatasetKind::csv;
        ds.path = detail::resolve(base_dir, d.at("path").get<std::string>());
      } else if (kind == "idx") {
        ds.kind = DatasetKind::idx;
        ds.images = detail::resolve(base_dir, d.at("images").get<std::string>());
        ds.labels = detail::resolve(base_dir, d.at("labels").get<std::string>());
        if (d.contains("eval_images") != d.contains("eval_labels")) {
          throw ValidationError("dataset: eval_images and eval_labels go together");
        }
        if (d.contains("eval_images")) {
          ds.eval_images = detail::resolve(base_dir, d["eval_images"].get<std::string>());
          ds.eval_labels = detail::resolve(base_dir, d["eval_labels"].get<std::string>());
        }
      } else if (kind == "blobs") {
        ds.kind = DatasetKind::blobs;
        if (d.contains("classes")) ds.blobs.classes = d["classes"].get<std::size_t>();
        if (d.contains("dim")) ds.blobs.dim = d["dim"].get<std::size_t>();
        if (d.contains("per_class")) ds.blobs.per_class = d["per_class"].get<std::size_t>();
        if (d.contains("spread")) ds.blobs.spread = d["spread"].get<double>();
        if (d.contains("seed")) ds.blobs.seed = d["seed"].get<std::uint64_t>();
      } else {
        throw ValidationError("dataset: unknown kind '" + kind + "'");
      }
    }
    return rc;
  });
}

/// Files a dataset reads; empty for generated data.
inline std::vector<std::filesystem::path> dataset_paths(const DatasetSpec& ds) {
  switch (ds.kind) {
    case DatasetKind::csv: return {ds.path};
    case DatasetKind::idx: {
      std::vector<std::filesystem::path> p{ds.images, ds.labels};
      if (ds.eval_images) {
        p.push_back(*ds.eval_images);
        p.push_back(*ds.eval_labels);
      }
      return p;
    }
    case DatasetKind::bundled:
#ifdef CNT_BUNDLED_DATA
      return {CNT_BUNDLED_DATA};
#else
      return {};
#endif
    case DatasetKind::blobs: return {};
  }
  return {};
}

/// (train, eval) for a dataset spec.
inline std::pair<Dataset, Dataset> load_datasets(const DatasetSpec& ds) {
  switch (ds.kind) {
    case DatasetKind::bundled:
#ifdef CNT_BUNDLED_DATA
      return split_train_eval(load_bundled_digits());
#else
      throw ValidationError("this build has no bundled dataset");
#endif
    case DatasetKind::csv: return split_train_eval(load_dataset_csv(ds.path));
    case DatasetKind::idx:
      if (ds.eval_images) return {load_idx(ds.images, ds.labels), load_idx(*ds.eval_images, *ds.eval_labels)};
      return split_train_eval(load_idx(ds.images, ds.labels));
    case DatasetKind::blobs: return split_train_eval(gaussian_blobs(ds.blobs));
  }
  throw ValidationError("unknown dataset kind");
}

}  // namespace cnt
