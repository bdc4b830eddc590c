// SPDX-License-Identifier: Apache-2.0
#pragma once

// Classification datasets with every input coordinate in [0,1]: the bundled
// 8x8 digits CSV, IDX image/label pairs, and a Gaussian-blob generator.

#include <algorithm>
#include <charconv>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "cnt/errors.hpp"
#include "cnt/rng.hpp"
#include "cnt/snapshot_io.hpp"
#include "cnt/tensor.hpp"

namespace cnt {

struct Dataset {
  Matrix inputs;  // one sample per row
  std::vector<std::size_t> labels;
  std::size_t class_count = 0;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t dim() const noexcept { return inputs.cols(); }

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

inline void validate(const Dataset& d) {
  if (d.size() == 0) throw ValidationError("dataset is empty");
  if (d.inputs.rows() != d.labels.size()) {
    throw ValidationError("dataset has " + std::to_string(d.inputs.rows()) + " input rows but " +
                          std::to_string(d.labels.size()) + " labels");
  }
  if (d.class_count == 0) throw ValidationError("dataset has no classes");
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d.labels[i] >= d.class_count) {
      throw ValidationError("sample " + std::to_string(i) + ": label " + std::to_string(d.labels[i]) +
                            " outside [0," + std::to_string(d.class_count) + ")");
    }
  }
  for (std::size_t i = 0; i < d.inputs.values().size(); ++i) {
    const double x = d.inputs.values()[i];
    if (!(x >= 0.0 && x <= 1.0)) {
      throw ValidationError("sample " + std::to_string(i / d.dim()) + ", feature " + std::to_string(i % d.dim()) +
                            ": value " + std::to_string(x) + " outside [0,1]");
    }
  }
}

/// Rescales every column to [0,1] by its own min and max; constant columns become 0.
inline void normalize_columns(Matrix& m) {
  for (std::size_t c = 0; c < m.cols(); ++c) {
    double lo = m(0, c), hi = m(0, c);
    for (std::size_t r = 1; r < m.rows(); ++r) {
      lo = std::min(lo, m(r, c));
      hi = std::max(hi, m(r, c));
    }
    const double range = hi - lo;
    for (std::size_t r = 0; r < m.rows(); ++r) m(r, c) = range > 0 ? (m(r, c) - lo) / range : 0.0;
  }
}

namespace detail {

inline double parse_csv_number(std::string_view field, std::size_t line) {
  double v = 0.0;
  const auto* end = field.data() + field.size();
  const auto [p, ec] = std::from_chars(field.data(), end, v);
  if (ec != std::errc{} || p != end) {
    throw FormatError("line " + std::to_string(line) + ": bad number '" + std::string(field) + "'");
  }
  return v;
}

}  // namespace detail

/// CSV with a header row, feature columns, and an integer label in the last column.
/// Features are min-max normalized per column.
inline Dataset parse_dataset_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw FormatError("dataset CSV is empty");
  const auto columns = static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1;
  if (columns < 2) throw FormatError("dataset CSV needs at least one feature and a label column");
  const std::size_t dim = columns - 1;

  std::vector<double> values;
  std::vector<std::size_t> labels;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::size_t start = 0;
    for (std::size_t c = 0; c < columns; ++c) {
      const auto comma = line.find(',', start);
      if ((comma == std::string::npos) != (c + 1 == columns)) {
        throw FormatError("line " + std::to_string(line_no) + ": expected " + std::to_string(columns) + " fields");
      }
      const std::string_view field(line.data() + start, (comma == std::string::npos ? line.size() : comma) - start);
      const double v = detail::parse_csv_number(field, line_no);
      if (c < dim) {
        values.push_back(v);
      } else {
        if (v < 0 || v != static_cast<double>(static_cast<std::size_t>(v))) {
          throw FormatError("line " + std::to_string(line_no) + ": label must be a non-negative integer");
        }
        labels.push_back(static_cast<std::size_t>(v));
      }
      start = comma + 1;
    }
  }
  if (labels.empty()) throw FormatError("dataset CSV has no samples");
  Dataset d;
  d.inputs = Matrix(labels.size(), dim, std::move(values));
  normalize_columns(d.inputs);
  d.class_count = *std::max_element(labels.begin(), labels.end()) + 1;
  d.labels = std::move(labels);
  validate(d);
  return d;
}

inline Dataset load_dataset_csv(const std::filesystem::path& p) {
  const auto bytes = read_file_bytes(p);
  return parse_dataset_csv(std::string(bytes.begin(), bytes.end()));
}

#ifdef CNT_BUNDLED_DATA
/// The 8x8 digits set shipped in data/ (1797 samples, 10 classes).
inline Dataset load_bundled_digits() { return load_dataset_csv(CNT_BUNDLED_DATA); }
#endif

/// Deterministic 80/20 split: every fifth sample (index % 5 == 4) goes to eval.
inline std::pair<Dataset, Dataset> split_train_eval(const Dataset& d) {
  std::vector<double> tv, ev;
  Dataset train, eval;
  for (std::size_t i = 0; i < d.size(); ++i) {
    auto& dst = i % 5 == 4 ? eval : train;
    auto& vals = i % 5 == 4 ? ev : tv;
    const auto row = d.inputs.row(i);
    vals.insert(vals.end(), row.begin(), row.end());
    dst.labels.push_back(d.labels[i]);
  }
  train.inputs = Matrix(train.labels.size(), d.dim(), std::move(tv));
  eval.inputs = Matrix(eval.labels.size(), d.dim(), std::move(ev));
  train.class_count = eval.class_count = d.class_count;
  return {std::move(train), std::move(eval)};
}

namespace detail {

inline std::uint32_t read_be32(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint32_t>(b[at]) << 24 | static_cast<std::uint32_t>(b[at + 1]) << 16 |
         static_cast<std::uint32_t>(b[at + 2]) << 8 | static_cast<std::uint32_t>(b[at + 3]);
}

inline constexpr std::uint32_t kIdxImages = 0x00000803;
inline constexpr std::uint32_t kIdxLabels = 0x00000801;

}  // namespace detail

/// Parses an IDX image file (u8, rank 3) and label file (u8, rank 1); pixels scale by 1/255.
inline Dataset parse_idx(std::span<const std::uint8_t> images, std::span<const std::uint8_t> labels) {
  if (images.size() < 16 || detail::read_be32(images, 0) != detail::kIdxImages) {
    throw FormatError("IDX images: bad magic (expected 0x00000803)");
  }
  if (labels.size() < 8 || detail::read_be32(labels, 0) != detail::kIdxLabels) {
    throw FormatError("IDX labels: bad magic (expected 0x00000801)");
  }
  const std::size_t n = detail::read_be32(images, 4);
  const std::size_t rows = detail::read_be32(images, 8);
  const std::size_t cols = detail::read_be32(images, 12);
  if (detail::read_be32(labels, 4) != n) throw FormatError("IDX image and label counts differ");
  if (images.size() != 16 + n * rows * cols) throw FormatError("IDX images: payload size mismatch");
  if (labels.size() != 8 + n) throw FormatError("IDX labels: payload size mismatch");
  if (n == 0) throw FormatError("IDX files hold no samples");

  Dataset d;
  std::vector<double> v(n * rows * cols);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = images[16 + i] / 255.0;
  d.inputs = Matrix(n, rows * cols, std::move(v));
  d.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) d.labels[i] = labels[8 + i];
  d.class_count = *std::max_element(d.labels.begin(), d.labels.end()) + 1;
  validate(d);
  return d;
}

inline Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels) {
  const auto ib = read_file_bytes(images);
  const auto lb = read_file_bytes(labels);
  return parse_idx(ib, lb);
}

struct BlobSpec {
  std::size_t classes = 10;
  std::size_t dim = 64;
  std::size_t per_class = 100;
  double spread = 0.1;  // per-coordinate std around each centre
  std::uint64_t seed = 0;
};

/// Isotropic Gaussian clusters with centres uniform in [0.2,0.8]^dim, clipped to [0,1].
/// Samples are interleaved by class so the fixed split keeps every class.
inline Dataset gaussian_blobs(const BlobSpec& spec) {
  if (spec.classes == 0 || spec.dim == 0 || spec.per_class == 0) {
    throw std::invalid_argument("gaussian_blobs: classes, dim and per_class must be positive");
  }
  Rng rng(spec.seed);
  std::vector<double> centres(spec.classes * spec.dim);
  for (auto& c : centres) c = 0.2 + 0.6 * rng.uniform01();
  Dataset d;
  d.class_count = spec.classes;
  std::vector<double> v;
  v.reserve(spec.classes * spec.per_class * spec.dim);
  for (std::size_t i = 0; i < spec.per_class; ++i) {
    for (std::size_t k = 0; k < spec.classes; ++k) {
      for (std::size_t j = 0; j < spec.dim; ++j) {
        v.push_back(std::clamp(centres[k * spec.dim + j] + rng.normal(spec.spread), 0.0, 1.0));
      }
      d.labels.push_back(k);
    }
  }
  d.inputs = Matrix(d.labels.size(), spec.dim, std::move(v));
  return d;
}

}  // namespace cnt
