// SPDX-License-Identifier: Apache-2.0
#pragma once

// CNTS v1 container:
//
//   offset 0   "CNTS"                      4 bytes
//   offset 4   version (u16 LE) = 1
//   offset 6   header length H (u32 LE)
//   offset 10  UTF-8 JSON header, H bytes
//   offset 10+H tensor payloads, float64 LE, row-major in declared index order
//
// The header carries the snapshot meta and one descriptor per layer with byte
// offsets relative to the start of the payload section. A pure-JSON variant
// (tensors as nested arrays) is read and written by the *_json functions.

#include <bit>
#include <cctype>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "cnt/errors.hpp"
#include "cnt/snapshot.hpp"

namespace cnt {

inline constexpr std::uint16_t kCntsVersion = 1;
inline constexpr char kCntsMagic[4] = {'C', 'N', 'T', 'S'};

namespace detail {

using json = nlohmann::json;

inline void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline void put_f64(std::vector<std::uint8_t>& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

inline std::uint64_t get_le(std::span<const std::uint8_t> b, std::size_t at, int width) {
  std::uint64_t v = 0;
  for (int i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(b[at + i]) << (8 * i);
  return v;
}

inline json meta_to_json(const SnapshotMeta& m) {
  return json{{"accuracy", m.accuracy},
              {"epoch", m.epoch},
              {"init_family", to_string(m.init_family)},
              {"init_scale", m.init_scale},
              {"seed", m.seed},
              {"task_tag", m.task_tag},
              {"output_activation", to_string(m.output_activation)}};
}

inline InitFamily parse_init_family(const std::string& s) {
  if (s == "normal") return InitFamily::normal;
  if (s == "uniform") return InitFamily::uniform;
  throw FormatError("unknown init_family '" + s + "'");
}

inline Padding parse_padding(const std::string& s) {
  if (s == "valid") return Padding::valid;
  if (s == "same") return Padding::same;
  throw FormatError("unknown padding '" + s + "'");
}

inline OutputActivation parse_activation(const std::string& s) {
  if (s == "softmax") return OutputActivation::softmax;
  if (s == "linear") return OutputActivation::linear;
  throw FormatError("unknown output_activation '" + s + "'");
}

inline SnapshotMeta meta_from_json(const json& j) {
  SnapshotMeta m;
  m.accuracy = j.at("accuracy").get<double>();
  m.epoch = j.at("epoch").get<std::uint64_t>();
  m.init_family = parse_init_family(j.at("init_family").get<std::string>());
  m.init_scale = j.at("init_scale").get<double>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.task_tag = j.value("task_tag", std::string{});
  m.output_activation = parse_activation(j.value("output_activation", std::string{"softmax"}));
  return m;
}

inline json range_json(std::size_t offset, std::size_t count) {
  return json{{"offset", offset}, {"count", count}};
}

// Runs `fn` translating JSON library errors into FormatError.
template <typename Fn>
auto guard_json(std::string_view what, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string(what) + ": " + e.what());
  }
}

}  // namespace detail

/// Serializes to CNTS bytes. Output is a pure function of the snapshot.
inline std::vector<std::uint8_t> write_snapshot(const NetworkSnapshot& s) {
  using detail::json;
  json layers = json::array();
  std::size_t offset = 0;
  auto claim = [&](std::size_t count) {
    auto r = detail::range_json(offset, count);
    offset += count * sizeof(double);
    return r;
  };
  for (const auto& layer : s.layers) {
    if (const auto* d = std::get_if<Dense>(&layer)) {
      json l{{"kind", "dense"}, {"shape", {d->weights.rows(), d->weights.cols()}}};
      l["weights"] = claim(d->weights.size());
      l["bias"] = claim(d->bias.size());
      layers.push_back(std::move(l));
    } else {
      const auto& c = std::get<Conv2D>(layer);
      const auto& k = c.kernel.shape();
      json l{{"kind", "conv2d"},
             {"kernel_shape", {k[0], k[1], k[2], k[3]}},
             {"stride", {c.stride.rows, c.stride.cols}},
             {"padding", to_string(c.padding)},
             {"input_dims", {c.input_dims.height, c.input_dims.width, c.input_dims.channels}}};
      l["kernel"] = claim(c.kernel.size());
      l["bias"] = claim(c.bias.size());
      layers.push_back(std::move(l));
    }
  }
  const json header{{"meta", detail::meta_to_json(s.meta)}, {"layers", layers}, {"payload_bytes", offset}};
  const std::string text = header.dump();

  std::vector<std::uint8_t> out;
  out.reserve(10 + text.size() + offset);
  out.insert(out.end(), std::begin(kCntsMagic), std::end(kCntsMagic));
  detail::put_u16(out, kCntsVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  for (const auto& layer : s.layers) {
    const auto& w = weight_values(layer);
    const auto& b = std::holds_alternative<Dense>(layer) ? std::get<Dense>(layer).bias
                                                         : std::get<Conv2D>(layer).bias;
    for (double v : w) detail::put_f64(out, v);
    for (double v : b) detail::put_f64(out, v);
  }
  return out;
}

namespace detail {

inline NetworkSnapshot read_cnts(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 10) throw FormatError("CNTS: truncated preamble");
  const auto version = static_cast<std::uint16_t>(get_le(bytes, 4, 2));
  if (version != kCntsVersion) {
    throw FormatError("CNTS: unsupported version " + std::to_string(version));
  }
  const auto header_len = static_cast<std::size_t>(get_le(bytes, 6, 4));
  if (bytes.size() < 10 + header_len) throw FormatError("CNTS: truncated header");
  const auto payload = bytes.subspan(10 + header_len);
  const std::string_view text(reinterpret_cast<const char*>(bytes.data() + 10), header_len);

  return guard_json("CNTS header", [&] {
    const json header = json::parse(text);
    auto read_range = [&](const json& r) {
      const auto off = r.at("offset").get<std::size_t>();
      const auto count = r.at("count").get<std::size_t>();
      if (off % sizeof(double) != 0 || off + count * sizeof(double) > payload.size()) {
        throw FormatError("CNTS: tensor range outside payload");
      }
      std::vector<double> v(count);
      for (std::size_t i = 0; i < count; ++i) {
        v[i] = std::bit_cast<double>(get_le(payload, off + i * sizeof(double), 8));
      }
      return v;
    };

    NetworkSnapshot s;
    s.meta = meta_from_json(header.at("meta"));
    for (const auto& l : header.at("layers")) {
      const auto kind = l.at("kind").get<std::string>();
      if (kind == "dense") {
        const auto shape = l.at("shape").get<std::vector<std::size_t>>();
        if (shape.size() != 2) throw FormatError("CNTS: dense shape must have 2 entries");
        auto w = read_range(l.at("weights"));
        if (w.size() != shape[0] * shape[1]) throw FormatError("CNTS: dense payload/shape mismatch");
        s.layers.emplace_back(Dense{Matrix(shape[0], shape[1], std::move(w)), read_range(l.at("bias"))});
      } else if (kind == "conv2d") {
        const auto ks = l.at("kernel_shape").get<std::vector<std::size_t>>();
        const auto st = l.at("stride").get<std::vector<std::size_t>>();
        const auto in = l.at("input_dims").get<std::vector<std::size_t>>();
        if (ks.size() != 4 || st.size() != 2 || in.size() != 3) {
          throw FormatError("CNTS: malformed conv2d descriptor");
        }
        auto k = read_range(l.at("kernel"));
        if (k.size() != ks[0] * ks[1] * ks[2] * ks[3]) throw FormatError("CNTS: kernel payload/shape mismatch");
        Conv2D c;
        c.kernel = Kernel4({ks[0], ks[1], ks[2], ks[3]}, std::move(k));
        c.bias = read_range(l.at("bias"));
        c.stride = {st[0], st[1]};
        c.padding = parse_padding(l.at("padding").get<std::string>());
        c.input_dims = {in[0], in[1], in[2]};
        s.layers.emplace_back(std::move(c));
      } else {
        throw FormatError("CNTS: unknown layer kind '" + kind + "'");
      }
    }
    return s;
  });
}

inline json nested(const Matrix& m) {
  json rows = json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    rows.push_back(std::vector<double>(m.row(r).begin(), m.row(r).end()));
  }
  return rows;
}

inline json nested(const Kernel4& k) {
  json a = json::array();
  for (std::size_t h = 0; h < k.kh(); ++h) {
    json b = json::array();
    for (std::size_t w = 0; w < k.kw(); ++w) {
      json c = json::array();
      for (std::size_t ci = 0; ci < k.c_in(); ++ci) {
        std::vector<double> d(k.c_out());
        for (std::size_t co = 0; co < k.c_out(); ++co) d[co] = k(h, w, ci, co);
        c.push_back(std::move(d));
      }
      b.push_back(std::move(c));
    }
    a.push_back(std::move(b));
  }
  return a;
}

inline double finite_number(const json& v) {
  if (!v.is_number()) throw ValidationError("non-finite or non-numeric tensor value");
  return v.get<double>();
}

inline Matrix matrix_from(const json& rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows.at(0).size() : 0;
  Matrix m(r, c);
  for (std::size_t i = 0; i < r; ++i) {
    if (rows.at(i).size() != c) throw ValidationError("dense weight matrix is not rectangular");
    for (std::size_t j = 0; j < c; ++j) m(i, j) = finite_number(rows.at(i).at(j));
  }
  return m;
}

inline Kernel4 kernel_from(const json& a) {
  Kernel4::Shape shape{a.size(), 0, 0, 0};
  if (shape[0]) shape[1] = a.at(0).size();
  if (shape[1]) shape[2] = a.at(0).at(0).size();
  if (shape[2]) shape[3] = a.at(0).at(0).at(0).size();
  Kernel4 k(shape);
  for (std::size_t h = 0; h < shape[0]; ++h) {
    for (std::size_t w = 0; w < shape[1]; ++w) {
      for (std::size_t ci = 0; ci < shape[2]; ++ci) {
        const auto& row = a.at(h).at(w).at(ci);
        if (a.at(h).size() != shape[1] || a.at(h).at(w).size() != shape[2] || row.size() != shape[3]) {
          throw ValidationError("conv kernel is not a rectangular rank-4 array");
        }
        for (std::size_t co = 0; co < shape[3]; ++co) k(h, w, ci, co) = finite_number(row.at(co));
      }
    }
  }
  return k;
}

inline std::vector<double> vector_from(const json& a) {
  std::vector<double> v;
  v.reserve(a.size());
  for (const auto& x : a) v.push_back(finite_number(x));
  return v;
}

}  // namespace detail

/// Reads CNTS bytes or the JSON variant, then validates.
inline NetworkSnapshot read_snapshot(std::span<const std::uint8_t> bytes) {
  NetworkSnapshot s;
  std::size_t first = 0;
  while (first < bytes.size() && std::isspace(bytes[first])) ++first;
  if (bytes.size() >= 4 && std::memcmp(bytes.data(), kCntsMagic, 4) == 0) {
    s = detail::read_cnts(bytes);
  } else if (first < bytes.size() && bytes[first] == '{') {
    const std::string_view text(reinterpret_cast<const char*>(bytes.data()), bytes.size());
    s = detail::guard_json("snapshot JSON", [&] {
      const auto j = detail::json::parse(text);
      if (j.value("format", std::string{}) != "cnts-json") throw FormatError("snapshot JSON: missing format tag");
      if (j.value("version", 0) != kCntsVersion) throw FormatError("snapshot JSON: unsupported version");
      NetworkSnapshot out;
      out.meta = detail::meta_from_json(j.at("meta"));
      for (const auto& l : j.at("layers")) {
        const auto kind = l.at("kind").get<std::string>();
        if (kind == "dense") {
          out.layers.emplace_back(Dense{detail::matrix_from(l.at("weights")), detail::vector_from(l.at("bias"))});
        } else if (kind == "conv2d") {
          const auto st = l.at("stride").get<std::vector<std::size_t>>();
          const auto in = l.at("input_dims").get<std::vector<std::size_t>>();
          if (st.size() != 2 || in.size() != 3) throw FormatError("snapshot JSON: malformed conv2d entry");
          out.layers.emplace_back(Conv2D{detail::kernel_from(l.at("kernel")), detail::vector_from(l.at("bias")),
                                         Stride2{st[0], st[1]},
                                         detail::parse_padding(l.at("padding").get<std::string>()),
                                         Dims3{in[0], in[1], in[2]}});
        } else {
          throw FormatError("snapshot JSON: unknown layer kind '" + kind + "'");
        }
      }
      return out;
    });
  } else {
    throw FormatError("bad magic: not a CNTS file or snapshot JSON");
  }
  validate(s);
  return s;
}

inline std::string write_snapshot_json(const NetworkSnapshot& s) {
  using detail::json;
  json layers = json::array();
  for (const auto& layer : s.layers) {
    if (const auto* d = std::get_if<Dense>(&layer)) {
      layers.push_back({{"kind", "dense"}, {"weights", detail::nested(d->weights)}, {"bias", d->bias}});
    } else {
      const auto& c = std::get<Conv2D>(layer);
      layers.push_back({{"kind", "conv2d"},
                        {"kernel", detail::nested(c.kernel)},
                        {"bias", c.bias},
                        {"stride", {c.stride.rows, c.stride.cols}},
                        {"padding", to_string(c.padding)},
                        {"input_dims", {c.input_dims.height, c.input_dims.width, c.input_dims.channels}}});
    }
  }
  const json j{{"format", "cnts-json"}, {"version", kCntsVersion}, {"meta", detail::meta_to_json(s.meta)},
               {"layers", layers}};
  return j.dump(1) + "\n";
}

inline bool is_json_snapshot_path(const std::filesystem::path& p) {
  return p.extension() == ".json";
}

inline std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + p.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline NetworkSnapshot load_snapshot(const std::filesystem::path& p) {
  const auto bytes = read_file_bytes(p);
  return read_snapshot(bytes);
}

/// Writes CNTS, or the JSON variant when the path ends in ".json".
inline void save_snapshot(const std::filesystem::path& p, const NetworkSnapshot& s) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  if (is_json_snapshot_path(p)) {
    out << write_snapshot_json(s);
  } else {
    const auto bytes = write_snapshot(s);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  }
}

}  // namespace cnt
