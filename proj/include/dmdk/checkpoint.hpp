// Copyright 2026 The DMDK Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Checkpoint container, version 1. All integers are unsigned little-endian.
//
//   offset  size  field
//   0       8     magic "DMDKCKPT"
//   8       4     version (1)
//   12      4     tensor count T
//   16      8     metadata length L
//   24      L     metadata, UTF-8 JSON
//   24+L    ...   T manifest entries:
//                   u32 name length, name bytes,
//                   u64 rows, u64 cols,
//                   u64 byte offset of the tensor inside the data section
//   ...     ...   data section: IEEE-754 binary64 little-endian values,
//                 each tensor row-major
//
// The metadata holds the effective run config, the vocabulary, node names,
// base graph, fallback labels and lexicon, so a checkpoint alone is enough
// to rebuild the model.

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "dmdk/config.hpp"
#include "dmdk/model.hpp"
#include "json.hpp"

namespace dmdk {

inline constexpr char kCheckpointMagic[8] = {'D', 'M', 'D', 'K', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct TensorEntry {
  std::string name;
  Matrix value;
};

struct CheckpointData {
  nlohmann::json metadata;
  std::vector<TensorEntry> tensors;
};

namespace detail {

class ByteWriter {
 public:
  void u32(std::uint32_t v) { le(v, 4); }
  void u64(std::uint64_t v) { le(v, 8); }
  void f64(double v) { le(std::bit_cast<std::uint64_t>(v), 8); }
  void bytes(const std::string& s) { buf_.insert(buf_.end(), s.begin(), s.end()); }
  void raw(const char* p, std::size_t n) { buf_.insert(buf_.end(), p, p + n); }
  const std::vector<char>& buffer() const { return buf_; }

 private:
  void le(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  std::vector<char> buf_;
};

class ByteReader {
 public:
  ByteReader(const std::vector<char>& buf, std::string name) : buf_(buf), name_(std::move(name)) {}

  std::uint64_t uint(int n) {
    need(n);
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
    pos_ += n;
    return v;
  }
  double f64() { return std::bit_cast<double>(uint(8)); }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s(buf_.data() + pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t position() const { return pos_; }
  void seek(std::size_t p) { pos_ = p; }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > buf_.size()) throw ValidationError(name_ + ": truncated checkpoint");
  }
  const std::vector<char>& buf_;
  std::string name_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::vector<char> serialize_checkpoint(const CheckpointData& data) {
  detail::ByteWriter w;
  w.raw(kCheckpointMagic, 8);
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(data.tensors.size()));
  const std::string meta = data.metadata.dump();
  w.u64(meta.size());
  w.bytes(meta);
  std::uint64_t offset = 0;
  for (const auto& t : data.tensors) {
    w.u32(static_cast<std::uint32_t>(t.name.size()));
    w.bytes(t.name);
    w.u64(t.value.rows());
    w.u64(t.value.cols());
    w.u64(offset);
    offset += 8 * t.value.size();
  }
  for (const auto& t : data.tensors)
    for (double v : t.value.data()) w.f64(v);
  return w.buffer();
}

inline CheckpointData deserialize_checkpoint(const std::vector<char>& buf, const std::string& name) {
  detail::ByteReader r(buf, name);
  if (r.bytes(8) != std::string(kCheckpointMagic, 8)) throw ValidationError(name + ": not a checkpoint file");
  const auto version = r.uint(4);
  if (version != kCheckpointVersion) {
    throw ValidationError(name + ": unsupported checkpoint version " + std::to_string(version));
  }
  const auto count = r.uint(4);
  const auto meta_len = r.uint(8);
  CheckpointData out;
  try {
    out.metadata = nlohmann::json::parse(r.bytes(meta_len));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(name + ": corrupt metadata (" + e.what() + ")");
  }
  struct Entry {
    std::string name;
    std::uint64_t rows, cols, offset;
  };
  std::vector<Entry> entries;
  for (std::uint64_t i = 0; i < count; ++i) {
    Entry e;
    e.name = r.bytes(r.uint(4));
    e.rows = r.uint(8);
    e.cols = r.uint(8);
    e.offset = r.uint(8);
    entries.push_back(std::move(e));
  }
  const std::size_t data_start = r.position();
  for (const auto& e : entries) {
    r.seek(data_start + e.offset);
    Matrix m(e.rows, e.cols);
    for (double& v : m.data()) v = r.f64();
    out.tensors.push_back({e.name, std::move(m)});
  }
  return out;
}

inline nlohmann::json model_metadata(const Model& m, const RunConfig& cfg) {
  nlohmann::json lex = nlohmann::json::array();
  for (const auto& [term, type] : m.context.lexicon.terms()) lex.push_back({join(term), std::string(to_string(type))});
  RunConfig effective = cfg;
  effective.model = m.config;
  return {{"format", "dmdk-checkpoint"},
          {"config", config_to_json(effective)},
          {"vocabulary", m.context.vocab.tokens()},
          {"graph_nodes", m.context.nodes.names()},
          {"base_graph", graph_to_json(m.context.base_graph)},
          {"fallback_labels", m.context.fallback_labels},
          {"lexicon", lex}};
}

inline std::vector<char> checkpoint_bytes(const Model& m, const RunConfig& cfg) {
  CheckpointData data;
  data.metadata = model_metadata(m, cfg);
  for (const auto& [name, v] : m.named_parameters()) data.tensors.push_back({name, v->value});
  return serialize_checkpoint(data);
}

inline void save_checkpoint(const std::filesystem::path& path, const Model& m, const RunConfig& cfg) {
  const auto bytes = checkpoint_bytes(m, cfg);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing checkpoint " + path.string());
}

struct LoadedModel {
  Model model;
  RunConfig config;
};

inline LoadedModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  std::vector<char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const CheckpointData data = deserialize_checkpoint(buf, path.string());
  const auto& meta = data.metadata;
  try {
    RunConfig cfg = parse_config(meta.at("config"));
    ModelContext ctx;
    ctx.vocab = Vocabulary::from_tokens(meta.at("vocabulary").get<std::vector<std::string>>());
    const auto nodes = meta.at("graph_nodes").get<std::vector<std::string>>();
    for (std::size_t i = 1; i < nodes.size(); ++i) ctx.nodes.add(nodes[i]);
    ctx.base_graph = parse_graph_json(meta.at("base_graph"));
    ctx.fallback_labels = meta.at("fallback_labels").get<std::vector<std::string>>();
    for (const auto& e : meta.at("lexicon")) {
      auto type = parse_entity_type(e.at(1).get<std::string>());
      if (!type) throw ValidationError("unknown lexicon type in checkpoint");
      ctx.lexicon.add(e.at(0).get<std::string>(), *type);
    }
    Model model = Model::init(cfg.model, std::move(ctx), 0);
    std::map<std::string, const Matrix*> stored;
    for (const auto& t : data.tensors) stored[t.name] = &t.value;
    for (const auto& [name, v] : model.named_parameters()) {
      auto it = stored.find(name);
      if (it == stored.end()) throw ValidationError("checkpoint lacks tensor '" + name + "'");
      if (!it->second->same_shape(v->value)) {
        throw ValidationError("checkpoint tensor '" + name + "' is " + it->second->shape_string() +
                              ", model expects " + v->value.shape_string());
      }
      v->value = *it->second;
    }
    return {std::move(model), std::move(cfg)};
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path.string() + ": bad checkpoint metadata (" + e.what() + ")");
  }
}

}  // namespace dmdk
