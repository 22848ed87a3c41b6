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

// Run configuration. Parsing is strict: unknown keys and values of the wrong
// JSON type are rejected instead of coerced, and every omitted key takes the
// default below. config_to_json() writes the effective configuration.

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "dmdk/model.hpp"
#include "json.hpp"

namespace dmdk {

struct TrainConfig {
  double learning_rate = 1e-4;
  std::size_t batch_size = 128;
  double weight_decay = 1e-3;
  std::size_t epochs = 100;
  std::uint64_t seed = 42;
  std::size_t min_freq = 3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  bool shuffle = true;
};

struct DecodeConfig {
  std::size_t max_length = 60;
};

struct PathsConfig {
  std::string base_graph;
  std::string lexicon;
};

struct GradCheckConfig {
  double step = 1e-5;
  double tolerance = 1e-4;
};

struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  DecodeConfig decode;
  PathsConfig paths;
  std::vector<std::string> fallback_labels;  // empty: every non-root base node
  GradCheckConfig gradcheck;

  TrainOptions train_options() const {
    TrainOptions o;
    o.epochs = train.epochs;
    o.batch_size = train.batch_size;
    o.shuffle = train.shuffle;
    o.seed = train.seed;
    o.adam = {train.learning_rate, train.beta1, train.beta2, train.eps, train.weight_decay};
    return o;
  }
};

inline std::string to_string(AblationMode m) {
  switch (m) {
    case AblationMode::kBase: return "base";
    case AblationMode::kDke: return "dke";
    case AblationMode::kSke: return "ske";
    case AblationMode::kFull: return "full";
  }
  return "full";
}

namespace detail {

class ConfigReader {
 public:
  ConfigReader(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ValidationError(path_ + " must be a JSON object");
  }

  // Rejects keys that no accessor asked for.
  void done() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ValidationError("unknown config key " + key(it.key()));
    }
  }

  ConfigReader child(const std::string& k) {
    seen_.insert(k);
    static const nlohmann::json kEmpty = nlohmann::json::object();
    return ConfigReader(j_.contains(k) ? j_[k] : kEmpty, key(k));
  }

  void count(const std::string& k, std::size_t& out) {
    if (!take(k)) return;
    const auto& v = j_[k];
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
      throw ValidationError(key(k) + " must be a non-negative integer");
    }
    out = v.get<std::size_t>();
  }

  void seed(const std::string& k, std::uint64_t& out) {
    if (!take(k)) return;
    const auto& v = j_[k];
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
      throw ValidationError(key(k) + " must be a non-negative integer");
    }
    out = v.get<std::uint64_t>();
  }

  void real(const std::string& k, double& out) {
    if (!take(k)) return;
    if (!j_[k].is_number()) throw ValidationError(key(k) + " must be a number");
    out = j_[k].get<double>();
  }

  void flag(const std::string& k, bool& out) {
    if (!take(k)) return;
    if (!j_[k].is_boolean()) throw ValidationError(key(k) + " must be true or false");
    out = j_[k].get<bool>();
  }

  void text(const std::string& k, std::string& out) {
    if (!take(k)) return;
    if (!j_[k].is_string()) throw ValidationError(key(k) + " must be a string");
    out = j_[k].get<std::string>();
  }

  void texts(const std::string& k, std::vector<std::string>& out) {
    if (!take(k)) return;
    const auto& v = j_[k];
    if (!v.is_array()) throw ValidationError(key(k) + " must be an array of strings");
    out.clear();
    for (const auto& e : v) {
      if (!e.is_string()) throw ValidationError(key(k) + " must be an array of strings");
      out.push_back(e.get<std::string>());
    }
  }

  void reals3(const std::string& k, std::array<double, 3>& out) {
    if (!take(k)) return;
    const auto& v = j_[k];
    if (!v.is_array() || v.size() != 3) throw ValidationError(key(k) + " must be an array of 3 numbers");
    for (std::size_t i = 0; i < 3; ++i) {
      if (!v[i].is_number()) throw ValidationError(key(k) + " must be an array of 3 numbers");
      out[i] = v[i].get<double>();
    }
  }

  template <typename E>
  void choice(const std::string& k, E& out, std::initializer_list<std::pair<const char*, E>> options) {
    if (!take(k)) return;
    std::string s;
    if (j_[k].is_string()) s = j_[k].get<std::string>();
    for (const auto& [name, value] : options) {
      if (s == name) {
        out = value;
        return;
      }
    }
    std::string names;
    for (const auto& [name, value] : options) names += std::string(names.empty() ? "" : "|") + name;
    throw ValidationError(key(k) + " must be one of " + names);
  }

 private:
  bool take(const std::string& k) {
    seen_.insert(k);
    return j_.contains(k);
  }
  std::string key(const std::string& k) const { return path_ + "." + k; }

  const nlohmann::json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace detail

inline RunConfig parse_config(const nlohmann::json& j) {
  RunConfig c;
  {
    detail::ConfigReader root(j, "config");
    {
      auto m = root.child("model");
      m.count("dim", c.model.dim);
      m.count("heads", c.model.heads);
      m.count("decoder_layers", c.model.decoder_layers);
      m.count("gcn_layers", c.model.gcn_layers);
      m.count("ffn_multiplier", c.model.ffn_multiplier);
      m.count("feature_dim", c.model.feature_dim);
      m.count("max_positions", c.model.max_positions);
      m.real("layer_norm_eps", c.model.layer_norm_eps);
      m.choice("positional", c.model.positional,
               {{"sinusoidal", PositionalKind::kSinusoidal}, {"learned", PositionalKind::kLearned}});
      m.choice("norm", c.model.norm, {{"post", NormPlacement::kPost}, {"pre", NormPlacement::kPre}});
      m.choice("view_fusion", c.model.view_fusion,
               {{"concat", ViewFusion::kConcat}, {"mean", ViewFusion::kMean}});
      m.choice("mode", c.model.mode,
               {{"base", AblationMode::kBase},
                {"dke", AblationMode::kDke},
                {"ske", AblationMode::kSke},
                {"full", AblationMode::kFull}});
      m.done();
    }
    {
      auto f = root.child("fusion");
      f.reals3("lambda", c.model.fusion_lambda);
      f.done();
    }
    {
      auto t = root.child("train");
      t.real("learning_rate", c.train.learning_rate);
      t.count("batch_size", c.train.batch_size);
      t.real("weight_decay", c.train.weight_decay);
      t.count("epochs", c.train.epochs);
      t.seed("seed", c.train.seed);
      t.count("min_freq", c.train.min_freq);
      t.real("beta1", c.train.beta1);
      t.real("beta2", c.train.beta2);
      t.real("eps", c.train.eps);
      t.flag("shuffle", c.train.shuffle);
      t.done();
    }
    {
      auto d = root.child("decode");
      d.count("max_length", c.decode.max_length);
      d.done();
    }
    {
      auto p = root.child("paths");
      p.text("base_graph", c.paths.base_graph);
      p.text("lexicon", c.paths.lexicon);
      p.done();
    }
    {
      auto k = root.child("knowledge");
      k.texts("fallback_labels", c.fallback_labels);
      k.done();
    }
    {
      auto g = root.child("gradcheck");
      g.real("step", c.gradcheck.step);
      g.real("tolerance", c.gradcheck.tolerance);
      g.done();
    }
    root.done();
  }
  if (c.model.heads == 0 || c.model.dim == 0 || c.model.dim % c.model.heads != 0) {
    throw ValidationError("config.model.dim (" + std::to_string(c.model.dim) +
                          ") must be a positive multiple of config.model.heads (" +
                          std::to_string(c.model.heads) + ")");
  }
  if (c.model.decoder_layers < 1) throw ValidationError("config.model.decoder_layers must be >= 1");
  if (c.model.gcn_layers < 1) throw ValidationError("config.model.gcn_layers must be >= 1");
  if (c.model.ffn_multiplier < 1) throw ValidationError("config.model.ffn_multiplier must be >= 1");
  if (c.train.batch_size < 1) throw ValidationError("config.train.batch_size must be >= 1");
  if (c.train.min_freq < 1) throw ValidationError("config.train.min_freq must be >= 1");
  if (!(c.train.learning_rate > 0.0)) throw ValidationError("config.train.learning_rate must be positive");
  if (c.train.weight_decay < 0.0) throw ValidationError("config.train.weight_decay must be >= 0");
  if (c.decode.max_length < 1) throw ValidationError("config.decode.max_length must be >= 1");
  if (!(c.gradcheck.step > 0.0)) throw ValidationError("config.gradcheck.step must be positive");
  FusionWeights::normalized(c.model.fusion_lambda);
  return c;
}

inline nlohmann::json config_to_json(const RunConfig& c) {
  auto positional = c.model.positional == PositionalKind::kLearned ? "learned" : "sinusoidal";
  auto norm = c.model.norm == NormPlacement::kPre ? "pre" : "post";
  auto fusion = c.model.view_fusion == ViewFusion::kMean ? "mean" : "concat";
  return {
      {"model",
       {{"dim", c.model.dim},
        {"heads", c.model.heads},
        {"decoder_layers", c.model.decoder_layers},
        {"gcn_layers", c.model.gcn_layers},
        {"ffn_multiplier", c.model.ffn_multiplier},
        {"feature_dim", c.model.feature_dim},
        {"max_positions", c.model.max_positions},
        {"layer_norm_eps", c.model.layer_norm_eps},
        {"positional", positional},
        {"norm", norm},
        {"view_fusion", fusion},
        {"mode", to_string(c.model.mode)}}},
      {"fusion", {{"lambda", c.model.fusion_lambda}}},
      {"train",
       {{"learning_rate", c.train.learning_rate},
        {"batch_size", c.train.batch_size},
        {"weight_decay", c.train.weight_decay},
        {"epochs", c.train.epochs},
        {"seed", c.train.seed},
        {"min_freq", c.train.min_freq},
        {"beta1", c.train.beta1},
        {"beta2", c.train.beta2},
        {"eps", c.train.eps},
        {"shuffle", c.train.shuffle}}},
      {"decode", {{"max_length", c.decode.max_length}}},
      {"paths", {{"base_graph", c.paths.base_graph}, {"lexicon", c.paths.lexicon}}},
      {"knowledge", {{"fallback_labels", c.fallback_labels}}},
      {"gradcheck", {{"step", c.gradcheck.step}, {"tolerance", c.gradcheck.tolerance}}},
  };
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(path.string() + ": malformed JSON (" + e.what() + ")");
  }
  return parse_config(j);
}

}  // namespace dmdk
