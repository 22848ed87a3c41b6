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

// Report text handling: tokenization, vocabulary, JSON-lines corpus records
// and a longest-match lexicon tagger that produces entity annotations.

#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "dmdk/entity.hpp"
#include "dmdk/error.hpp"
#include "dmdk/optim.hpp"
#include "json.hpp"

namespace dmdk {

using Tokens = std::vector<std::string>;

// Punctuation split off as standalone tokens.
inline constexpr std::string_view kPunctuation = ".,:;!?";

// Lowercases, splits on whitespace and detaches every character of
// kPunctuation into its own token.
inline Tokens tokenize(std::string_view text) {
  Tokens out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      flush();
    } else if (kPunctuation.find(ch) != std::string_view::npos) {
      flush();
      out.emplace_back(1, ch);
    } else {
      cur.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  flush();
  return out;
}

inline std::string join(std::span<const std::string> tokens, std::string_view sep = " ") {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += sep;
    out += tokens[i];
  }
  return out;
}

class Vocabulary {
 public:
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kBos = 1;
  static constexpr std::size_t kEos = 2;
  static constexpr std::size_t kUnk = 3;
  static constexpr std::array<std::string_view, 4> kSpecials = {"<pad>", "<bos>", "<eos>", "<unk>"};

  Vocabulary() {
    for (auto s : kSpecials) add(std::string(s));
  }

  // Rebuilds a vocabulary from its full token list (specials first).
  static Vocabulary from_tokens(std::span<const std::string> tokens) {
    if (tokens.size() < kSpecials.size()) throw ValidationError("vocabulary is missing special tokens");
    for (std::size_t i = 0; i < kSpecials.size(); ++i) {
      if (tokens[i] != kSpecials[i]) {
        throw ValidationError("vocabulary slot " + std::to_string(i) + " must be " +
                              std::string(kSpecials[i]));
      }
    }
    Vocabulary v;
    for (std::size_t i = kSpecials.size(); i < tokens.size(); ++i) {
      if (v.index_.count(tokens[i])) throw ValidationError("duplicate vocabulary token '" + tokens[i] + "'");
      v.add(tokens[i]);
    }
    return v;
  }

  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::string& token(std::size_t i) const { return tokens_.at(i); }
  bool contains(const std::string& t) const { return index_.count(t) > 0; }

  std::size_t index(const std::string& t) const {
    auto it = index_.find(t);
    return it == index_.end() ? kUnk : it->second;
  }

  std::vector<std::size_t> encode(std::span<const std::string> tokens) const {
    std::vector<std::size_t> out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) out.push_back(index(t));
    return out;
  }

  // Stops at EOS; PAD and BOS are dropped.
  Tokens decode(std::span<const std::size_t> ids) const {
    Tokens out;
    for (std::size_t id : ids) {
      if (id == kEos) break;
      if (id == kPad || id == kBos) continue;
      out.push_back(token(id));
    }
    return out;
  }

 private:
  void add(std::string t) {
    index_.emplace(t, tokens_.size());
    tokens_.push_back(std::move(t));
  }

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Keeps tokens seen at least `min_freq` times. Order: frequency descending,
// then lexicographic, so the result does not depend on report order.
inline Vocabulary build_vocab(std::span<const Tokens> reports, std::size_t min_freq) {
  if (min_freq < 1) throw ValidationError("min_freq must be at least 1");
  std::map<std::string, std::size_t> counts;
  for (const auto& r : reports)
    for (const auto& t : r) ++counts[t];
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (auto& [t, c] : counts) {
    if (c < min_freq) continue;
    bool special = false;
    for (auto s : Vocabulary::kSpecials) special = special || t == s;
    if (!special) kept.emplace_back(t, c);
  }
  std::stable_sort(kept.begin(), kept.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> tokens;
  for (auto s : Vocabulary::kSpecials) tokens.emplace_back(s);
  for (auto& [t, c] : kept) tokens.push_back(t);
  return Vocabulary::from_tokens(tokens);
}

struct CorpusRecord {
  std::string id;
  std::vector<std::string> features;  // 1 or 2 paths as written in the file
  std::string report;
  std::optional<EntitySequence> entities;
  std::filesystem::path base_dir;  // directory of the corpus file

  std::filesystem::path feature_path(std::size_t i) const {
    std::filesystem::path p(features.at(i));
    return p.is_absolute() ? p : base_dir / p;
  }
};

enum class CorpusUse { kTraining, kInference };

inline nlohmann::json entities_to_json(const EntitySequence& es) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& e : es) arr.push_back({{"text", e.text}, {"type", std::string(to_string(e.type))}});
  return arr;
}

inline nlohmann::json record_to_json(const CorpusRecord& r) {
  nlohmann::json j = {{"id", r.id}, {"features", r.features}, {"report", r.report}};
  if (r.entities) j["entities"] = entities_to_json(*r.entities);
  return j;
}

inline CorpusRecord parse_record(const nlohmann::json& j, CorpusUse use, const std::string& where) {
  auto fail = [&](const std::string& msg) { return ValidationError(where + ": " + msg); };
  if (!j.is_object()) throw fail("record is not a JSON object");
  CorpusRecord r;
  if (!j.contains("id")) throw fail("missing required field \"id\"");
  if (!j["id"].is_string()) throw fail("field \"id\" must be a string");
  r.id = j["id"].get<std::string>();
  if (!j.contains("features")) throw fail("missing required field \"features\"");
  const auto& f = j["features"];
  if (!f.is_array() || f.empty() || f.size() > 2) throw fail("field \"features\" must hold 1 or 2 paths");
  for (const auto& p : f) {
    if (!p.is_string()) throw fail("field \"features\" must hold strings");
    r.features.push_back(p.get<std::string>());
  }
  if (j.contains("report")) {
    if (!j["report"].is_string()) throw fail("field \"report\" must be a string");
    r.report = j["report"].get<std::string>();
  }
  if (use == CorpusUse::kTraining && r.report.empty()) {
    throw fail("missing required field \"report\" for record '" + r.id + "'");
  }
  if (j.contains("entities")) {
    const auto& es = j["entities"];
    if (!es.is_array()) throw fail("field \"entities\" must be an array");
    EntitySequence seq;
    for (const auto& e : es) {
      if (!e.is_object() || !e.contains("text") || !e.contains("type") || !e["text"].is_string() ||
          !e["type"].is_string()) {
        throw fail("entity entries need string \"text\" and \"type\"");
      }
      auto type = parse_entity_type(e["type"].get<std::string>());
      if (!type) throw fail("unknown entity type '" + e["type"].get<std::string>() + "'");
      seq.push_back({e["text"].get<std::string>(), *type});
    }
    r.entities = std::move(seq);
  }
  return r;
}

// One JSON object per line; blank lines are skipped.
inline std::vector<CorpusRecord> load_corpus(const std::filesystem::path& path,
                                             CorpusUse use = CorpusUse::kTraining) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open corpus " + path.string());
  std::vector<CorpusRecord> out;
  std::string line;
  std::size_t lineno = 0;
  const auto dir = path.parent_path();
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + ":" + std::to_string(lineno);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ValidationError(where + ": malformed JSON (" + e.what() + ")");
    }
    CorpusRecord r = parse_record(j, use, where);
    r.base_dir = dir;
    out.push_back(std::move(r));
  }
  return out;
}

inline void write_corpus(const std::filesystem::path& path, std::span<const CorpusRecord> records) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& r : records) out << record_to_json(r).dump() << "\n";
}

struct CorpusSplit {
  std::vector<CorpusRecord> train;
  std::vector<CorpusRecord> validation;
  std::vector<CorpusRecord> test;
};

// Partitions by integer ratios using largest-remainder rounding, after an
// optional seeded shuffle. Default ratio 7:1:2.
inline CorpusSplit partition(std::vector<CorpusRecord> records,
                             std::array<std::size_t, 3> ratio = {7, 1, 2},
                             std::optional<std::uint64_t> shuffle_seed = std::nullopt) {
  const std::size_t total = ratio[0] + ratio[1] + ratio[2];
  if (total == 0) throw ValidationError("split ratio must not be all zero");
  if (shuffle_seed) {
    Rng rng(*shuffle_seed);
    rng.shuffle(records);
  }
  const std::size_t n = records.size();
  std::array<std::size_t, 3> count{};
  std::array<std::size_t, 3> rem{};
  std::size_t assigned = 0;
  for (int i = 0; i < 3; ++i) {
    count[i] = n * ratio[i] / total;
    rem[i] = n * ratio[i] % total;
    assigned += count[i];
  }
  while (assigned < n) {
    int best = 0;
    for (int i = 1; i < 3; ++i)
      if (rem[i] > rem[best]) best = i;
    ++count[best];
    rem[best] = 0;
    ++assigned;
  }
  CorpusSplit s;
  auto it = std::make_move_iterator(records.begin());
  s.train.assign(it, it + count[0]);
  s.validation.assign(it + count[0], it + count[0] + count[1]);
  s.test.assign(it + count[0] + count[1], std::make_move_iterator(records.end()));
  return s;
}

class Lexicon {
 public:
  void add(std::string_view term, EntityType type) {
    Tokens key = tokenize(term);
    if (key.empty()) throw ValidationError("lexicon term is empty");
    longest_ = std::max(longest_, key.size());
    terms_[std::move(key)] = type;
  }

  std::optional<EntityType> find(std::span<const std::string> tokens) const {
    auto it = terms_.find(Tokens(tokens.begin(), tokens.end()));
    if (it == terms_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t longest_term() const { return longest_; }
  std::size_t size() const { return terms_.size(); }
  bool empty() const { return terms_.empty(); }
  const std::map<Tokens, EntityType>& terms() const { return terms_; }

 private:
  std::map<Tokens, EntityType> terms_;
  std::size_t longest_ = 0;
};

// Lines are `term<TAB>TYPE`; '#' starts a comment line.
inline Lexicon load_lexicon(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open lexicon " + path.string());
  Lexicon lex;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos || line.front() == '#') continue;
    const auto tab = line.find('\t');
    const std::string where = path.string() + ":" + std::to_string(lineno);
    if (tab == std::string::npos) throw ValidationError(where + ": expected term<TAB>TYPE");
    auto type = parse_entity_type(line.substr(tab + 1));
    if (!type) throw ValidationError(where + ": unknown entity type '" + line.substr(tab + 1) + "'");
    try {
      lex.add(line.substr(0, tab), *type);
    } catch (const ValidationError& e) {
      throw ValidationError(where + ": " + e.what());
    }
  }
  return lex;
}

// Left-to-right scan taking the longest lexicon term at each position.
inline EntitySequence lexicon_tag(std::span<const std::string> tokens, const Lexicon& lexicon) {
  EntitySequence out;
  std::size_t i = 0;
  while (i < tokens.size()) {
    std::size_t matched = 0;
    const std::size_t max_len = std::min(lexicon.longest_term(), tokens.size() - i);
    for (std::size_t len = max_len; len >= 1; --len) {
      if (auto type = lexicon.find(tokens.subspan(i, len))) {
        out.push_back({join(tokens.subspan(i, len)), *type});
        matched = len;
        break;
      }
    }
    i += matched ? matched : 1;
  }
  return out;
}

}  // namespace dmdk
