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

// Disease topic labels: anatomy/finding pairs mined from an entity sequence,
// their embedding and their use as keys for visual cross-attention.

#pragma once

#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "dmdk/attention.hpp"
#include "dmdk/entity.hpp"
#include "dmdk/text.hpp"

namespace dmdk {

enum class LabelSource { kDynamic, kBaseFallback };

struct DiseaseTopicLabels {
  std::vector<std::string> tags;
  LabelSource source = LabelSource::kDynamic;
};

// Indices i where entity i is ANATOMY and entity i+1 is not. Each such i
// yields the pair (entity i, entity i+1).
inline std::vector<std::size_t> anatomy_pair_starts(const EntitySequence& entities) {
  std::vector<std::size_t> starts;
  for (std::size_t i = 0; i + 1 < entities.size(); ++i) {
    if (entities[i].type == EntityType::kAnatomy && entities[i + 1].type != EntityType::kAnatomy) {
      starts.push_back(i);
    }
  }
  return starts;
}

// Flattened pair emissions before deduplication:
// anatomy, finding, anatomy, finding, ...
inline std::vector<std::string> raw_topic_tags(const EntitySequence& entities) {
  std::vector<std::string> tags;
  for (std::size_t i : anatomy_pair_starts(entities)) {
    tags.push_back(entities[i].text);
    tags.push_back(entities[i + 1].text);
  }
  return tags;
}

inline DiseaseTopicLabels extract_topic_labels(const EntitySequence& entities,
                                               const std::vector<std::string>& base_labels) {
  if (base_labels.empty()) throw ValidationError("base topic labels must not be empty");
  DiseaseTopicLabels out;
  std::unordered_set<std::string> seen;
  for (auto& t : raw_topic_tags(entities))
    if (seen.insert(t).second) out.tags.push_back(std::move(t));
  if (out.tags.empty()) {
    out.tags = base_labels;
    out.source = LabelSource::kBaseFallback;
  }
  return out;
}

// One row per tag: the mean of the tag's token embeddings plus the
// positional encoding of position 0. Unknown tokens map to UNK.
inline Var encode_labels(const DiseaseTopicLabels& labels, const EmbeddingTable& table,
                         const Vocabulary& vocab) {
  if (labels.tags.empty()) throw ValidationError("cannot encode an empty label set");
  std::vector<Var> rows;
  rows.reserve(labels.tags.size());
  for (const auto& tag : labels.tags) {
    std::vector<std::size_t> ids = vocab.encode(tokenize(tag));
    if (ids.empty()) ids.push_back(Vocabulary::kUnk);
    const double w = 1.0 / static_cast<double>(ids.size());
    Var pool = constant(Matrix(1, ids.size(), w));
    rows.push_back(matmul(pool, gather_rows(table.tokens, ids)));
  }
  std::vector<std::size_t> zeros(labels.tags.size(), 0);
  return add(concat_rows(rows), table.positions(zeros));
}

// Visual features attend over label rows: MHA(X, W).
inline Var enhance_visual(const Var& visual, const Var& labels, const MhaParams& params) {
  if (visual->value.cols() != labels->value.cols()) {
    throw ShapeError("enhance_visual: visual width " + std::to_string(visual->value.cols()) +
                     " differs from label width " + std::to_string(labels->value.cols()));
  }
  return multi_head_attention(visual, labels, params);
}

}  // namespace dmdk
