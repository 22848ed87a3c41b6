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


// Small random problems for gradient checking when no corpus is at hand.

#pragma once

#include <string>
#include <vector>

#include "dmdk/model.hpp"

namespace dmdk {

struct SyntheticProblem {
  ModelContext context;
  std::vector<Sample> samples;
};

// Vocabulary of the four specials plus `words` tokens w0..; every report
// mentions the first non-root node of `base` as anatomy followed by one
// observation word, so both knowledge branches carry signal.
inline SyntheticProblem make_synthetic_problem(KnowledgeGraph base, std::size_t feature_dim,
                                               std::size_t words, std::size_t count, std::uint64_t seed,
                                               std::size_t feature_tokens = 4, std::size_t report_len = 5) {
  if (words == 0 || count == 0 || feature_dim == 0) throw ValidationError("synthetic problem sizes must be positive");
  const auto organs = base.non_root_names();
  if (organs.empty()) throw ValidationError("synthetic problem needs a non-root base node");
  Rng rng(seed);
  std::vector<std::string> tokens;
  for (auto s : Vocabulary::kSpecials) tokens.emplace_back(s);
  for (std::size_t i = 0; i < words; ++i) tokens.push_back("w" + std::to_string(i));
  SyntheticProblem p;
  p.context.vocab = Vocabulary::from_tokens(tokens);
  for (const auto& n : base.nodes()) p.context.nodes.add(n.name);
  p.context.fallback_labels = organs;
  p.context.base_graph = std::move(base);
  for (std::size_t k = 0; k < count; ++k) {
    Tokens report;
    for (std::size_t t = 0; t < report_len; ++t) report.push_back(tokens[4 + rng.index(words)]);
    EntitySequence ents{{organs.front(), EntityType::kAnatomy}, {report.front(), EntityType::kObservation}};
    p.context.nodes.add(report.front());
    std::vector<Matrix> views{normal_matrix(feature_tokens, feature_dim, 1.0, rng)};
    p.samples.push_back(make_sample("s" + std::to_string(k), std::move(views), std::move(ents), report, p.context));
  }
  return p;
}

}  // namespace dmdk
