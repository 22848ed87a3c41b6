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

#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dmdk/error.hpp"

namespace dmdk {

// The five radiology entity classes of the clinical NER tag set.
enum class EntityType {
  kAnatomy,
  kObservation,
  kAnatomyModifier,
  kObservationModifier,
  kUncertainty,
};

inline constexpr std::array<EntityType, 5> kAllEntityTypes = {
    EntityType::kAnatomy, EntityType::kObservation, EntityType::kAnatomyModifier,
    EntityType::kObservationModifier, EntityType::kUncertainty};

inline std::string_view to_string(EntityType t) {
  switch (t) {
    case EntityType::kAnatomy: return "ANATOMY";
    case EntityType::kObservation: return "OBSERVATION";
    case EntityType::kAnatomyModifier: return "ANATOMY_MODIFIER";
    case EntityType::kObservationModifier: return "OBSERVATION_MODIFIER";
    case EntityType::kUncertainty: return "UNCERTAINTY";
  }
  return "UNKNOWN";
}

inline std::optional<EntityType> parse_entity_type(std::string_view s) {
  for (EntityType t : kAllEntityTypes)
    if (to_string(t) == s) return t;
  return std::nullopt;
}

struct Entity {
  std::string text;
  EntityType type;

  friend bool operator==(const Entity&, const Entity&) = default;
};

using EntitySequence = std::vector<Entity>;

}  // namespace dmdk
