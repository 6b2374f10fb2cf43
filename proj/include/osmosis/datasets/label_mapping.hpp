/*
 * Copyright 2026 Osmosis Contributors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace osmosis::datasets {

enum class MappingStrategy { identity, random };

std::string to_string(MappingStrategy s);
MappingStrategy parse_mapping_strategy(const std::string& name);

/// Injective map from original-task classes to hijacking-task classes.
struct LabelMapping {
  MappingStrategy strategy = MappingStrategy::identity;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::int64_t, std::int64_t>> pairs;

  std::int64_t size() const { return static_cast<std::int64_t>(pairs.size()); }
  /// Hijacking class assigned to original class `y_o`.
  std::int64_t to_hijack(std::int64_t y_o) const;
  /// Original class that encodes hijacking class `y_h`, if `y_h` is in the image of the map.
  std::optional<std::int64_t> to_original(std::int64_t y_h) const;
  std::vector<std::int64_t> hijack_classes() const;
  bool injective() const;

  nlohmann::json to_json() const;
  static LabelMapping from_json(const nlohmann::json& j);
  bool operator==(const LabelMapping&) const = default;
};

/// identity maps i -> i; random draws a seeded injection. Only the first n_original hijacking
/// classes of the image participate when n_hijack > n_original.
LabelMapping make_label_mapping(std::int64_t n_original, std::int64_t n_hijack, MappingStrategy strategy,
                                std::uint64_t seed);

}  // namespace osmosis::datasets
