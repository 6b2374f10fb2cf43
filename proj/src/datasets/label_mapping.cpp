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

#include "osmosis/datasets/label_mapping.hpp"

#include <set>

#include "osmosis/core/error.hpp"
#include "osmosis/core/seed.hpp"

namespace osmosis::datasets {

std::string to_string(MappingStrategy s) { return s == MappingStrategy::identity ? "identity" : "random"; }

MappingStrategy parse_mapping_strategy(const std::string& name) {
  if (name == "identity") return MappingStrategy::identity;
  if (name == "random") return MappingStrategy::random;
  throw ConfigError("unknown mapping strategy '" + name + "'");
}

std::int64_t LabelMapping::to_hijack(std::int64_t y_o) const {
  for (const auto& [o, h] : pairs) {
    if (o == y_o) return h;
  }
  throw ConfigError("original class " + std::to_string(y_o) + " is not in the label mapping");
}

std::optional<std::int64_t> LabelMapping::to_original(std::int64_t y_h) const {
  for (const auto& [o, h] : pairs) {
    if (h == y_h) return o;
  }
  return std::nullopt;
}

std::vector<std::int64_t> LabelMapping::hijack_classes() const {
  std::vector<std::int64_t> out;
  for (const auto& p : pairs) out.push_back(p.second);
  return out;
}

bool LabelMapping::injective() const {
  std::set<std::int64_t> domain;
  std::set<std::int64_t> image;
  for (const auto& [o, h] : pairs) {
    if (!domain.insert(o).second || !image.insert(h).second) return false;
  }
  return true;
}

nlohmann::json LabelMapping::to_json() const {
  nlohmann::json pj = nlohmann::json::array();
  for (const auto& [o, h] : pairs) pj.push_back({o, h});
  return {{"strategy", to_string(strategy)}, {"seed", seed}, {"pairs", pj}};
}

LabelMapping LabelMapping::from_json(const nlohmann::json& j) {
  LabelMapping m;
  try {
    m.strategy = parse_mapping_strategy(j.at("strategy").get<std::string>());
    m.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& p : j.at("pairs")) m.pairs.emplace_back(p.at(0).get<std::int64_t>(), p.at(1).get<std::int64_t>());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed label mapping: ") + e.what());
  }
  require(m.injective(), "label mapping is not injective");
  return m;
}

LabelMapping make_label_mapping(std::int64_t n_original, std::int64_t n_hijack, MappingStrategy strategy,
                                std::uint64_t seed) {
  require(n_original >= 1, "label mapping needs at least one original class");
  if (n_hijack < n_original) {
    throw ConfigError("cannot map " + std::to_string(n_original) + " original classes injectively into " +
                      std::to_string(n_hijack) + " hijacking classes");
  }
  LabelMapping m;
  m.strategy = strategy;
  m.seed = seed;
  if (strategy == MappingStrategy::identity) {
    for (std::int64_t i = 0; i < n_original; ++i) m.pairs.emplace_back(i, i);
  } else {
    const auto perm = seeded_permutation(n_hijack, seed);
    for (std::int64_t i = 0; i < n_original; ++i) m.pairs.emplace_back(i, perm[static_cast<std::size_t>(i)]);
  }
  return m;
}

}  // namespace osmosis::datasets
