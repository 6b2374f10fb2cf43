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

#include <filesystem>

#include <json.hpp>

#include "osmosis/distiller/distill.hpp"

namespace osmosis::distill {

inline constexpr int kDodSchemaVersion = 2;

/// Current-schema manifest without tensor hashes.
nlohmann::json dod_manifest(const DistilledOsmosisSet& dod);

/// Upgrades an older dod.json to the current schema. Current manifests pass through.
nlohmann::json migrate_dod_manifest(const nlohmann::json& manifest);

void save_dod(const std::filesystem::path& dir, const DistilledOsmosisSet& dod);
DistilledOsmosisSet load_dod(const std::filesystem::path& dir);

}  // namespace osmosis::distill
