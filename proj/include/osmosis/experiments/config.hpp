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
#include <string>
#include <vector>

#include <json.hpp>

#include "osmosis/datasets/dataset.hpp"
#include "osmosis/defense/dpsgd.hpp"
#include "osmosis/defense/strip.hpp"
#include "osmosis/defense/tsne.hpp"
#include "osmosis/distiller/distill.hpp"
#include "osmosis/hijack/evaluation.hpp"
#include "osmosis/transporter/training.hpp"

namespace osmosis::experiments {

inline constexpr int kConfigSchemaVersion = 1;

/// Full configuration with every default materialized.
nlohmann::json default_config();

/// Merges `user` over the defaults. Unknown keys and type changes raise ConfigError naming the key.
nlohmann::json materialize_config(const nlohmann::json& user);

nlohmann::json load_config(const std::filesystem::path& path);

/// Applies "dotted.key=value"; the value is parsed as JSON when possible, else taken as a string.
void apply_override(nlohmann::json& config, const std::string& assignment);
void set_config_value(nlohmann::json& config, const std::string& dotted_key, const nlohmann::json& value);

/// SHA-256 of the canonical serialization.
std::string fingerprint(const nlohmann::json& config);

/// Checks cross-field invariants; throws ConfigError.
void validate_config(const nlohmann::json& config);

// Typed views of config sections.
datasets::DatasetSpec dataset_spec_from(const nlohmann::json& section, datasets::Role role);
transport::TransporterTrainConfig transporter_config_from(const nlohmann::json& config);
distill::DistillConfig distill_config_from(const nlohmann::json& config);
distill::ExpertTrainConfig expert_config_from(const nlohmann::json& config);
hijack::HijackConfig hijack_config_from(const nlohmann::json& config);
defense::StripConfig strip_config_from(const nlohmann::json& config);
defense::TsneConfig tsne_config_from(const nlohmann::json& config);

}  // namespace osmosis::experiments
