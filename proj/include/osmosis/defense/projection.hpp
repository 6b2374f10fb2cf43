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

#include <torch/torch.h>

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "osmosis/defense/tsne.hpp"
#include "osmosis/distiller/distill.hpp"
#include "osmosis/hijack/evaluation.hpp"
#include "osmosis/models/classifier.hpp"

namespace osmosis::defense {

struct LabeledInputs {
  torch::Tensor images;
  std::vector<std::string> tags;
  std::vector<std::int64_t> class_ids;
};

struct FeatureProjection {
  torch::Tensor points;
  std::vector<std::string> tags;
  std::vector<std::int64_t> class_ids;
  nlohmann::json method_params;

  nlohmann::ordered_json to_json() const;
  /// Columns x, y, tag, class.
  void write_csv(const std::filesystem::path& path) const;
};

/// Penultimate-layer activations of the victim reduced to 2-D with t-SNE.
FeatureProjection feature_projection(models::Classifier& victim, const LabeledInputs& inputs, const TsneConfig& cfg,
                                     std::uint64_t seed);

/// One EvalReport per victim architecture, each fine-tuned on the DOD with `base` settings.
std::vector<hijack::EvalReport> cross_arch_eval(const distill::DistilledOsmosisSet& dod,
                                                const std::string& surrogate_arch,
                                                const std::vector<models::Arch>& victim_archs,
                                                transport::Transporter* transporter, const torch::Tensor& carrier,
                                                const hijack::TestSets& tests, const hijack::HijackConfig& base,
                                                std::uint64_t seed, const std::string& fingerprint);

}  // namespace osmosis::defense
