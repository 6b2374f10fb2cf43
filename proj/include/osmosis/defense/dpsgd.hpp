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
#include <functional>
#include <limits>
#include <string>

#include <json.hpp>

#include "osmosis/datasets/pairing.hpp"
#include "osmosis/hijack/victim.hpp"
#include "osmosis/models/classifier.hpp"

namespace osmosis::defense {

struct PrivacyConfig {
  double epsilon = 8.0;
  double delta = 1e-5;
  double clip_norm = 1.0;
  /// Negative values are calibrated from epsilon for the run's step count. Zero disables noise,
  /// which is only accepted with an infinite epsilon.
  double noise_multiplier = -1.0;
  std::string accountant = "rdp";

  void validate() const;
};

struct DpsgdReport {
  double epsilon_target = 0.0;
  double epsilon_spent = 0.0;
  double delta = 0.0;
  double noise_multiplier = 0.0;
  double clip_norm = 0.0;
  double sampling_rate = 0.0;
  std::int64_t steps = 0;
  std::int64_t planned_steps = 0;
  bool aborted = false;
  double max_clipped_norm = 0.0;
  std::vector<double> epoch_losses;

  nlohmann::ordered_json to_json() const;
};

/// Called with the norm of every per-sample gradient after clipping.
using ClipObserver = std::function<void(double clipped_norm)>;

/// DP-SGD with Adam: per-sample clipping, Gaussian noise of std noise_multiplier * clip_norm on
/// the summed gradient, division by the batch size. Stops early when the spent epsilon would
/// exceed the target.
DpsgdReport dpsgd_finetune(models::Classifier& victim, const datasets::TrainingSet& data,
                           const PrivacyConfig& privacy, const hijack::FinetuneConfig& cfg, std::uint64_t seed,
                           const ClipObserver& observer = {});

}  // namespace osmosis::defense
