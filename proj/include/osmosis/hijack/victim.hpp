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

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "osmosis/datasets/pairing.hpp"
#include "osmosis/models/classifier.hpp"

namespace osmosis::hijack {

struct VictimSpec {
  models::ArchSpec arch;
  /// Checkpoint directory with backbone weights; empty trains from scratch.
  std::string pretrained;
};

struct FinetuneConfig {
  std::int64_t epochs = 300;
  std::int64_t batch_size = 64;
  double lr = 0.01;
};

/// Builds a victim. A pretrained backbone is loaded without its head, which is re-drawn.
models::ClassifierPtr make_victim(const VictimSpec& spec, std::uint64_t seed);

/// Adam on soft cross-entropy against the targets. Returns the mean loss per epoch.
/// Throws DivergenceError with the epoch index on a non-finite loss.
std::vector<double> finetune_victim(models::Classifier& victim, const datasets::TrainingSet& data,
                                    const FinetuneConfig& cfg, std::uint64_t seed);

}  // namespace osmosis::hijack
