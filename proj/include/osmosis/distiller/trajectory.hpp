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

#include "osmosis/models/toy_cnn.hpp"

namespace osmosis::distill {

struct ExpertTrainConfig {
  double lr = 0.01;
  std::int64_t batch_size = 64;
  std::int64_t epochs = 6;
  /// Total SGD steps; negative means epochs * floor(n / batch_size).
  std::int64_t steps = -1;
  std::int64_t snapshot_interval = 10;
};

/// Parameter snapshots of a surrogate trained with plain SGD, initialization first.
struct ExpertTrajectory {
  torch::Tensor snapshots;
  std::int64_t snapshot_interval = 10;
  std::string arch_id = "toy_cnn";
  models::ToyCnnLayout layout;
  std::uint64_t seed = 0;

  std::int64_t num_snapshots() const { return snapshots.defined() ? snapshots.size(0) : 0; }
  std::int64_t param_count() const { return snapshots.size(1); }
};

/// Trains the functional surrogate on (images, labels) and records a snapshot every
/// `snapshot_interval` steps. Throws DivergenceError with the step index on a non-finite loss.
ExpertTrajectory record_expert_trajectory(const torch::Tensor& images, const torch::Tensor& labels,
                                          const std::string& surrogate_arch, const models::ToyCnnLayout& layout,
                                          const ExpertTrainConfig& cfg, std::uint64_t seed);

/// ||theta_hat - b||^2 / ||a - b||^2. Throws ConfigError on a zero denominator.
torch::Tensor trajectory_loss(const torch::Tensor& theta_hat, const torch::Tensor& theta_start,
                              const torch::Tensor& theta_target);

void save_trajectory(const std::filesystem::path& dir, const ExpertTrajectory& trajectory);
ExpertTrajectory load_trajectory(const std::filesystem::path& dir);

/// Buffer directory holding expert_000, expert_001, ...
void save_trajectory_buffer(const std::filesystem::path& dir, const std::vector<ExpertTrajectory>& buffer);
std::vector<ExpertTrajectory> load_trajectory_buffer(const std::filesystem::path& dir);

}  // namespace osmosis::distill
