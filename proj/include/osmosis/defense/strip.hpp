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
#include <vector>

#include <json.hpp>

#include "osmosis/models/classifier.hpp"

namespace osmosis::defense {

struct StripConfig {
  std::int64_t n_perturbations = 100;
  double blend_alpha = 0.5;
  std::int64_t bins = 50;
};

/// Shannon entropy (natural log) of each row of a probability matrix, clamped to [0, ln K].
torch::Tensor shannon_entropy(const torch::Tensor& probabilities);

/// Mean entropy of the victim's output over blends query * (1 - alpha) + overlay * alpha with
/// overlays drawn from `overlay_pool` (N, C, H, W).
double strip_probe(models::Classifier& victim, const torch::Tensor& query, const torch::Tensor& overlay_pool,
                   std::int64_t n_perturbations, double blend_alpha, std::uint64_t seed);

/// Histogram intersection of the normalized histograms of a and b over `bins` shared bins.
double histogram_overlap(const std::vector<double>& a, const std::vector<double>& b, std::int64_t bins);

struct StripResult {
  std::vector<double> entropies_attack;
  std::vector<double> entropies_benign;
  std::int64_t n_perturbations = 0;
  double blend_alpha = 0.0;
  double overlap_statistic = 0.0;

  nlohmann::ordered_json to_json() const;
};

StripResult strip_report(models::Classifier& victim, const torch::Tensor& attack_queries,
                         const torch::Tensor& benign_queries, const torch::Tensor& overlay_pool,
                         const StripConfig& cfg, std::uint64_t seed);

}  // namespace osmosis::defense
