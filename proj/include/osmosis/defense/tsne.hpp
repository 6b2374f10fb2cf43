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

#include <json.hpp>

namespace osmosis::defense {

struct TsneConfig {
  double perplexity = 30.0;
  std::int64_t iterations = 1000;
  double learning_rate = 200.0;
  double early_exaggeration = 12.0;
  std::int64_t exaggeration_iterations = 250;

  nlohmann::json to_json() const;
};

/// Exact t-SNE of the rows of `features` (N, D) into two dimensions. Requires N > perplexity.
torch::Tensor tsne(const torch::Tensor& features, const TsneConfig& cfg, std::uint64_t seed);

/// Mean silhouette coefficient of `points` (N, D) under integer `labels` (N), Euclidean distance.
double silhouette_score(const torch::Tensor& points, const torch::Tensor& labels);

}  // namespace osmosis::defense
