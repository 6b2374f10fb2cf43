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

#include <string>

#include "osmosis/models/classifier.hpp"

namespace osmosis::transport {

struct LossWeights {
  double lambda_v = 1.0;
  double lambda_s = 1.0;

  void validate() const;
};

/// Frozen classifier tapped at its penultimate layer.
class FeatureExtractor {
 public:
  explicit FeatureExtractor(models::ClassifierPtr backbone, std::string tap_point = "penultimate");

  /// Throws ConfigError if any backbone parameter is trainable.
  torch::Tensor operator()(const torch::Tensor& x) const;
  bool frozen() const;
  std::int64_t output_dim() const { return backbone_->feature_dim(); }
  const std::string& tap_point() const { return tap_point_; }
  models::Classifier& backbone() const { return *backbone_; }

 private:
  models::ClassifierPtr backbone_;
  std::string tap_point_;
};

/// Mean absolute difference between x_c and x_o.
torch::Tensor visual_loss(const torch::Tensor& x_c, const torch::Tensor& x_o);

/// Mean absolute difference between F(x_c) and F(x_h).
torch::Tensor semantic_loss(const FeatureExtractor& extractor, const torch::Tensor& x_c, const torch::Tensor& x_h);

torch::Tensor total_loss(const LossWeights& weights, const torch::Tensor& x_c, const torch::Tensor& x_o,
                         const torch::Tensor& x_h, const FeatureExtractor& extractor);

}  // namespace osmosis::transport
