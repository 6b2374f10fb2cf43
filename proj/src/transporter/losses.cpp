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

#include "osmosis/transporter/losses.hpp"

#include "osmosis/core/error.hpp"

namespace osmosis::transport {

void LossWeights::validate() const {
  require(lambda_v >= 0.0 && lambda_s >= 0.0, "loss weights must be nonnegative");
  require(lambda_v > 0.0 || lambda_s > 0.0, "loss weights must not both be zero");
}

FeatureExtractor::FeatureExtractor(models::ClassifierPtr backbone, std::string tap_point)
    : backbone_(std::move(backbone)), tap_point_(std::move(tap_point)) {
  require(backbone_ != nullptr, "feature extractor needs a backbone");
  require(tap_point_ == "penultimate", "unsupported feature tap point '" + tap_point_ + "'");
}

bool FeatureExtractor::frozen() const { return models::is_frozen(*backbone_); }

torch::Tensor FeatureExtractor::operator()(const torch::Tensor& x) const {
  require(frozen(), "feature extractor must be frozen");
  require(!backbone_->is_training(), "feature extractor must be in evaluation mode");
  return backbone_->features(x);
}

torch::Tensor visual_loss(const torch::Tensor& x_c, const torch::Tensor& x_o) {
  require(x_c.sizes() == x_o.sizes(), "visual_loss: shape mismatch");
  return (x_c - x_o).abs().mean();
}

torch::Tensor semantic_loss(const FeatureExtractor& extractor, const torch::Tensor& x_c, const torch::Tensor& x_h) {
  require(x_c.sizes() == x_h.sizes(), "semantic_loss: shape mismatch");
  return (extractor(x_c) - extractor(x_h)).abs().mean();
}

torch::Tensor total_loss(const LossWeights& weights, const torch::Tensor& x_c, const torch::Tensor& x_o,
                         const torch::Tensor& x_h, const FeatureExtractor& extractor) {
  weights.validate();
  auto total = torch::zeros({}, x_c.options());
  if (weights.lambda_v != 0.0) total = total + weights.lambda_v * visual_loss(x_c, x_o);
  if (weights.lambda_s != 0.0) total = total + weights.lambda_s * semantic_loss(extractor, x_c, x_h);
  return total;
}

}  // namespace osmosis::transport
