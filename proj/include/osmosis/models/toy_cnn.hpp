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
#include <string>
#include <vector>

#include "osmosis/models/classifier.hpp"

namespace osmosis::models {

/// Parameter layout of the small ConvNet used as surrogate and desk-scale victim:
/// `depth` blocks of [conv3x3 -> instance norm (affine) -> ReLU -> avgpool2], then a linear head.
/// The same layout backs both the module and the flat-vector functional form that
/// trajectory matching differentiates through.
struct ToyCnnLayout {
  std::int64_t width = 32;
  std::int64_t depth = 3;
  std::int64_t num_classes = 10;
  std::int64_t resolution = 32;
  std::int64_t channels = 3;

  struct Entry {
    std::string name;
    std::vector<std::int64_t> shape;
    std::int64_t numel;
  };
  std::vector<Entry> entries() const;
  std::int64_t numel() const;
  std::int64_t feature_dim() const;
};

/// Splits a flat parameter vector into shaped views following `layout`.
std::vector<torch::Tensor> unflatten_params(const torch::Tensor& flat, const ToyCnnLayout& layout);

/// Default initialization as a flat vector: weights uniform in +-1/sqrt(fan_in), zero biases,
/// unit norm scale.
torch::Tensor init_toy_cnn_params(const ToyCnnLayout& layout, torch::Generator& gen);

torch::Tensor toy_cnn_features(const torch::Tensor& x, const std::vector<torch::Tensor>& params,
                               const ToyCnnLayout& layout);
torch::Tensor toy_cnn_logits(const torch::Tensor& x, const std::vector<torch::Tensor>& params,
                             const ToyCnnLayout& layout);

/// Functional forward over a flat parameter vector; differentiable in both arguments.
torch::Tensor toy_cnn_forward(const torch::Tensor& x, const torch::Tensor& flat, const ToyCnnLayout& layout);

class ToyCnn : public Classifier {
 public:
  explicit ToyCnn(ToyCnnLayout layout, std::uint64_t seed = 0);

  torch::Tensor features(const torch::Tensor& x) override;
  torch::Tensor head(const torch::Tensor& f) override;
  std::string head_prefix() const override { return "fc_"; }
  std::int64_t feature_dim() const override { return layout_.feature_dim(); }

  const ToyCnnLayout& layout() const { return layout_; }
  torch::Tensor flat_parameters() const;
  void set_flat_parameters(const torch::Tensor& flat);

 private:
  ToyCnnLayout layout_;
  std::vector<torch::Tensor> params_;
};

}  // namespace osmosis::models
