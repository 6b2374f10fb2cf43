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
#include <memory>
#include <string>
#include <string_view>

namespace osmosis::models {

enum class Arch {
  toy_cnn,
  toy_resnet,
  resnet18,
  vgg16,
  densenet121,
  mobilenetv2,
  mobilenetv3,
  mnasnet,
  convnext_t,
};

std::string to_string(Arch arch);
Arch parse_arch(std::string_view name);

struct ArchSpec {
  Arch arch = Arch::toy_cnn;
  std::int64_t num_classes = 10;
  /// Base channel width; only the toy architectures use it.
  std::int64_t width = 32;
  /// Input side length in pixels. Standard architectures switch to a small-input stem at <= 64.
  std::int64_t resolution = 32;
};

/// An image classifier split at its penultimate layer.
class Classifier : public torch::nn::Module {
 public:
  /// Penultimate-layer activations, shape (N, feature_dim()).
  virtual torch::Tensor features(const torch::Tensor& x) = 0;
  /// Classification head applied to features(), returning logits.
  virtual torch::Tensor head(const torch::Tensor& features) = 0;
  /// Parameter-name prefix of the classification head.
  virtual std::string head_prefix() const = 0;
  virtual std::int64_t feature_dim() const = 0;

  torch::Tensor forward(const torch::Tensor& x) { return head(features(x)); }
  torch::Tensor probabilities(const torch::Tensor& x) { return torch::softmax(forward(x), 1); }
};

using ClassifierPtr = std::shared_ptr<Classifier>;

/// Builds an untrained classifier. Parameter initialization is seeded.
ClassifierPtr make_classifier(const ArchSpec& spec, std::uint64_t seed = 0);

/// Fresh classifier of the same architecture holding a copy of `source`'s state.
ClassifierPtr clone_classifier(const Classifier& source, const ArchSpec& spec);

/// Re-draws the head parameters with the default initializer.
void reset_head(Classifier& model, std::uint64_t seed);

void freeze(Classifier& model);
bool is_frozen(const Classifier& model);

std::int64_t parameter_count(const torch::nn::Module& module);

/// Batched inference in evaluation mode without autograd; restores the previous mode.
torch::Tensor predict_logits(Classifier& model, const torch::Tensor& images, std::int64_t batch_size = 256);
torch::Tensor extract_features(Classifier& model, const torch::Tensor& images, std::int64_t batch_size = 256);

}  // namespace osmosis::models
