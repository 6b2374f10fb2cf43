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

#include <json.hpp>

namespace osmosis::transport {

struct TransporterConfig {
  std::int64_t depth = 3;
  std::int64_t base_width = 32;
  std::int64_t resolution = 32;
  std::int64_t channels = 3;

  /// Channels entering the decoder: both encoder bottlenecks concatenated.
  std::int64_t bottleneck_channels() const;
  nlohmann::json to_json() const;
  static TransporterConfig from_json(const nlohmann::json& j);
};

/// Largest depth d with resolution divisible by 2^d.
std::int64_t max_legal_depth(std::int64_t resolution);

/// Dual-encoder U-Net. Skip connections come from the original-image encoder only.
class TransporterImpl : public torch::nn::Module {
 public:
  explicit TransporterImpl(const TransporterConfig& cfg);

  torch::Tensor forward(const torch::Tensor& x_o, const torch::Tensor& x_h);
  const TransporterConfig& config() const { return cfg_; }

 private:
  TransporterConfig cfg_;
  torch::nn::ModuleList encoder_original_{nullptr};
  torch::nn::ModuleList encoder_hijack_{nullptr};
  torch::nn::ModuleList up_{nullptr};
  torch::nn::ModuleList decoder_{nullptr};
  torch::nn::Conv2d head_{nullptr};
};
TORCH_MODULE(Transporter);

/// Throws ConfigError naming the maximum legal depth when resolution is not divisible by 2^depth.
Transporter build_transporter(std::int64_t input_resolution, TransporterConfig cfg, std::uint64_t seed = 0);

/// x_c = T(x_o, x_h) in evaluation mode without autograd. Accepts single images or batches.
torch::Tensor transport(Transporter& model, const torch::Tensor& x_o, const torch::Tensor& x_h,
                        std::int64_t batch_size = 256);

void save_transporter(const std::filesystem::path& dir, const Transporter& model, const nlohmann::json& extra = {});
/// Returns the model and the full config.json of the checkpoint.
std::pair<Transporter, nlohmann::json> load_transporter(const std::filesystem::path& dir);

}  // namespace osmosis::transport
