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

#include "osmosis/transporter/transporter.hpp"

#include "osmosis/core/error.hpp"
#include "osmosis/core/tensor_io.hpp"

namespace osmosis::transport {

namespace nn = torch::nn;
namespace F = torch::nn::functional;

namespace {

nn::Sequential double_conv(std::int64_t in, std::int64_t out) {
  return nn::Sequential(nn::Conv2d(nn::Conv2dOptions(in, out, 3).padding(1)), nn::BatchNorm2d(out), nn::ReLU(),
                        nn::Conv2d(nn::Conv2dOptions(out, out, 3).padding(1)), nn::BatchNorm2d(out), nn::ReLU());
}

nn::ModuleList make_encoder(const TransporterConfig& cfg) {
  nn::ModuleList blocks;
  std::int64_t c = cfg.channels;
  for (std::int64_t d = 0; d < cfg.depth; ++d) {
    const auto o = cfg.base_width << d;
    blocks->push_back(double_conv(c, o));
    c = o;
  }
  return blocks;
}

torch::Tensor encode(nn::ModuleList& blocks, torch::Tensor x, std::vector<torch::Tensor>* skips) {
  for (auto& b : *blocks) {
    x = b->as<nn::Sequential>()->forward(x);
    if (skips) skips->push_back(x);
    x = F::max_pool2d(x, F::MaxPool2dFuncOptions(2));
  }
  return x;
}

}  // namespace

std::int64_t TransporterConfig::bottleneck_channels() const { return 2 * (base_width << (depth - 1)); }

nlohmann::json TransporterConfig::to_json() const {
  return {{"depth", depth}, {"base_width", base_width}, {"resolution", resolution}, {"channels", channels}};
}

TransporterConfig TransporterConfig::from_json(const nlohmann::json& j) {
  TransporterConfig c;
  c.depth = j.at("depth").get<std::int64_t>();
  c.base_width = j.at("base_width").get<std::int64_t>();
  c.resolution = j.at("resolution").get<std::int64_t>();
  c.channels = j.at("channels").get<std::int64_t>();
  return c;
}

std::int64_t max_legal_depth(std::int64_t resolution) {
  std::int64_t d = 0;
  while (resolution > 1 && resolution % 2 == 0) {
    resolution /= 2;
    ++d;
  }
  return d;
}

TransporterImpl::TransporterImpl(const TransporterConfig& cfg) : cfg_(cfg) {
  encoder_original_ = register_module("encoder_original", make_encoder(cfg));
  encoder_hijack_ = register_module("encoder_hijack", make_encoder(cfg));
  up_ = register_module("up", nn::ModuleList());
  decoder_ = register_module("decoder", nn::ModuleList());
  std::int64_t c = cfg.bottleneck_channels();
  for (std::int64_t d = cfg.depth - 1; d >= 0; --d) {
    const auto o = cfg.base_width << d;
    up_->push_back(nn::ConvTranspose2d(nn::ConvTranspose2dOptions(c, o, 2).stride(2)));
    decoder_->push_back(double_conv(2 * o, o));
    c = o;
  }
  head_ = register_module("head", nn::Conv2d(nn::Conv2dOptions(c, cfg.channels, 1)));
}

torch::Tensor TransporterImpl::forward(const torch::Tensor& x_o, const torch::Tensor& x_h) {
  require(x_o.sizes() == x_h.sizes(), "transporter inputs must have equal shapes");
  require(x_o.dim() == 4 && x_o.size(1) == cfg_.channels && x_o.size(2) == cfg_.resolution &&
              x_o.size(3) == cfg_.resolution,
          "transporter input does not match the model resolution");
  std::vector<torch::Tensor> skips;
  auto bo = encode(encoder_original_, x_o, &skips);
  auto bh = encode(encoder_hijack_, x_h, nullptr);
  auto x = torch::cat({bo, bh}, 1);
  for (std::size_t i = 0; i < up_->size(); ++i) {
    auto u = up_[i]->as<nn::ConvTranspose2d>()->forward(x);
    x = decoder_[i]->as<nn::Sequential>()->forward(torch::cat({u, skips[skips.size() - 1 - i]}, 1));
  }
  return torch::sigmoid(head_(x));
}

Transporter build_transporter(std::int64_t input_resolution, TransporterConfig cfg, std::uint64_t seed) {
  require(cfg.depth >= 1, "transporter depth must be >= 1");
  require(cfg.base_width >= 1, "transporter base width must be >= 1");
  const auto legal = max_legal_depth(input_resolution);
  if (cfg.depth > legal) {
    throw ConfigError("resolution " + std::to_string(input_resolution) + " is not divisible by 2^" +
                      std::to_string(cfg.depth) + "; maximum legal depth is " + std::to_string(legal));
  }
  cfg.resolution = input_resolution;
  torch::manual_seed(seed);
  return Transporter(cfg);
}

torch::Tensor transport(Transporter& model, const torch::Tensor& x_o, const torch::Tensor& x_h,
                        std::int64_t batch_size) {
  require(x_o.sizes() == x_h.sizes(), "transport: x_o and x_h shapes differ");
  const bool single = x_o.dim() == 3;
  const auto a = single ? x_o.unsqueeze(0) : x_o;
  const auto b = single ? x_h.unsqueeze(0) : x_h;
  const bool was_training = model->is_training();
  model->eval();
  torch::NoGradGuard guard;
  std::vector<torch::Tensor> parts;
  for (std::int64_t i = 0; i < a.size(0); i += batch_size) {
    const auto n = std::min(batch_size, a.size(0) - i);
    parts.push_back(model->forward(a.narrow(0, i, n), b.narrow(0, i, n)));
  }
  model->train(was_training);
  auto out = parts.empty() ? torch::empty_like(a) : torch::cat(parts);
  return single ? out.squeeze(0) : out;
}

void save_transporter(const fs::path& dir, const Transporter& model, const nlohmann::json& extra) {
  Json config = extra.is_object() ? extra : Json::object();
  config["kind"] = "transporter";
  config["arch"] = model->config().to_json();
  save_module(dir, *model, config);
}

std::pair<Transporter, nlohmann::json> load_transporter(const fs::path& dir) {
  const auto config = read_json(dir / "config.json");
  if (config.value("kind", "") != "transporter") throw ArtifactError("not a transporter checkpoint: " + dir.string(), "kind");
  Transporter model(TransporterConfig::from_json(config.at("arch")));
  load_module(dir, *model);
  model->eval();
  return {model, config};
}

}  // namespace osmosis::transport
