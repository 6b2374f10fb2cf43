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

#include "osmosis/models/toy_cnn.hpp"

#include <cmath>

#include "osmosis/core/error.hpp"
#include "osmosis/core/seed.hpp"

namespace osmosis::models {

namespace F = torch::nn::functional;

std::vector<ToyCnnLayout::Entry> ToyCnnLayout::entries() const {
  std::vector<Entry> out;
  auto add = [&](std::string name, std::vector<std::int64_t> shape) {
    std::int64_t n = 1;
    for (auto d : shape) n *= d;
    out.push_back({std::move(name), std::move(shape), n});
  };
  std::int64_t in = channels;
  for (std::int64_t d = 0; d < depth; ++d) {
    const auto p = "block" + std::to_string(d) + "_";
    add(p + "conv_weight", {width, in, 3, 3});
    add(p + "conv_bias", {width});
    add(p + "norm_weight", {width});
    add(p + "norm_bias", {width});
    in = width;
  }
  add("fc_weight", {num_classes, feature_dim()});
  add("fc_bias", {num_classes});
  return out;
}

std::int64_t ToyCnnLayout::numel() const {
  std::int64_t n = 0;
  for (const auto& e : entries()) n += e.numel;
  return n;
}

std::int64_t ToyCnnLayout::feature_dim() const {
  const auto side = resolution >> depth;
  return width * side * side;
}

std::vector<torch::Tensor> unflatten_params(const torch::Tensor& flat, const ToyCnnLayout& layout) {
  require(flat.dim() == 1 && flat.numel() == layout.numel(), "flat parameter vector has wrong size");
  std::vector<torch::Tensor> out;
  std::int64_t offset = 0;
  for (const auto& e : layout.entries()) {
    out.push_back(flat.narrow(0, offset, e.numel).view(e.shape));
    offset += e.numel;
  }
  return out;
}

torch::Tensor init_toy_cnn_params(const ToyCnnLayout& layout, torch::Generator& gen) {
  std::vector<torch::Tensor> parts;
  for (const auto& e : layout.entries()) {
    const bool is_norm = e.name.find("norm_") != std::string::npos;
    if (is_norm) {
      const bool scale = e.name.ends_with("weight");
      parts.push_back(scale ? torch::ones({e.numel}) : torch::zeros({e.numel}));
      continue;
    }
    if (e.name.ends_with("bias")) {
      parts.push_back(torch::zeros({e.numel}));
      continue;
    }
    std::int64_t fan_in = 0;
    if (e.name.starts_with("fc_")) {
      fan_in = layout.feature_dim();
    } else {
      const auto block = std::stoll(e.name.substr(5, e.name.find('_') - 5));
      fan_in = (block == 0 ? layout.channels : layout.width) * 9;
    }
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    parts.push_back(torch::rand({e.numel}, gen).mul_(2.0 * bound).sub_(bound));
  }
  return torch::cat(parts);
}

torch::Tensor toy_cnn_features(const torch::Tensor& x, const std::vector<torch::Tensor>& params,
                               const ToyCnnLayout& layout) {
  auto h = x;
  for (std::int64_t d = 0; d < layout.depth; ++d) {
    const auto i = static_cast<std::size_t>(4 * d);
    h = F::conv2d(h, params[i], F::Conv2dFuncOptions().bias(params[i + 1]).padding(1));
    h = F::group_norm(h, F::GroupNormFuncOptions(layout.width).weight(params[i + 2]).bias(params[i + 3]));
    h = torch::relu(h);
    h = F::avg_pool2d(h, F::AvgPool2dFuncOptions(2));
  }
  return h.flatten(1);
}

torch::Tensor toy_cnn_logits(const torch::Tensor& x, const std::vector<torch::Tensor>& params,
                             const ToyCnnLayout& layout) {
  const auto n = params.size();
  return F::linear(toy_cnn_features(x, params, layout), params[n - 2], params[n - 1]);
}

torch::Tensor toy_cnn_forward(const torch::Tensor& x, const torch::Tensor& flat, const ToyCnnLayout& layout) {
  return toy_cnn_logits(x, unflatten_params(flat, layout), layout);
}

ToyCnn::ToyCnn(ToyCnnLayout layout, std::uint64_t seed) : layout_(layout) {
  require(layout_.resolution % (1LL << layout_.depth) == 0,
          "toy_cnn: resolution must be divisible by 2^depth");
  auto gen = make_generator(seed);
  const auto flat = init_toy_cnn_params(layout_, gen);
  const auto views = unflatten_params(flat, layout_);
  const auto entries = layout_.entries();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    params_.push_back(register_parameter(entries[i].name, views[i].clone()));
  }
}

torch::Tensor ToyCnn::features(const torch::Tensor& x) { return toy_cnn_features(x, params_, layout_); }

torch::Tensor ToyCnn::head(const torch::Tensor& f) {
  const auto n = params_.size();
  return F::linear(f, params_[n - 2], params_[n - 1]);
}

torch::Tensor ToyCnn::flat_parameters() const {
  std::vector<torch::Tensor> parts;
  for (const auto& p : params_) parts.push_back(p.detach().flatten());
  return torch::cat(parts);
}

void ToyCnn::set_flat_parameters(const torch::Tensor& flat) {
  const auto views = unflatten_params(flat.detach(), layout_);
  torch::NoGradGuard guard;
  for (std::size_t i = 0; i < params_.size(); ++i) params_[i].copy_(views[i]);
}

}  // namespace osmosis::models
