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

#include "osmosis/models/classifier.hpp"

#include <cmath>

#include "osmosis/core/error.hpp"
#include "osmosis/core/seed.hpp"
#include "osmosis/core/tensor_io.hpp"
#include "osmosis/models/toy_cnn.hpp"
#include "zoo.hpp"

namespace osmosis::models {

namespace {

constexpr std::pair<Arch, std::string_view> kArchNames[] = {
    {Arch::toy_cnn, "toy_cnn"},         {Arch::toy_resnet, "toy_resnet"},
    {Arch::resnet18, "resnet18"},       {Arch::vgg16, "vgg16"},
    {Arch::densenet121, "densenet121"}, {Arch::mobilenetv2, "mobilenetv2"},
    {Arch::mobilenetv3, "mobilenetv3"}, {Arch::mnasnet, "mnasnet"},
    {Arch::convnext_t, "convnext_t"},
};

}  // namespace

std::string to_string(Arch arch) {
  for (const auto& [a, name] : kArchNames) {
    if (a == arch) return std::string(name);
  }
  throw ConfigError("unknown architecture enum value");
}

Arch parse_arch(std::string_view name) {
  for (const auto& [a, n] : kArchNames) {
    if (n == name) return a;
  }
  throw ConfigError("unknown architecture '" + std::string(name) + "'");
}

ClassifierPtr make_classifier(const ArchSpec& spec, std::uint64_t seed) {
  require(spec.num_classes >= 2, "classifier needs at least two classes");
  require(spec.resolution >= 8, "classifier resolution must be at least 8");
  torch::manual_seed(seed);
  switch (spec.arch) {
    case Arch::toy_cnn:
      return std::make_shared<ToyCnn>(
          ToyCnnLayout{.width = spec.width, .num_classes = spec.num_classes, .resolution = spec.resolution}, seed);
    case Arch::toy_resnet: return zoo::toy_resnet(spec);
    case Arch::resnet18: return zoo::resnet18(spec);
    case Arch::vgg16: return zoo::vgg16(spec);
    case Arch::densenet121: return zoo::densenet121(spec);
    case Arch::mobilenetv2: return zoo::mobilenetv2(spec);
    case Arch::mobilenetv3: return zoo::mobilenetv3(spec);
    case Arch::mnasnet: return zoo::mnasnet(spec);
    case Arch::convnext_t: return zoo::convnext_t(spec);
  }
  throw ConfigError("unknown architecture");
}

ClassifierPtr clone_classifier(const Classifier& source, const ArchSpec& spec) {
  auto out = make_classifier(spec);
  copy_module_state(source, *out);
  out->train(source.is_training());
  return out;
}

void reset_head(Classifier& model, std::uint64_t seed) {
  auto gen = make_generator(seed);
  const auto prefix = model.head_prefix();
  const auto fan_in = static_cast<double>(model.feature_dim());
  const double bound = 1.0 / std::sqrt(fan_in);
  torch::NoGradGuard guard;
  for (auto& p : model.named_parameters()) {
    if (!p.key().starts_with(prefix)) continue;
    auto& t = p.value();
    t.copy_(torch::rand(t.sizes(), gen).mul_(2.0 * bound).sub_(bound));
  }
}

void freeze(Classifier& model) {
  for (auto& p : model.parameters()) p.set_requires_grad(false);
  model.eval();
}

bool is_frozen(const Classifier& model) {
  for (const auto& p : model.parameters()) {
    if (p.requires_grad()) return false;
  }
  return true;
}

std::int64_t parameter_count(const torch::nn::Module& module) {
  std::int64_t n = 0;
  for (const auto& p : module.parameters()) n += p.numel();
  return n;
}

namespace {

template <typename Fn>
torch::Tensor batched(Classifier& model, const torch::Tensor& images, std::int64_t batch_size, Fn fn) {
  require(images.dim() == 4, "expected a 4-D image batch");
  require(batch_size > 0, "batch size must be positive");
  const bool was_training = model.is_training();
  model.eval();
  torch::NoGradGuard guard;
  std::vector<torch::Tensor> parts;
  for (std::int64_t i = 0; i < images.size(0); i += batch_size) {
    parts.push_back(fn(images.narrow(0, i, std::min(batch_size, images.size(0) - i))));
  }
  model.train(was_training);
  if (parts.empty()) return fn(images);
  return torch::cat(parts);
}

}  // namespace

torch::Tensor predict_logits(Classifier& model, const torch::Tensor& images, std::int64_t batch_size) {
  return batched(model, images, batch_size, [&](const torch::Tensor& x) { return model.forward(x); });
}

torch::Tensor extract_features(Classifier& model, const torch::Tensor& images, std::int64_t batch_size) {
  return batched(model, images, batch_size, [&](const torch::Tensor& x) { return model.features(x); });
}

}  // namespace osmosis::models
