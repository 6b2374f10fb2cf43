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

#include "osmosis/hijack/victim.hpp"

#include <cmath>

#include "osmosis/core/error.hpp"
#include "osmosis/core/log.hpp"
#include "osmosis/core/seed.hpp"
#include "osmosis/core/tensor_io.hpp"

namespace osmosis::hijack {

models::ClassifierPtr make_victim(const VictimSpec& spec, std::uint64_t seed) {
  auto model = models::make_classifier(spec.arch, derive_seed(seed, "victim.init"));
  if (!spec.pretrained.empty()) {
    const fs::path dir(spec.pretrained);
    if (!fs::exists(dir / "index.json")) throw ArtifactError("missing pretrained victim " + dir.string(), "pretrained");
    load_module(dir, *model, {model->head_prefix()});
    models::reset_head(*model, derive_seed(seed, "victim.head"));
  }
  return model;
}

std::vector<double> finetune_victim(models::Classifier& victim, const datasets::TrainingSet& data,
                                    const FinetuneConfig& cfg, std::uint64_t seed) {
  require(cfg.epochs >= 0, "fine-tune epochs must be >= 0");
  require(cfg.batch_size >= 1, "fine-tune batch size must be >= 1");
  require(data.size() > 0, "fine-tune data is empty");
  require(data.targets.dim() == 2 && data.targets.size(0) == data.size(), "fine-tune targets must be (N, K)");
  std::vector<torch::Tensor> params;
  for (auto& p : victim.parameters()) {
    p.set_requires_grad(true);
    params.push_back(p);
  }
  torch::optim::Adam opt(params, torch::optim::AdamOptions(cfg.lr));
  const auto n = data.size();
  std::vector<double> losses;
  victim.train();
  for (std::int64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto order = torch::tensor(seeded_permutation(n, derive_seed(seed, "victim.epoch." + std::to_string(epoch))),
                                     torch::kInt64);
    double total = 0.0;
    std::int64_t batches = 0;
    for (std::int64_t i = 0; i < n; i += cfg.batch_size) {
      const auto idx = order.narrow(0, i, std::min(cfg.batch_size, n - i));
      const auto logits = victim.forward(data.images.index_select(0, idx));
      const auto loss = -(data.targets.index_select(0, idx) * torch::log_softmax(logits, 1)).sum(1).mean();
      const auto value = loss.item<double>();
      if (!std::isfinite(value)) throw DivergenceError("victim fine-tune", epoch);
      opt.zero_grad();
      loss.backward();
      opt.step();
      total += value;
      ++batches;
    }
    losses.push_back(total / static_cast<double>(batches));
    if (epoch % 50 == 0) log::debug("victim epoch " + std::to_string(epoch) + " loss " + std::to_string(losses.back()));
  }
  victim.eval();
  return losses;
}

}  // namespace osmosis::hijack
