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

#include "osmosis/defense/dpsgd.hpp"

#include <cmath>
#include <optional>

#include "osmosis/core/error.hpp"
#include "osmosis/core/log.hpp"
#include "osmosis/core/seed.hpp"
#include "osmosis/defense/privacy.hpp"

namespace osmosis::defense {

void PrivacyConfig::validate() const {
  require(epsilon > 0.0, "privacy epsilon must be positive");
  require(delta > 0.0 && delta < 1.0, "privacy delta must be in (0,1)");
  require(clip_norm > 0.0, "clip norm must be positive");
  require(accountant == "rdp", "unsupported accountant '" + accountant + "'");
  require(noise_multiplier != 0.0 || std::isinf(epsilon), "zero noise requires an infinite epsilon");
  require(!(noise_multiplier > 0.0 && std::isinf(clip_norm)), "noise with an infinite clip norm is unbounded");
}

nlohmann::ordered_json DpsgdReport::to_json() const {
  const auto finite = [](double v) -> nlohmann::ordered_json {
    if (std::isfinite(v)) return v;
    return nullptr;
  };
  nlohmann::ordered_json j;
  j["epsilon_target"] = finite(epsilon_target);
  j["epsilon_spent"] = finite(epsilon_spent);
  j["delta"] = delta;
  j["noise_multiplier"] = noise_multiplier;
  j["clip_norm"] = finite(clip_norm);
  j["sampling_rate"] = sampling_rate;
  j["steps"] = steps;
  j["planned_steps"] = planned_steps;
  j["aborted"] = aborted;
  j["max_clipped_norm"] = max_clipped_norm;
  j["epoch_losses"] = epoch_losses;
  return j;
}

DpsgdReport dpsgd_finetune(models::Classifier& victim, const datasets::TrainingSet& data,
                           const PrivacyConfig& privacy, const hijack::FinetuneConfig& cfg, std::uint64_t seed,
                           const ClipObserver& observer) {
  privacy.validate();
  require(cfg.epochs >= 0 && cfg.batch_size >= 1, "invalid fine-tune config");
  require(data.size() > 0, "DP fine-tune data is empty");
  const auto n = data.size();
  const auto bs = std::min(cfg.batch_size, n);
  const auto per_epoch = (n + bs - 1) / bs;
  DpsgdReport report;
  report.epsilon_target = privacy.epsilon;
  report.delta = privacy.delta;
  report.clip_norm = privacy.clip_norm;
  report.sampling_rate = static_cast<double>(bs) / static_cast<double>(n);
  report.planned_steps = cfg.epochs * per_epoch;
  double sigma = privacy.noise_multiplier;
  if (sigma < 0.0) {
    sigma = report.planned_steps > 0
                ? calibrate_noise_multiplier(privacy.epsilon, privacy.delta, report.sampling_rate, report.planned_steps)
                : 1.0;
  }
  report.noise_multiplier = sigma;
  const bool noisy = sigma > 0.0;
  std::optional<RdpAccountant> accountant;
  if (noisy) accountant.emplace(report.sampling_rate, sigma);

  std::vector<torch::Tensor> params;
  for (auto& p : victim.parameters()) {
    p.set_requires_grad(true);
    params.push_back(p);
  }
  torch::optim::Adam opt(params, torch::optim::AdamOptions(cfg.lr));
  auto gen = make_generator(derive_seed(seed, "dpsgd.noise"));
  victim.train();
  for (std::int64_t epoch = 0; epoch < cfg.epochs && !report.aborted; ++epoch) {
    const auto order = seeded_permutation(n, derive_seed(seed, "victim.epoch." + std::to_string(epoch)));
    double total = 0.0;
    std::int64_t batches = 0;
    for (std::int64_t i = 0; i < n; i += bs) {
      if (noisy && accountant->epsilon_after(accountant->steps() + 1, privacy.delta) > privacy.epsilon * (1.0 + 1e-9)) {
        report.aborted = true;
        log::warn("DP-SGD stopped at step " + std::to_string(report.steps) + ": epsilon budget exhausted");
        break;
      }
      const auto count = std::min(bs, n - i);
      std::vector<torch::Tensor> sum;
      for (const auto& p : params) sum.push_back(torch::zeros_like(p));
      double batch_loss = 0.0;
      for (std::int64_t k = 0; k < count; ++k) {
        const auto idx = order[static_cast<std::size_t>(i + k)];
        const auto logits = victim.forward(data.images[idx].unsqueeze(0));
        const auto loss = -(data.targets[idx].unsqueeze(0) * torch::log_softmax(logits, 1)).sum(1).mean();
        const auto value = loss.item<double>();
        if (!std::isfinite(value)) throw DivergenceError("dpsgd fine-tune", epoch);
        batch_loss += value;
        auto grads = torch::autograd::grad({loss}, params, {}, false, false, true);
        double sq = 0.0;
        for (auto& g : grads) {
          if (g.defined()) sq += g.to(torch::kFloat64).pow(2).sum().item<double>();
        }
        const double norm = std::sqrt(sq);
        const double factor =
            norm <= privacy.clip_norm ? 1.0 : privacy.clip_norm * (1.0 - 1e-6) / norm;
        double clipped_sq = 0.0;
        for (std::size_t j = 0; j < grads.size(); ++j) {
          if (!grads[j].defined()) continue;
          const auto clipped = factor == 1.0 ? grads[j] : grads[j] * factor;
          clipped_sq += clipped.to(torch::kFloat64).pow(2).sum().item<double>();
          sum[j] += clipped;
        }
        const double clipped_norm = std::sqrt(clipped_sq);
        report.max_clipped_norm = std::max(report.max_clipped_norm, clipped_norm);
        if (observer) observer(clipped_norm);
      }
      for (std::size_t j = 0; j < params.size(); ++j) {
        auto g = sum[j];
        if (noisy) g = g + torch::randn(g.sizes(), gen) * (sigma * privacy.clip_norm);
        params[j].mutable_grad() = g / static_cast<double>(count);
      }
      opt.step();
      if (noisy) accountant->step();
      ++report.steps;
      total += batch_loss / static_cast<double>(count);
      ++batches;
    }
    if (batches > 0) report.epoch_losses.push_back(total / static_cast<double>(batches));
  }
  victim.eval();
  report.epsilon_spent = noisy ? accountant->epsilon(privacy.delta) : std::numeric_limits<double>::infinity();
  return report;
}

}  // namespace osmosis::defense
