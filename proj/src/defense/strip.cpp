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

#include "osmosis/defense/strip.hpp"

#include <algorithm>
#include <cmath>

#include "osmosis/core/error.hpp"
#include "osmosis/core/seed.hpp"

namespace osmosis::defense {

torch::Tensor shannon_entropy(const torch::Tensor& probabilities) {
  require(probabilities.dim() == 2, "entropy expects an (N, K) probability matrix");
  const auto p = probabilities.to(torch::kFloat64);
  const auto terms = torch::where(p > 0, -p * torch::log(p), torch::zeros_like(p));
  return terms.sum(1).clamp(0.0, std::log(static_cast<double>(p.size(1))));
}

double strip_probe(models::Classifier& victim, const torch::Tensor& query, const torch::Tensor& overlay_pool,
                   std::int64_t n_perturbations, double blend_alpha, std::uint64_t seed) {
  require(n_perturbations >= 1, "STRIP needs at least one perturbation");
  require(blend_alpha > 0.0 && blend_alpha < 1.0, "STRIP blend alpha must be in (0,1)");
  require(overlay_pool.defined() && overlay_pool.dim() == 4 && overlay_pool.size(0) > 0, "STRIP overlay pool is empty");
  require(query.dim() == 3 && query.sizes() == overlay_pool[0].sizes(), "STRIP query shape does not match the pool");
  auto gen = make_generator(seed);
  const auto pick = torch::randint(overlay_pool.size(0), {n_perturbations}, gen);
  const auto blends = query.unsqueeze(0) * (1.0 - blend_alpha) + overlay_pool.index_select(0, pick) * blend_alpha;
  const auto logits = models::predict_logits(victim, blends).to(torch::kFloat64);
  return shannon_entropy(torch::softmax(logits, 1)).mean().item<double>();
}

double histogram_overlap(const std::vector<double>& a, const std::vector<double>& b, std::int64_t bins) {
  require(!a.empty() && !b.empty(), "overlap needs two nonempty samples");
  require(bins >= 1, "overlap needs at least one bin");
  const auto [amin, amax] = std::minmax_element(a.begin(), a.end());
  const auto [bmin, bmax] = std::minmax_element(b.begin(), b.end());
  const double lo = std::min(*amin, *bmin);
  const double hi = std::max(*amax, *bmax);
  const auto hist = [&](const std::vector<double>& v) {
    std::vector<double> h(static_cast<std::size_t>(bins), 0.0);
    for (const double x : v) {
      auto i = hi > lo ? static_cast<std::int64_t>((x - lo) / (hi - lo) * static_cast<double>(bins)) : 0;
      i = std::clamp<std::int64_t>(i, 0, bins - 1);
      h[static_cast<std::size_t>(i)] += 1.0 / static_cast<double>(v.size());
    }
    return h;
  };
  const auto ha = hist(a);
  const auto hb = hist(b);
  double overlap = 0.0;
  for (std::size_t i = 0; i < ha.size(); ++i) overlap += std::min(ha[i], hb[i]);
  return std::clamp(overlap, 0.0, 1.0);
}

nlohmann::ordered_json StripResult::to_json() const {
  nlohmann::ordered_json j;
  j["n_perturbations"] = n_perturbations;
  j["blend_alpha"] = blend_alpha;
  j["overlap_statistic"] = overlap_statistic;
  j["entropies_attack"] = entropies_attack;
  j["entropies_benign"] = entropies_benign;
  return j;
}

StripResult strip_report(models::Classifier& victim, const torch::Tensor& attack_queries,
                         const torch::Tensor& benign_queries, const torch::Tensor& overlay_pool,
                         const StripConfig& cfg, std::uint64_t seed) {
  require(attack_queries.size(0) > 0 && benign_queries.size(0) > 0, "STRIP needs nonempty query sets");
  StripResult r;
  r.n_perturbations = cfg.n_perturbations;
  r.blend_alpha = cfg.blend_alpha;
  for (std::int64_t i = 0; i < attack_queries.size(0); ++i) {
    r.entropies_attack.push_back(strip_probe(victim, attack_queries[i], overlay_pool, cfg.n_perturbations,
                                             cfg.blend_alpha, derive_seed(seed, "strip.attack." + std::to_string(i))));
  }
  for (std::int64_t i = 0; i < benign_queries.size(0); ++i) {
    r.entropies_benign.push_back(strip_probe(victim, benign_queries[i], overlay_pool, cfg.n_perturbations,
                                             cfg.blend_alpha, derive_seed(seed, "strip.benign." + std::to_string(i))));
  }
  r.overlap_statistic = histogram_overlap(r.entropies_attack, r.entropies_benign, cfg.bins);
  return r;
}

}  // namespace osmosis::defense
