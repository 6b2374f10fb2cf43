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

#include "osmosis/datasets/pairing.hpp"

#include <cmath>
#include <map>
#include <random>

#include "osmosis/core/error.hpp"
#include "osmosis/core/seed.hpp"

namespace osmosis::datasets {

SamplePair PairedSet::at(std::int64_t i) const {
  require(i >= 0 && i < size(), "pair index out of range");
  const auto k = static_cast<std::size_t>(i);
  return {x_o[i], y_o[i].item<std::int64_t>(), x_h[i], y_h[i].item<std::int64_t>(), id_o[k], id_h[k]};
}

PairedSet pair_samples(const LabeledImages& originals, const LabeledImages& hijacks, const LabelMapping& mapping,
                       std::uint64_t seed) {
  require(originals.size() > 0, "pair_samples: original set is empty");
  std::map<std::int64_t, std::vector<std::int64_t>> by_class;
  const auto hl = hijacks.labels.contiguous();
  for (std::int64_t i = 0; i < hijacks.size(); ++i) by_class[hl[i].item<std::int64_t>()].push_back(i);
  for (const auto& [o, h] : mapping.pairs) {
    if (by_class[h].empty()) {
      throw ConfigError("pair_samples: hijacking class " + std::to_string(h) + " (mapped from original class " +
                        std::to_string(o) + ") has no samples");
    }
  }
  std::mt19937_64 rng(seed);
  const auto ol = originals.labels.contiguous();
  std::vector<std::int64_t> pick;
  std::vector<std::int64_t> yh;
  PairedSet out;
  for (std::int64_t i = 0; i < originals.size(); ++i) {
    const auto y = ol[i].item<std::int64_t>();
    const auto h = mapping.to_hijack(y);
    const auto& pool = by_class[h];
    const auto j = pool[static_cast<std::size_t>(rng() % pool.size())];
    pick.push_back(j);
    yh.push_back(h);
    out.id_o.push_back(originals.ids[static_cast<std::size_t>(i)]);
    out.id_h.push_back(hijacks.ids[static_cast<std::size_t>(j)]);
  }
  out.x_o = originals.images;
  out.y_o = originals.labels;
  out.x_h = hijacks.images.index_select(0, torch::tensor(pick, torch::kInt64));
  out.y_h = torch::tensor(yh, torch::kInt64);
  return out;
}

std::int64_t TrainingSet::real_count() const {
  std::int64_t n = 0;
  for (const bool r : is_real) n += r ? 1 : 0;
  return n;
}

TrainingSet dilute(const TrainingSet& synthetic, const LabeledImages& real, double ratio, std::uint64_t seed) {
  if (!(ratio >= 0.0 && ratio <= 1.0)) throw ConfigError("dilution ratio must be in [0,1]");
  if (ratio == 0.0) return synthetic;
  require(real.size() > 0, "dilution needs a nonempty real pool");
  const auto n_syn = synthetic.size();
  const auto pool = real.size();
  std::int64_t keep_syn = n_syn;
  std::int64_t n_real = pool;
  if (ratio < 1.0) {
    n_real = std::llround(ratio * static_cast<double>(n_syn) / (1.0 - ratio));
    if (n_real > pool) {
      n_real = pool;
      keep_syn = std::llround(static_cast<double>(pool) * (1.0 - ratio) / ratio);
    }
  } else {
    keep_syn = 0;
  }
  const auto num_classes = synthetic.targets.size(1);
  const auto syn_perm = seeded_permutation(n_syn, derive_seed(seed, "dilute.synthetic"));
  const auto real_perm = seeded_permutation(pool, derive_seed(seed, "dilute.real"));
  const auto syn_idx = torch::tensor(std::vector<std::int64_t>(syn_perm.begin(), syn_perm.begin() + keep_syn), torch::kInt64);
  const auto syn_sorted = std::get<0>(syn_idx.sort());
  const auto real_idx = torch::tensor(std::vector<std::int64_t>(real_perm.begin(), real_perm.begin() + n_real), torch::kInt64);
  auto real_targets = torch::one_hot(real.labels.index_select(0, real_idx), num_classes).to(torch::kFloat32);
  auto images = torch::cat(std::vector<torch::Tensor>{synthetic.images.index_select(0, syn_sorted), real.images.index_select(0, real_idx)});
  auto targets = torch::cat(std::vector<torch::Tensor>{synthetic.targets.index_select(0, syn_sorted), real_targets});
  const auto total = keep_syn + n_real;
  const auto order = seeded_permutation(total, derive_seed(seed, "dilute.order"));
  TrainingSet out;
  const auto order_t = torch::tensor(order, torch::kInt64);
  out.images = images.index_select(0, order_t);
  out.targets = targets.index_select(0, order_t);
  for (const auto o : order) out.is_real.push_back(o >= keep_syn);
  return out;
}

}  // namespace osmosis::datasets
