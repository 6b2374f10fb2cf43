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

#include "osmosis/transporter/training.hpp"

#include <cmath>

#include "osmosis/core/error.hpp"
#include "osmosis/core/log.hpp"
#include "osmosis/core/seed.hpp"
#include "osmosis/core/tensor_io.hpp"
#include "osmosis/datasets/pairing.hpp"

namespace osmosis::transport {

TransporterRun train_transporter(const datasets::LabeledImages& originals, const datasets::LabeledImages& hijacks,
                                 const datasets::LabelMapping& mapping, const FeatureExtractor& extractor,
                                 const TransporterTrainConfig& cfg, std::uint64_t seed,
                                 const EpochCallback& on_epoch) {
  cfg.weights.validate();
  require(cfg.epochs >= 0, "transporter epochs must be >= 0");
  require(cfg.optimizer.batch_size >= 1, "transporter batch size must be >= 1");
  require(originals.size() > 0, "transporter needs a nonempty original set");
  require(extractor.frozen(), "feature extractor must be frozen");

  TransporterRun run;
  run.model = build_transporter(originals.images.size(2), cfg.arch, derive_seed(seed, "transporter.init"));
  auto& model = run.model;
  torch::optim::Adam opt(model->parameters(), torch::optim::AdamOptions(cfg.optimizer.lr));
  const auto n = originals.size();
  const auto bs = cfg.optimizer.batch_size;

  for (std::int64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    model->train();
    const auto epoch_seed = derive_seed(seed, "transporter.epoch." + std::to_string(epoch));
    const auto pairs = datasets::pair_samples(originals, hijacks, mapping, epoch_seed);
    const auto order = torch::tensor(seeded_permutation(n, derive_seed(epoch_seed, "order")), torch::kInt64);
    EpochLoss log_entry{epoch, 0.0, 0.0, 0.0};
    std::int64_t batches = 0;
    for (std::int64_t i = 0; i < n; i += bs) {
      const auto idx = order.narrow(0, i, std::min(bs, n - i));
      const auto x_o = pairs.x_o.index_select(0, idx);
      const auto x_h = pairs.x_h.index_select(0, idx);
      const auto x_c = model->forward(x_o, x_h);
      const auto lv = visual_loss(x_c, x_o);
      const auto ls = semantic_loss(extractor, x_c, x_h);
      const auto loss = cfg.weights.lambda_v * lv + cfg.weights.lambda_s * ls;
      const auto value = loss.item<double>();
      if (!std::isfinite(value)) throw DivergenceError("transporter", epoch);
      opt.zero_grad();
      loss.backward();
      opt.step();
      log_entry.total += value;
      log_entry.visual += lv.item<double>();
      log_entry.semantic += ls.item<double>();
      ++batches;
    }
    log_entry.total /= static_cast<double>(batches);
    log_entry.visual /= static_cast<double>(batches);
    log_entry.semantic /= static_cast<double>(batches);
    run.history.push_back(log_entry);
    log::info("transporter epoch " + std::to_string(epoch) + " loss " + std::to_string(log_entry.total) +
              " visual " + std::to_string(log_entry.visual) + " semantic " + std::to_string(log_entry.semantic));
    if (on_epoch) on_epoch(log_entry);
  }
  model->eval();
  run.osmosis = make_osmosis_set(model, originals, hijacks, mapping, derive_seed(seed, "transporter.final"));
  return run;
}

OsmosisSet make_osmosis_set(Transporter& model, const datasets::LabeledImages& originals,
                            const datasets::LabeledImages& hijacks, const datasets::LabelMapping& mapping,
                            std::uint64_t seed) {
  const auto pairs = datasets::pair_samples(originals, hijacks, mapping, seed);
  OsmosisSet out;
  out.x_c = transport(model, pairs.x_o, pairs.x_h);
  out.y_o = pairs.y_o.clone();
  out.y_h = pairs.y_h.clone();
  out.id_o = pairs.id_o;
  out.id_h = pairs.id_h;
  out.mapping = mapping;
  return out;
}

void save_osmosis_set(const fs::path& dir, const OsmosisSet& set) {
  Json config = {{"kind", "osmosis_set"},
                 {"count", set.size()},
                 {"mapping", set.mapping.to_json()},
                 {"id_o", set.id_o},
                 {"id_h", set.id_h}};
  save_tensor_dir(dir, {{"x_c", set.x_c}, {"y_o", set.y_o.to(torch::kFloat32)}, {"y_h", set.y_h.to(torch::kFloat32)}},
                  config);
}

OsmosisSet load_osmosis_set(const fs::path& dir) {
  const auto td = load_tensor_dir(dir);
  if (td.config.value("kind", "") != "osmosis_set") throw ArtifactError("not an osmosis set: " + dir.string(), "kind");
  OsmosisSet out;
  out.x_c = td.at("x_c");
  out.y_o = td.at("y_o").to(torch::kInt64);
  out.y_h = td.at("y_h").to(torch::kInt64);
  out.id_o = td.config.at("id_o").get<std::vector<std::int64_t>>();
  out.id_h = td.config.at("id_h").get<std::vector<std::int64_t>>();
  out.mapping = datasets::LabelMapping::from_json(td.config.at("mapping"));
  if (static_cast<std::int64_t>(out.id_o.size()) != out.size()) throw ArtifactError("osmosis id list size mismatch", "id_o");
  return out;
}

}  // namespace osmosis::transport
