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
#include <functional>
#include <vector>

#include "osmosis/datasets/dataset.hpp"
#include "osmosis/datasets/label_mapping.hpp"
#include "osmosis/transporter/losses.hpp"
#include "osmosis/transporter/transporter.hpp"

namespace osmosis::transport {

struct OptimizerConfig {
  double lr = 0.01;
  std::int64_t batch_size = 64;
};

struct TransporterTrainConfig {
  TransporterConfig arch;
  LossWeights weights;
  std::int64_t epochs = 100;
  OptimizerConfig optimizer;
};

/// Transported samples with their labels and source ids.
struct OsmosisSet {
  torch::Tensor x_c;
  torch::Tensor y_o;
  torch::Tensor y_h;
  std::vector<std::int64_t> id_o;
  std::vector<std::int64_t> id_h;
  datasets::LabelMapping mapping;

  std::int64_t size() const { return x_c.defined() ? x_c.size(0) : 0; }
  std::int64_t num_classes() const { return mapping.size(); }
};

struct EpochLoss {
  std::int64_t epoch = 0;
  double total = 0.0;
  double visual = 0.0;
  double semantic = 0.0;
};

struct TransporterRun {
  Transporter model{nullptr};
  OsmosisSet osmosis;
  std::vector<EpochLoss> history;
};

using EpochCallback = std::function<void(const EpochLoss&)>;

/// Adam over paired batches. Throws DivergenceError with the epoch index on a non-finite loss.
TransporterRun train_transporter(const datasets::LabeledImages& originals, const datasets::LabeledImages& hijacks,
                                 const datasets::LabelMapping& mapping, const FeatureExtractor& extractor,
                                 const TransporterTrainConfig& cfg, std::uint64_t seed,
                                 const EpochCallback& on_epoch = {});

/// One pass of the model over a fresh pairing of the original set.
OsmosisSet make_osmosis_set(Transporter& model, const datasets::LabeledImages& originals,
                            const datasets::LabeledImages& hijacks, const datasets::LabelMapping& mapping,
                            std::uint64_t seed);

void save_osmosis_set(const std::filesystem::path& dir, const OsmosisSet& set);
OsmosisSet load_osmosis_set(const std::filesystem::path& dir);

}  // namespace osmosis::transport
