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
#include <vector>

#include "osmosis/datasets/dataset.hpp"
#include "osmosis/datasets/label_mapping.hpp"

namespace osmosis::datasets {

struct SamplePair {
  torch::Tensor x_o;
  std::int64_t y_o = 0;
  torch::Tensor x_h;
  std::int64_t y_h = 0;
  std::int64_t id_o = 0;
  std::int64_t id_h = 0;
};

/// One epoch of pairs: every original sample, in order, with a hijacking sample of class
/// mapping(y_o) drawn with replacement.
struct PairedSet {
  torch::Tensor x_o;
  torch::Tensor y_o;
  torch::Tensor x_h;
  torch::Tensor y_h;
  std::vector<std::int64_t> id_o;
  std::vector<std::int64_t> id_h;

  std::int64_t size() const { return x_o.defined() ? x_o.size(0) : 0; }
  SamplePair at(std::int64_t i) const;
};

PairedSet pair_samples(const LabeledImages& originals, const LabeledImages& hijacks, const LabelMapping& mapping,
                       std::uint64_t seed);

/// Training data with probability-vector targets.
struct TrainingSet {
  torch::Tensor images;
  torch::Tensor targets;
  /// true for samples taken from the real pool.
  std::vector<bool> is_real;

  std::int64_t size() const { return images.defined() ? images.size(0) : 0; }
  std::int64_t real_count() const;
};

/// Mixes real samples into a synthetic set so that a fraction `ratio` of the result is real.
/// The real count is round(ratio * n / (1 - ratio)); if the pool is too small the synthetic
/// part is subsampled instead. ratio 1 yields the whole real pool.
TrainingSet dilute(const TrainingSet& synthetic, const LabeledImages& real, double ratio, std::uint64_t seed);

}  // namespace osmosis::datasets
