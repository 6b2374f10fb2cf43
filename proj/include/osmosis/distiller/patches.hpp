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

#include <compare>
#include <cstdint>
#include <map>
#include <vector>

#include "osmosis/models/classifier.hpp"

namespace osmosis::distill {

struct GridPos {
  std::int64_t row = 0;
  std::int64_t col = 0;
  auto operator<=>(const GridPos&) const = default;
};

struct Patch {
  torch::Tensor pixels;
  std::int64_t parent_id = 0;
  GridPos grid_pos;
  std::int64_t class_id = 0;
  double score = 0.0;
};

/// Splits a (C, H, W) image into rows x cols non-overlapping patches in row-major order.
std::vector<Patch> crop_patches(const torch::Tensor& image, std::int64_t rows, std::int64_t cols,
                                std::int64_t parent_id = 0, std::int64_t class_id = 0);

/// Batched crop: (N, C, H, W) -> (N, rows*cols, C, H/rows, W/cols).
torch::Tensor crop_grid(const torch::Tensor& images, std::int64_t rows, std::int64_t cols);

/// Inverse of crop_patches for a full row-major patch list.
torch::Tensor reassemble_patches(const std::vector<Patch>& patches, std::int64_t rows, std::int64_t cols);

/// Static map from sample id to its human-assigned label.
class HumanObserverProxy {
 public:
  HumanObserverProxy() = default;
  HumanObserverProxy(const std::vector<std::int64_t>& ids, const torch::Tensor& labels);
  explicit HumanObserverProxy(std::map<std::int64_t, std::int64_t> lookup) : lookup_(std::move(lookup)) {}

  std::int64_t label(std::int64_t sample_id) const;
  std::size_t size() const { return lookup_.size(); }

 private:
  std::map<std::int64_t, std::int64_t> lookup_;
};

/// Frozen original-task classifier. Inputs are resized to its resolution before scoring.
class ObserverModel {
 public:
  ObserverModel(models::ClassifierPtr classifier, std::int64_t num_classes, std::int64_t resolution);

  /// Log-probabilities in float64, shape (N, K).
  torch::Tensor log_probabilities(const torch::Tensor& images) const;
  torch::Tensor logits(const torch::Tensor& images) const;
  std::int64_t num_classes() const { return num_classes_; }
  std::int64_t resolution() const { return resolution_; }
  models::Classifier& classifier() const { return *classifier_; }

 private:
  models::ClassifierPtr classifier_;
  std::int64_t num_classes_;
  std::int64_t resolution_;
};

/// S = -CE(observer(patch), human label) - CE(observer(patch), y). Higher is better; 0 is the maximum.
double realism_score(const ObserverModel& observer, const HumanObserverProxy& human, const Patch& patch,
                     std::int64_t y);

/// Batched form over patches (M, C, h, w) with per-patch human labels and targets. Returns float64 (M).
torch::Tensor realism_scores(const ObserverModel& observer, const torch::Tensor& patches,
                             const torch::Tensor& human_labels, const torch::Tensor& targets);

/// True if a ranks before b: higher score, then lower (parent_id, grid_pos).
bool ranks_before(const Patch& a, const Patch& b);

/// The `count` best patches of class `class_id`, best first. Throws ConfigError naming the class
/// when fewer are available.
std::vector<Patch> select_key_patches(const std::vector<Patch>& scored, std::int64_t class_id, std::int64_t count);

struct Mosaic {
  torch::Tensor pixels;
  std::vector<std::pair<std::int64_t, GridPos>> provenance;
};

/// Places N (a perfect square) patches on a sqrt(N) x sqrt(N) row-major grid at target resolution.
Mosaic assemble_mosaic(const std::vector<Patch>& patches, std::int64_t target_resolution);

/// Observer softmax at temperature `temperature`, shape (N, K).
torch::Tensor soft_relabel(const ObserverModel& observer, const torch::Tensor& images, double temperature = 1.0);

}  // namespace osmosis::distill
