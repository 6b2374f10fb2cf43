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

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "osmosis/datasets/label_mapping.hpp"
#include "osmosis/datasets/pairing.hpp"
#include "osmosis/distiller/patches.hpp"
#include "osmosis/distiller/trajectory.hpp"
#include "osmosis/transporter/training.hpp"

namespace osmosis::distill {

/// Label source: the observer's softmax or the mosaic's class as a one-hot vector.
enum class LabelSource { observer, hard };
/// Label entering the second term of the realism score.
enum class ScoreTarget { original, hijack };

std::string to_string(LabelSource s);
LabelSource parse_label_source(const std::string& s);
std::string to_string(ScoreTarget s);
ScoreTarget parse_score_target(const std::string& s);

struct DistillConfig {
  std::int64_t ipc = 50;
  std::int64_t n_patches = 4;
  std::array<std::int64_t, 2> crop_grid{2, 2};
  std::int64_t iterations = 300;
  /// Expert span g in snapshots; the student takes g * snapshot_interval steps.
  std::int64_t expert_span = 2;
  double lr_pixels = 100.0;
  double momentum = 0.5;
  double syn_lr_init = 0.01;
  double lr_syn_lr = 1e-5;
  bool learn_syn_lr = true;
  double min_syn_lr = 1e-5;
  bool learn_labels = false;
  double lr_labels = 1.0;
  LabelSource matching_labels = LabelSource::hard;
  LabelSource relabel = LabelSource::observer;
  ScoreTarget score_target = ScoreTarget::original;
};

struct ProvenanceEntry {
  std::int64_t parent_id = 0;
  GridPos grid_pos;
  bool operator==(const ProvenanceEntry&) const = default;
};

/// ipc synthetic mosaics per class with soft labels over the original classes.
struct DistilledOsmosisSet {
  torch::Tensor images;
  torch::Tensor soft_labels;
  torch::Tensor class_ids;
  std::int64_t ipc = 0;
  std::int64_t num_classes = 0;
  std::int64_t n_patches = 0;
  datasets::LabelMapping mapping;
  std::vector<std::vector<ProvenanceEntry>> provenance;
  nlohmann::json extra = nlohmann::json::object();

  std::int64_t size() const { return images.defined() ? images.size(0) : 0; }
  datasets::TrainingSet as_training_set() const;
};

/// Per-parent key patches of an osmosis set, scored and tagged with their class.
std::vector<Patch> score_key_patches(const transport::OsmosisSet& osmosis, const ObserverModel& observer,
                                     const DistillConfig& cfg);

/// Mosaics built from the top ipc * N key patches of each class; labels follow cfg.relabel.
DistilledOsmosisSet initialize_mosaics(const transport::OsmosisSet& osmosis, const ObserverModel& observer,
                                       const DistillConfig& cfg);

struct DistillRun {
  DistilledOsmosisSet dod;
  std::vector<double> losses;
  double syn_lr = 0.0;
};

using IterationCallback = std::function<void(std::int64_t iteration, double loss)>;

/// Trajectory matching on the initialized mosaics. Throws DivergenceError with the iteration
/// index on a non-finite loss.
DistillRun distill(const transport::OsmosisSet& osmosis, const std::vector<ExpertTrajectory>& buffer,
                   const ObserverModel& observer, const DistillConfig& cfg, std::uint64_t seed,
                   const IterationCallback& on_iteration = {});

}  // namespace osmosis::distill
