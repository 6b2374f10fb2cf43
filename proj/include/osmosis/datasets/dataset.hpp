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
#include <filesystem>
#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace osmosis::datasets {

enum class Role { original, hijacking };
enum class Split { train, test };

std::string to_string(Role role);
std::string to_string(Split split);

struct DatasetSpec {
  std::string name;
  Role role = Role::original;
  /// Classes the experiment uses. Labels are re-indexed to positions in `classes`.
  std::int64_t num_classes = 10;
  /// Target (height, width, source channels). Decoded images are resized to height x width
  /// and always delivered with three channels.
  std::array<std::int64_t, 3> resolution{32, 32, 1};
  /// Maximum number of samples taken from each split; 0 yields an empty split.
  std::array<std::int64_t, 2> split_sizes{0, 0};
  /// "idx:<dir>" for IDX files, "cache:<root>" for a manifest cache directory.
  std::string source_uri;
  /// Raw class ids in task order. Empty means 0 .. num_classes-1.
  std::vector<std::int64_t> classes;
  std::vector<std::string> class_names;

  std::vector<std::int64_t> class_ids() const;
  void validate() const;
};

/// Images (N, 3, H, W) in [0, 1] with task-space labels (N) and stable per-sample ids.
struct LabeledImages {
  torch::Tensor images;
  torch::Tensor labels;
  std::vector<std::int64_t> ids;
  std::int64_t skipped = 0;

  std::int64_t size() const { return images.defined() ? images.size(0) : 0; }
  LabeledImages select(const torch::Tensor& index) const;
  /// Samples whose label equals `label`.
  LabeledImages of_class(std::int64_t label) const;
};

/// Registry of known datasets. Throws ConfigError for unknown names.
DatasetSpec dataset_spec(const std::string& name);
std::vector<std::string> registered_datasets();

/// Restricts a spec to raw class ids `classes` and assigns its role.
DatasetSpec with_classes(DatasetSpec spec, std::vector<std::int64_t> classes, Role role);

/// Called when a spec's source is missing; returns the path that now holds the data.
using FetchHook = std::function<std::filesystem::path(const DatasetSpec&, Split)>;
void set_fetch_hook(FetchHook hook);

/// Loads one split. Ordering is a seeded permutation; corrupt records are skipped and counted.
LabeledImages load_dataset(const DatasetSpec& spec, Split split, std::uint64_t seed = 0);

/// Writes images as PNG files plus manifest.json under `<root>/<name>/<split>/`.
void write_cache_split(const std::filesystem::path& root, const DatasetSpec& spec, Split split,
                       const std::vector<std::pair<torch::Tensor, std::int64_t>>& samples);

/// Reads an ImageNet-1K class index (one class id per line).
std::vector<std::string> read_class_index(const std::filesystem::path& path);

/// Two disjoint specs of classes_total/2 classes each drawn from `index` with `seed`.
std::pair<DatasetSpec, DatasetSpec> build_imagenet_subset(const std::vector<std::string>& index,
                                                          std::uint64_t seed,
                                                          std::int64_t classes_total = 200,
                                                          std::int64_t resolution = 224);

}  // namespace osmosis::datasets
