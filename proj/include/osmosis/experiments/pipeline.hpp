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

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "osmosis/datasets/dataset.hpp"
#include "osmosis/datasets/label_mapping.hpp"
#include "osmosis/experiments/artifacts.hpp"
#include "osmosis/hijack/evaluation.hpp"

namespace osmosis::experiments {

struct StageRecord {
  std::string name;
  std::string key;
  std::filesystem::path path;
  double seconds = 0.0;
  bool cached = false;
  /// Time the stage took when it was built, cached or not.
  double build_seconds = 0.0;
};

struct RunRecord {
  std::string fingerprint;
  std::string mode;
  std::string axis;
  nlohmann::json axis_value;
  std::string status = "pending";
  std::string error;
  int exit_code = 0;
  std::vector<StageRecord> stages;
  std::optional<hijack::EvalReport> report;
  nlohmann::json defense = nlohmann::json::object();
  nlohmann::json config;

  const StageRecord* stage(const std::string& name) const;
  nlohmann::ordered_json to_json() const;
  static RunRecord from_json(const nlohmann::json& j);
};

/// Atomically writes `<root>/runs/<fingerprint>/record.json` and returns its path.
std::filesystem::path store_record(const std::filesystem::path& artifact_root, const RunRecord& record);
RunRecord load_record(const std::filesystem::path& path);

/// Original and hijacking splits restricted to the configured classes, plus the label mapping.
struct TaskData {
  datasets::LabeledImages original_train;
  datasets::LabeledImages original_test;
  datasets::LabeledImages hijack_train;
  datasets::LabeledImages hijack_test;
  datasets::LabelMapping mapping;
};

TaskData load_task_data(const nlohmann::json& config);

/// First `k` samples of each class in dataset order; k = 0 keeps everything.
datasets::LabeledImages take_per_class(const datasets::LabeledImages& data, std::int64_t k);

/// Stage-by-stage execution of one materialized config against a stage cache. Each stage
/// method returns the stage directory and reuses a cached result when all inputs match.
class Pipeline {
 public:
  Pipeline(nlohmann::json config, std::filesystem::path artifact_root);

  const nlohmann::json& config() const { return config_; }
  const std::string& fingerprint() const { return fingerprint_; }
  const RunRecord& record() const { return record_; }
  StageCache& cache() { return cache_; }

  /// Replace a stage's output with an existing artifact directory.
  void use_osmosis(std::filesystem::path stage_dir);
  void use_trajectories(std::filesystem::path buffer_dir);
  void use_dod(std::filesystem::path dod_dir);

  /// Cache keys, computed without running anything.
  std::string stage_key(const std::string& stage);
  /// Directory of a stage if it already exists.
  std::optional<std::filesystem::path> existing(const std::string& stage);

  std::filesystem::path extractor_stage();
  std::filesystem::path observer_stage();
  std::filesystem::path osmosis_stage();
  std::filesystem::path trajectory_stage();
  std::filesystem::path distill_stage();
  std::filesystem::path hijack_stage();
  std::filesystem::path defense_stage();

  /// All stages in order; defenses run only when a probe is enabled.
  RunRecord run();

  /// Artifact paths inside stage directories.
  static std::filesystem::path osmosis_set_path(const std::filesystem::path& stage_dir);
  static std::filesystem::path dod_path(const std::filesystem::path& stage_dir);
  static std::filesystem::path buffer_path(const std::filesystem::path& stage_dir);

  bool defense_enabled() const;

 private:
  const TaskData& data();
  std::uint64_t stage_seed(const std::string& stage) const;
  std::filesystem::path timed(const std::string& stage, const std::function<std::filesystem::path(bool*)>& body);
  std::filesystem::path classifier_stage(const std::string& stage);

  nlohmann::json config_;
  std::string fingerprint_;
  std::uint64_t seed_;
  StageCache cache_;
  RunRecord record_;
  std::optional<TaskData> data_;
  std::optional<std::filesystem::path> osmosis_override_;
  std::optional<std::filesystem::path> trajectories_override_;
  std::optional<std::filesystem::path> dod_override_;
};

RunRecord run_pipeline(const nlohmann::json& config, const std::filesystem::path& artifact_root);

/// Config key a sweep axis writes to; throws ConfigError for unknown axes or invalid values.
nlohmann::json sweep_point(const nlohmann::json& config, const std::string& axis, const nlohmann::json& value);

/// One record per value. A failing point is recorded with its error and the sweep continues.
std::vector<RunRecord> run_sweep(const nlohmann::json& config, const std::string& axis,
                                 const std::vector<nlohmann::json>& values,
                                 const std::filesystem::path& artifact_root);

}  // namespace osmosis::experiments
