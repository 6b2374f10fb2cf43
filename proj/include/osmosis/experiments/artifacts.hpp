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
#include <string>
#include <variant>

#include <json.hpp>

#include "osmosis/distiller/distill.hpp"
#include "osmosis/distiller/trajectory.hpp"
#include "osmosis/hijack/evaluation.hpp"
#include "osmosis/models/classifier.hpp"
#include "osmosis/transporter/training.hpp"

namespace osmosis::experiments {

enum class ArtifactKind { osmosis_set, trajectory, dod, checkpoint, report };

std::string to_string(ArtifactKind kind);
ArtifactKind parse_artifact_kind(const std::string& name);

struct Checkpoint {
  models::ClassifierPtr model;
  models::ArchSpec spec;
};

using Artifact = std::variant<transport::OsmosisSet, distill::ExpertTrajectory, distill::DistilledOsmosisSet,
                              Checkpoint, hijack::EvalReport>;

ArtifactKind kind_of(const Artifact& artifact);

void save_checkpoint(const std::filesystem::path& dir, const models::Classifier& model, const models::ArchSpec& spec);
Checkpoint load_checkpoint(const std::filesystem::path& dir);

void save_report(const std::filesystem::path& path, const hijack::EvalReport& report);
hijack::EvalReport load_report(const std::filesystem::path& path);

/// Writes `artifact` at `path` atomically.
void save_artifact(const std::filesystem::path& path, const Artifact& artifact);
/// Loads and validates; a kind, schema or hash mismatch raises ArtifactError naming the field.
Artifact load_artifact(const std::filesystem::path& path, ArtifactKind kind);

/// SHA-256 over the manifests of an artifact directory, which carry the payload hashes.
std::string content_id(const std::filesystem::path& path);

/// Content-addressed stage outputs under `<root>/stages/<stage>/<key>/`.
class StageCache {
 public:
  explicit StageCache(std::filesystem::path root);

  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path path(const std::string& stage, const std::string& key) const;
  bool has(const std::string& stage, const std::string& key) const;

  /// Returns the stage directory, running `build` into a staging directory on a miss.
  /// `cached` reports whether the stage was reused.
  std::filesystem::path get_or_build(const std::string& stage, const std::string& key, const nlohmann::json& inputs,
                                     const std::function<void(const std::filesystem::path&)>& build,
                                     bool* cached = nullptr);

 private:
  std::filesystem::path root_;
};

/// OD_ARTIFACT_ROOT if set, else ./artifacts.
std::filesystem::path default_artifact_root();

}  // namespace osmosis::experiments
