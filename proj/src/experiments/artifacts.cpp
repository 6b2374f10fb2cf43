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

#include "osmosis/experiments/artifacts.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>

#include "osmosis/core/error.hpp"
#include "osmosis/core/hash.hpp"
#include "osmosis/core/tensor_io.hpp"
#include "osmosis/distiller/dod_io.hpp"

namespace osmosis::experiments {

std::string to_string(ArtifactKind kind) {
  switch (kind) {
    case ArtifactKind::osmosis_set: return "osmosis_set";
    case ArtifactKind::trajectory: return "trajectory";
    case ArtifactKind::dod: return "dod";
    case ArtifactKind::checkpoint: return "checkpoint";
    case ArtifactKind::report: return "report";
  }
  return "?";
}

ArtifactKind parse_artifact_kind(const std::string& name) {
  for (auto k : {ArtifactKind::osmosis_set, ArtifactKind::trajectory, ArtifactKind::dod, ArtifactKind::checkpoint,
                 ArtifactKind::report}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown artifact kind '" + name + "'");
}

ArtifactKind kind_of(const Artifact& artifact) { return static_cast<ArtifactKind>(artifact.index()); }

void save_checkpoint(const fs::path& dir, const models::Classifier& model, const models::ArchSpec& spec) {
  save_module(dir, model,
              {{"kind", "checkpoint"},
               {"arch", models::to_string(spec.arch)},
               {"num_classes", spec.num_classes},
               {"width", spec.width},
               {"resolution", spec.resolution}});
}

Checkpoint load_checkpoint(const fs::path& dir) {
  if (!fs::exists(dir / "config.json")) throw ArtifactError("checkpoint missing: " + dir.string(), "config.json");
  const auto config = read_json(dir / "config.json");
  if (config.value("kind", "") != "checkpoint") throw ArtifactError("not a checkpoint: " + dir.string(), "kind");
  Checkpoint out;
  try {
    out.spec.arch = models::parse_arch(config.at("arch").get<std::string>());
    out.spec.num_classes = config.at("num_classes").get<std::int64_t>();
    out.spec.width = config.at("width").get<std::int64_t>();
    out.spec.resolution = config.at("resolution").get<std::int64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ArtifactError("checkpoint config malformed: " + std::string(e.what()), "config.json");
  }
  out.model = models::make_classifier(out.spec);
  load_module(dir, *out.model);
  out.model->eval();
  return out;
}

void save_report(const fs::path& path, const hijack::EvalReport& report) {
  const auto tmp = fs::path(path.string() + ".tmp");
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  {
    std::ofstream out(tmp);
    out << report.to_json().dump(2) << "\n";
  }
  fs::rename(tmp, path);
}

hijack::EvalReport load_report(const fs::path& path) {
  if (!fs::exists(path)) throw ArtifactError("report missing: " + path.string(), "report");
  try {
    return hijack::EvalReport::from_json(read_json(path));
  } catch (const nlohmann::json::exception& e) {
    throw ArtifactError("report malformed: " + std::string(e.what()), "report");
  }
}

void save_artifact(const fs::path& path, const Artifact& artifact) {
  std::visit(
      [&](const auto& a) {
        using T = std::decay_t<decltype(a)>;
        if constexpr (std::is_same_v<T, transport::OsmosisSet>) {
          transport::save_osmosis_set(path, a);
        } else if constexpr (std::is_same_v<T, distill::ExpertTrajectory>) {
          distill::save_trajectory(path, a);
        } else if constexpr (std::is_same_v<T, distill::DistilledOsmosisSet>) {
          distill::save_dod(path, a);
        } else if constexpr (std::is_same_v<T, Checkpoint>) {
          save_checkpoint(path, *a.model, a.spec);
        } else {
          save_report(path, a);
        }
      },
      artifact);
}

Artifact load_artifact(const fs::path& path, ArtifactKind kind) {
  switch (kind) {
    case ArtifactKind::osmosis_set: return transport::load_osmosis_set(path);
    case ArtifactKind::trajectory: return distill::load_trajectory(path);
    case ArtifactKind::dod: return distill::load_dod(path);
    case ArtifactKind::checkpoint: return load_checkpoint(path);
    case ArtifactKind::report: return load_report(path);
  }
  throw ConfigError("unknown artifact kind");
}

std::string content_id(const fs::path& path) {
  if (!fs::exists(path)) throw ArtifactError("artifact missing: " + path.string(), path.filename().string());
  if (fs::is_regular_file(path)) return sha256_file(path);
  std::vector<fs::path> manifests;
  for (const auto& e : fs::recursive_directory_iterator(path)) {
    if (e.is_regular_file() && e.path().extension() == ".json") manifests.push_back(e.path());
  }
  std::sort(manifests.begin(), manifests.end());
  Sha256 h;
  for (const auto& m : manifests) {
    h.update(fs::relative(m, path).generic_string());
    h.update(sha256_file(m));
  }
  return h.hex();
}

namespace {

std::mutex& lock_for(const fs::path& dir) {
  static std::mutex table_mutex;
  static std::map<std::string, std::unique_ptr<std::mutex>> table;
  std::lock_guard guard(table_mutex);
  auto& slot = table[fs::absolute(dir).lexically_normal().string()];
  if (!slot) slot = std::make_unique<std::mutex>();
  return *slot;
}

}  // namespace

StageCache::StageCache(fs::path root) : root_(std::move(root)) {}

fs::path StageCache::path(const std::string& stage, const std::string& key) const {
  return root_ / "stages" / stage / key;
}

bool StageCache::has(const std::string& stage, const std::string& key) const {
  return fs::exists(path(stage, key) / "stage.json");
}

fs::path StageCache::get_or_build(const std::string& stage, const std::string& key, const nlohmann::json& inputs,
                                  const std::function<void(const fs::path&)>& build, bool* cached) {
  const auto dir = path(stage, key);
  std::lock_guard guard(lock_for(dir));
  if (has(stage, key)) {
    if (cached) *cached = true;
    return dir;
  }
  StagingDir staging(dir);
  const auto start = std::chrono::steady_clock::now();
  build(staging.path());
  const auto seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_json(staging.path() / "stage.json",
             {{"stage", stage}, {"key", key}, {"inputs", inputs}, {"build_seconds", seconds}});
  staging.commit();
  if (cached) *cached = false;
  return dir;
}

fs::path default_artifact_root() {
  if (const char* env = std::getenv("OD_ARTIFACT_ROOT"); env && *env) return env;
  return "artifacts";
}

}  // namespace osmosis::experiments
