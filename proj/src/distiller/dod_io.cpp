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

#include "osmosis/distiller/dod_io.hpp"

#include "osmosis/core/error.hpp"
#include "osmosis/core/hash.hpp"
#include "osmosis/core/tensor_io.hpp"

namespace osmosis::distill {

namespace {

Json tensor_entry(const std::string& file, const std::vector<std::int64_t>& shape, const Json& sha) {
  return {{"file", file}, {"shape", shape}, {"sha256", sha}};
}

Json migrate_v1(const Json& m) {
  const auto k = m.at("classes").get<std::int64_t>();
  const auto ipc = m.at("ipc").get<std::int64_t>();
  const auto c = m.at("channels").get<std::int64_t>();
  const auto side = m.at("image_size").get<std::int64_t>();
  Json provenance = Json::array();
  for (const auto& image : m.at("provenance")) {
    Json cells = Json::array();
    for (const auto& cell : image) cells.push_back({{"parent_id", cell.at(0)}, {"row", cell.at(1)}, {"col", cell.at(2)}});
    provenance.push_back(cells);
  }
  const auto count = ipc * k;
  return {{"schema_version", kDodSchemaVersion},
          {"kind", "dod"},
          {"ipc", ipc},
          {"num_classes", k},
          {"n_patches", m.at("patches_per_image")},
          {"resolution", {c, side, side}},
          {"count", count},
          {"mapping", m.at("mapping")},
          {"class_ids", m.at("labels")},
          {"provenance", provenance},
          {"extra", Json::object()},
          {"tensors",
           {{"images", tensor_entry(m.at("images_file").get<std::string>(), {count, c, side, side}, nullptr)},
            {"soft_labels", tensor_entry(m.at("labels_file").get<std::string>(), {count, k}, nullptr)}}}};
}

torch::Tensor read_entry(const fs::path& dir, const Json& entry, const std::string& name) {
  const auto file = entry.at("file").get<std::string>();
  const auto path = dir / file;
  if (!fs::exists(path)) throw ArtifactError("missing DOD tensor " + path.string(), name);
  if (!entry.at("sha256").is_null() && sha256_file(path) != entry.at("sha256").get<std::string>()) {
    throw ArtifactError("content hash mismatch for DOD tensor '" + name + "'", name);
  }
  return read_f32(path, entry.at("shape").get<std::vector<std::int64_t>>());
}

}  // namespace

nlohmann::json dod_manifest(const DistilledOsmosisSet& dod) {
  Json provenance = Json::array();
  for (const auto& image : dod.provenance) {
    Json cells = Json::array();
    for (const auto& p : image) cells.push_back({{"parent_id", p.parent_id}, {"row", p.grid_pos.row}, {"col", p.grid_pos.col}});
    provenance.push_back(cells);
  }
  const auto ids = dod.class_ids.to(torch::kInt64).contiguous();
  return {{"schema_version", kDodSchemaVersion},
          {"kind", "dod"},
          {"ipc", dod.ipc},
          {"num_classes", dod.num_classes},
          {"n_patches", dod.n_patches},
          {"resolution", {dod.images.size(1), dod.images.size(2), dod.images.size(3)}},
          {"count", dod.size()},
          {"mapping", dod.mapping.to_json()},
          {"class_ids", std::vector<std::int64_t>(ids.data_ptr<std::int64_t>(), ids.data_ptr<std::int64_t>() + ids.numel())},
          {"provenance", provenance},
          {"extra", dod.extra}};
}

nlohmann::json migrate_dod_manifest(const nlohmann::json& manifest) {
  try {
    if (manifest.contains("schema_version")) {
      const auto v = manifest.at("schema_version").get<int>();
      if (v == kDodSchemaVersion) return manifest;
      throw ArtifactError("unsupported DOD schema version " + std::to_string(v), "schema_version");
    }
    if (manifest.value("version", 0) == 1) return migrate_v1(manifest);
  } catch (const nlohmann::json::exception& e) {
    throw ArtifactError(std::string("malformed DOD manifest: ") + e.what(), "dod.json");
  }
  throw ArtifactError("DOD manifest has no schema version", "schema_version");
}

void save_dod(const fs::path& dir, const DistilledOsmosisSet& dod) {
  require(dod.size() == dod.ipc * dod.num_classes, "DOD cardinality must equal ipc * num_classes");
  require(dod.soft_labels.size(0) == dod.size(), "DOD soft-label count mismatch");
  StagingDir staging(dir);
  auto manifest = dod_manifest(dod);
  const auto img_sha = write_f32(staging.path() / "images.f32", dod.images);
  const auto lab_sha = write_f32(staging.path() / "soft_labels.f32", dod.soft_labels);
  manifest["tensors"] = {
      {"images", tensor_entry("images.f32", dod.images.sizes().vec(), img_sha)},
      {"soft_labels", tensor_entry("soft_labels.f32", dod.soft_labels.sizes().vec(), lab_sha)}};
  write_json(staging.path() / "dod.json", manifest);
  staging.commit();
}

DistilledOsmosisSet load_dod(const fs::path& dir) {
  if (!fs::exists(dir / "dod.json")) throw ArtifactError("missing DOD manifest in " + dir.string(), "dod.json");
  const auto m = migrate_dod_manifest(read_json(dir / "dod.json"));
  DistilledOsmosisSet dod;
  try {
    dod.ipc = m.at("ipc").get<std::int64_t>();
    dod.num_classes = m.at("num_classes").get<std::int64_t>();
    dod.n_patches = m.at("n_patches").get<std::int64_t>();
    dod.mapping = datasets::LabelMapping::from_json(m.at("mapping"));
    dod.class_ids = torch::tensor(m.at("class_ids").get<std::vector<std::int64_t>>(), torch::kInt64);
    for (const auto& image : m.at("provenance")) {
      std::vector<ProvenanceEntry> cells;
      for (const auto& c : image) {
        cells.push_back({c.at("parent_id").get<std::int64_t>(), {c.at("row").get<std::int64_t>(), c.at("col").get<std::int64_t>()}});
      }
      dod.provenance.push_back(std::move(cells));
    }
    dod.extra = m.value("extra", Json::object());
    dod.images = read_entry(dir, m.at("tensors").at("images"), "images");
    dod.soft_labels = read_entry(dir, m.at("tensors").at("soft_labels"), "soft_labels");
  } catch (const nlohmann::json::exception& e) {
    throw ArtifactError(std::string("malformed DOD manifest: ") + e.what(), "dod.json");
  }
  if (dod.size() != dod.ipc * dod.num_classes) throw ArtifactError("DOD image count does not equal ipc * classes", "count");
  if (dod.class_ids.size(0) != dod.size()) throw ArtifactError("DOD class id count mismatch", "class_ids");
  return dod;
}

}  // namespace osmosis::distill
