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

#include "osmosis/experiments/pipeline.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <thread>

#include "osmosis/core/error.hpp"
#include "osmosis/core/hash.hpp"
#include "osmosis/core/log.hpp"
#include "osmosis/core/seed.hpp"
#include "osmosis/core/tensor_io.hpp"
#include "osmosis/defense/dpsgd.hpp"
#include "osmosis/defense/projection.hpp"
#include "osmosis/defense/strip.hpp"
#include "osmosis/defense/tsne.hpp"
#include "osmosis/distiller/dod_io.hpp"
#include "osmosis/experiments/config.hpp"
#include "osmosis/hijack/victim.hpp"
#include "osmosis/transporter/losses.hpp"

namespace osmosis::experiments {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string hash_json(const json& j) { return sha256_hex(j.dump()); }

datasets::LabeledImages load_split(const json& section, datasets::Role role, std::int64_t image_size,
                                   datasets::Split split, std::uint64_t seed) {
  auto spec = dataset_spec_from(section, role);
  spec.resolution[0] = image_size;
  spec.resolution[1] = image_size;
  const auto per_class = section.at(split == datasets::Split::train ? "train_per_class" : "test_per_class")
                             .get<std::int64_t>();
  return take_per_class(datasets::load_dataset(spec, split, seed), per_class);
}

datasets::TrainingSet one_hot_set(const datasets::LabeledImages& d, std::int64_t num_classes) {
  datasets::TrainingSet out;
  out.images = d.images;
  out.targets = torch::one_hot(d.labels, num_classes).to(torch::kFloat32);
  out.is_real.assign(static_cast<std::size_t>(d.size()), true);
  return out;
}

datasets::LabeledImages mapped_only(const datasets::LabeledImages& d, const datasets::LabelMapping& m) {
  std::vector<std::int64_t> keep;
  const auto classes = m.hijack_classes();
  const auto acc = d.labels.accessor<std::int64_t, 1>();
  for (std::int64_t i = 0; i < d.size(); ++i) {
    if (std::find(classes.begin(), classes.end(), acc[i]) != classes.end()) keep.push_back(i);
  }
  return d.select(torch::tensor(keep, torch::kInt64));
}

torch::Tensor head(const torch::Tensor& t, std::int64_t n) { return t.narrow(0, 0, std::min(n, t.size(0))); }

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return 2;
  if (dynamic_cast<const ArtifactError*>(&e)) return 3;
  return 4;
}

}  // namespace

// ---------------------------------------------------------------------------------------------
// RunRecord

const StageRecord* RunRecord::stage(const std::string& name) const {
  for (const auto& s : stages) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

ordered_json RunRecord::to_json() const {
  ordered_json j;
  j["fingerprint"] = fingerprint;
  j["mode"] = mode;
  j["axis"] = axis;
  j["axis_value"] = axis_value;
  j["status"] = status;
  j["error"] = error;
  j["exit_code"] = exit_code;
  j["stages"] = ordered_json::array();
  for (const auto& s : stages) {
    j["stages"].push_back({{"name", s.name},
                           {"key", s.key},
                           {"path", s.path.string()},
                           {"seconds", s.seconds},
                           {"cached", s.cached},
                           {"build_seconds", s.build_seconds}});
  }
  j["report"] = report ? report->to_json() : ordered_json(nullptr);
  j["defense"] = ordered_json::parse(defense.dump());
  j["config"] = ordered_json::parse(config.dump());
  return j;
}

RunRecord RunRecord::from_json(const json& j) {
  RunRecord r;
  try {
    r.fingerprint = j.at("fingerprint").get<std::string>();
    r.mode = j.at("mode").get<std::string>();
    r.axis = j.at("axis").get<std::string>();
    r.axis_value = j.at("axis_value");
    r.status = j.at("status").get<std::string>();
    r.error = j.value("error", "");
    r.exit_code = j.value("exit_code", 0);
    for (const auto& s : j.at("stages")) {
      r.stages.push_back({s.at("name").get<std::string>(), s.at("key").get<std::string>(),
                          s.at("path").get<std::string>(), s.at("seconds").get<double>(), s.at("cached").get<bool>(),
                          s.value("build_seconds", 0.0)});
    }
    if (!j.at("report").is_null()) r.report = hijack::EvalReport::from_json(j.at("report"));
    r.defense = j.value("defense", json::object());
    r.config = j.value("config", json::object());
  } catch (const json::exception& e) {
    throw ArtifactError(std::string("malformed run record: ") + e.what(), "record");
  }
  return r;
}

fs::path store_record(const fs::path& artifact_root, const RunRecord& record) {
  const auto dir = artifact_root / "runs" / record.fingerprint;
  fs::create_directories(dir);
  static std::atomic<unsigned> counter{0};
  const auto tmp = dir / ("record.json.tmp." + std::to_string(counter++));
  {
    std::ofstream out(tmp);
    out << record.to_json().dump(2) << "\n";
  }
  const auto path = dir / "record.json";
  fs::rename(tmp, path);
  return path;
}

RunRecord load_record(const fs::path& path) {
  const auto file = fs::is_directory(path) ? path / "record.json" : path;
  if (!fs::exists(file)) throw ArtifactError("run record missing: " + file.string(), "record");
  return RunRecord::from_json(read_json(file));
}

// ---------------------------------------------------------------------------------------------
// Data

datasets::LabeledImages take_per_class(const datasets::LabeledImages& data, std::int64_t k) {
  if (k <= 0 || data.size() == 0) return data;
  std::map<std::int64_t, std::int64_t> seen;
  std::vector<std::int64_t> keep;
  const auto acc = data.labels.accessor<std::int64_t, 1>();
  for (std::int64_t i = 0; i < data.size(); ++i) {
    if (seen[acc[i]]++ < k) keep.push_back(i);
  }
  auto out = data.select(torch::tensor(keep, torch::kInt64));
  out.skipped = data.skipped;
  return out;
}

TaskData load_task_data(const json& c) {
  const auto seed = c.at("seed").get<std::uint64_t>();
  const auto size = c.at("image_size").get<std::int64_t>();
  using datasets::Role;
  using datasets::Split;
  TaskData d;
  const auto& o = c.at("original_dataset");
  const auto& h = c.at("hijacking_dataset");
  d.original_train = load_split(o, Role::original, size, Split::train, derive_seed(seed, "data.original.train"));
  d.original_test = load_split(o, Role::original, size, Split::test, derive_seed(seed, "data.original.test"));
  d.hijack_train = load_split(h, Role::hijacking, size, Split::train, derive_seed(seed, "data.hijack.train"));
  d.hijack_test = load_split(h, Role::hijacking, size, Split::test, derive_seed(seed, "data.hijack.test"));
  const auto n_o = dataset_spec_from(o, Role::original).num_classes;
  const auto n_h = dataset_spec_from(h, Role::hijacking).num_classes;
  const auto& m = c.at("mapping");
  d.mapping = datasets::make_label_mapping(n_o, n_h, datasets::parse_mapping_strategy(m.at("strategy")),
                                           m.at("seed").get<std::uint64_t>());
  if (d.original_train.size() == 0) throw ConfigError("original_dataset has no training samples");
  if (d.hijack_train.size() == 0) throw ConfigError("hijacking_dataset has no training samples");
  return d;
}

// ---------------------------------------------------------------------------------------------
// Pipeline

Pipeline::Pipeline(json config, fs::path artifact_root)
    : config_(materialize_config(config)),
      fingerprint_(experiments::fingerprint(config_)),
      seed_(config_.at("seed").get<std::uint64_t>()),
      cache_(std::move(artifact_root)) {
  validate_config(config_);
  record_.fingerprint = fingerprint_;
  record_.mode = config_.at("mode").get<std::string>();
  record_.config = config_;
}

void Pipeline::use_osmosis(fs::path stage_dir) { osmosis_override_ = std::move(stage_dir); }
void Pipeline::use_trajectories(fs::path buffer_dir) { trajectories_override_ = std::move(buffer_dir); }
void Pipeline::use_dod(fs::path dod_dir) { dod_override_ = std::move(dod_dir); }

fs::path Pipeline::osmosis_set_path(const fs::path& stage_dir) {
  return fs::exists(stage_dir / "osmosis_set") ? stage_dir / "osmosis_set" : stage_dir;
}
fs::path Pipeline::dod_path(const fs::path& stage_dir) {
  return fs::exists(stage_dir / "dod") ? stage_dir / "dod" : stage_dir;
}
fs::path Pipeline::buffer_path(const fs::path& stage_dir) {
  return fs::exists(stage_dir / "buffer") ? stage_dir / "buffer" : stage_dir;
}

bool Pipeline::defense_enabled() const {
  const auto& d = config_.at("defense");
  for (const auto* probe : {"strip", "dpsgd", "projection", "cross_arch"}) {
    if (d.at(probe).at("enabled").get<bool>()) return true;
  }
  return false;
}

const TaskData& Pipeline::data() {
  if (!data_) data_ = load_task_data(config_);
  return *data_;
}

std::uint64_t Pipeline::stage_seed(const std::string& stage) const { return derive_seed(seed_, stage); }

std::string Pipeline::stage_key(const std::string& stage) {
  const auto& c = config_;
  const bool od = c.at("mode") == "od";
  const json data_inputs = {{"original_dataset", c.at("original_dataset")},
                            {"hijacking_dataset", c.at("hijacking_dataset")},
                            {"image_size", c.at("image_size")},
                            {"mapping", c.at("mapping")},
                            {"seed", c.at("seed")}};
  if (stage == "extractor") {
    const auto ckpt = c.at("extractor").at("checkpoint").get<std::string>();
    if (!ckpt.empty()) return hash_json({{"checkpoint", content_id(ckpt)}});
    return hash_json({{"extractor", c.at("extractor")}, {"image_size", c.at("image_size")}, {"seed", c.at("seed")}});
  }
  if (stage == "observer") {
    const auto ckpt = c.at("observer").at("checkpoint").get<std::string>();
    if (!ckpt.empty()) return hash_json({{"checkpoint", content_id(ckpt)}});
    return hash_json({{"observer", c.at("observer")}, {"data", data_inputs}});
  }
  if (stage == "osmosis") {
    if (osmosis_override_) return content_id(*osmosis_override_);
    return hash_json({{"transporter", c.at("transporter")},
                      {"carrier", c.at("carrier")},
                      {"data", data_inputs},
                      {"extractor", stage_key("extractor")}});
  }
  if (stage == "trajectories") {
    if (trajectories_override_) return content_id(*trajectories_override_);
    return hash_json({{"trajectories", c.at("trajectories")},
                      {"mode", c.at("mode")},
                      {"upstream", od ? json(stage_key("osmosis")) : data_inputs}});
  }
  if (stage == "distill") {
    if (dod_override_) return content_id(*dod_override_);
    return hash_json({{"distill", c.at("distill")},
                      {"mode", c.at("mode")},
                      {"trajectories", stage_key("trajectories")},
                      {"observer", stage_key("observer")},
                      {"upstream", od ? json(stage_key("osmosis")) : data_inputs}});
  }
  if (stage == "hijack") {
    return hash_json({{"victim", c.at("victim")},
                      {"dilution", c.at("dilution")},
                      {"distill", stage_key("distill")},
                      {"osmosis", stage_key("osmosis")},
                      {"data", data_inputs}});
  }
  if (stage == "defense") {
    json inputs = {{"defense", c.at("defense")}, {"hijack", stage_key("hijack")}};
    if (c.at("defense").at("strip").at("overlay_pool") == "clean_dod") {
      auto clean_cfg = config_;
      clean_cfg["mode"] = "clean_control";
      Pipeline clean(clean_cfg, cache_.root());
      inputs["clean_dod"] = clean.stage_key("distill");
    }
    return hash_json(inputs);
  }
  throw ConfigError("unknown stage '" + stage + "'");
}

std::optional<fs::path> Pipeline::existing(const std::string& stage) {
  if (stage == "osmosis" && osmosis_override_) return osmosis_override_;
  if (stage == "trajectories" && trajectories_override_) return trajectories_override_;
  if (stage == "distill" && dod_override_) return dod_override_;
  const auto key = stage_key(stage);
  if (cache_.has(stage, key)) return cache_.path(stage, key);
  return std::nullopt;
}

fs::path Pipeline::timed(const std::string& stage, const std::function<fs::path(bool*)>& body) {
  for (const auto& s : record_.stages) {
    if (s.name == stage) return s.path;
  }
  const auto start = std::chrono::steady_clock::now();
  bool cached = false;
  const auto dir = body(&cached);
  const auto seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  double build_seconds = seconds;
  if (cached && fs::exists(dir / "stage.json")) build_seconds = read_json(dir / "stage.json").value("build_seconds", 0.0);
  record_.stages.push_back({stage, stage_key(stage), dir, seconds, cached, build_seconds});
  log::info("stage " + stage + (cached ? " (cached)" : "") + " " + std::to_string(seconds) + "s");
  return dir;
}

fs::path Pipeline::classifier_stage(const std::string& stage) {
  const auto& section = config_.at(stage);
  const auto ckpt = section.at("checkpoint").get<std::string>();
  if (!ckpt.empty()) {
    return timed(stage, [&](bool* cached) {
      *cached = true;
      load_checkpoint(ckpt);
      return fs::path(ckpt);
    });
  }
  const auto key = stage_key(stage);
  return timed(stage, [&](bool* cached) {
    return cache_.get_or_build(stage, key, {{"stage", stage}}, [&](const fs::path& dir) {
      const auto size = config_.at("image_size").get<std::int64_t>();
      datasets::LabeledImages train;
      std::int64_t num_classes = 0;
      if (stage == "extractor") {
        const auto& p = section.at("pretrain");
        const json ds = {{"name", p.at("dataset")},
                         {"classes", p.at("classes")},
                         {"train_per_class", p.at("train_per_class")},
                         {"test_per_class", 0},
                         {"source_uri", ""}};
        train = load_split(ds, datasets::Role::original, size, datasets::Split::train,
                           derive_seed(seed_, "data.extractor"));
        num_classes = dataset_spec_from(ds, datasets::Role::original).num_classes;
      } else {
        train = data().original_train;
        num_classes = data().mapping.size();
      }
      const auto& hp = stage == "extractor" ? section.at("pretrain") : section;
      models::ArchSpec spec{models::parse_arch(section.at("arch").get<std::string>()), num_classes,
                            section.at("width").get<std::int64_t>(), size};
      auto model = models::make_classifier(spec, stage_seed(stage + ".init"));
      hijack::finetune_victim(*model, one_hot_set(train, num_classes),
                              {hp.at("epochs").get<std::int64_t>(), hp.at("batch_size").get<std::int64_t>(),
                               hp.at("lr").get<double>()},
                              stage_seed(stage + ".train"));
      save_checkpoint(dir / "model", *model, spec);
    }, cached);
  });
}

fs::path Pipeline::extractor_stage() {
  const auto dir = classifier_stage("extractor");
  return fs::exists(dir / "model") ? dir / "model" : dir;
}

fs::path Pipeline::observer_stage() {
  const auto dir = classifier_stage("observer");
  return fs::exists(dir / "model") ? dir / "model" : dir;
}

fs::path Pipeline::osmosis_stage() {
  if (osmosis_override_) {
    return timed("osmosis", [&](bool* cached) {
      *cached = true;
      transport::load_osmosis_set(osmosis_set_path(*osmosis_override_));
      return *osmosis_override_;
    });
  }
  const auto key = stage_key("osmosis");
  if (!cache_.has("osmosis", key)) extractor_stage();
  return timed("osmosis", [&](bool* cached) {
    return cache_.get_or_build("osmosis", key, {{"stage", "osmosis"}}, [&](const fs::path& dir) {
      auto extractor = load_checkpoint(extractor_stage()).model;
      models::freeze(*extractor);
      extractor->eval();
      transport::FeatureExtractor fe(extractor);
      const auto cfg = transporter_config_from(config_);
      const auto& d = data();
      json history = json::array();
      auto run = transport::train_transporter(d.original_train, d.hijack_train, d.mapping, fe, cfg,
                                              stage_seed("osmosis"), [&](const transport::EpochLoss& e) {
                                                history.push_back({{"epoch", e.epoch},
                                                                   {"total", e.total},
                                                                   {"visual", e.visual},
                                                                   {"semantic", e.semantic}});
                                              });
      transport::save_transporter(dir / "transporter", run.model, {{"train", history.back()}});
      transport::save_osmosis_set(dir / "osmosis_set", run.osmosis);
      const auto carrier = hijack::compute_carrier(d.original_train, config_.at("carrier").get<std::string>());
      save_tensor_dir(dir / "carrier", {{"carrier", carrier}},
                      {{"kind", "carrier"}, {"policy", config_.at("carrier")}});
      write_json(dir / "mapping.json", d.mapping.to_json());
      write_json(dir / "history.json", history);
    }, cached);
  });
}

fs::path Pipeline::trajectory_stage() {
  if (trajectories_override_) {
    return timed("trajectories", [&](bool* cached) {
      *cached = true;
      distill::load_trajectory_buffer(buffer_path(*trajectories_override_));
      return *trajectories_override_;
    });
  }
  const auto key = stage_key("trajectories");
  const bool od = config_.at("mode") == "od";
  std::optional<fs::path> osm;
  if (!cache_.has("trajectories", key) && od) osm = osmosis_stage();
  return timed("trajectories", [&](bool* cached) {
    return cache_.get_or_build("trajectories", key, {{"stage", "trajectories"}}, [&](const fs::path& dir) {
      torch::Tensor images;
      torch::Tensor labels;
      if (od) {
        const auto set = transport::load_osmosis_set(osmosis_set_path(*osm));
        images = set.x_c;
        labels = set.y_o;
      } else {
        images = data().original_train.images;
        labels = data().original_train.labels;
      }
      const auto& t = config_.at("trajectories");
      models::ToyCnnLayout layout;
      layout.width = t.at("width").get<std::int64_t>();
      layout.depth = t.at("depth").get<std::int64_t>();
      layout.num_classes = data().mapping.size();
      layout.resolution = config_.at("image_size").get<std::int64_t>();
      const auto cfg = expert_config_from(config_);
      std::vector<distill::ExpertTrajectory> buffer;
      const auto n = t.at("num_experts").get<std::int64_t>();
      for (std::int64_t i = 0; i < n; ++i) {
        buffer.push_back(distill::record_expert_trajectory(images, labels, t.at("arch").get<std::string>(), layout,
                                                           cfg, stage_seed("expert." + std::to_string(i))));
      }
      distill::save_trajectory_buffer(dir / "buffer", buffer);
    }, cached);
  });
}

fs::path Pipeline::distill_stage() {
  if (dod_override_) {
    return timed("distill", [&](bool* cached) {
      *cached = true;
      distill::load_dod(dod_path(*dod_override_));
      return *dod_override_;
    });
  }
  const auto key = stage_key("distill");
  const bool od = config_.at("mode") == "od";
  std::optional<fs::path> osm;
  std::optional<fs::path> traj;
  std::optional<fs::path> obs;
  if (!cache_.has("distill", key)) {
    if (od) osm = osmosis_stage();
    traj = trajectory_stage();
    obs = observer_stage();
  }
  return timed("distill", [&](bool* cached) {
    return cache_.get_or_build("distill", key, {{"stage", "distill"}}, [&](const fs::path& dir) {
      transport::OsmosisSet set;
      if (od) {
        set = transport::load_osmosis_set(osmosis_set_path(*osm));
      } else {
        const auto& d = data();
        set.x_c = d.original_train.images;
        set.y_o = d.original_train.labels;
        std::vector<std::int64_t> yh;
        for (std::int64_t i = 0; i < d.original_train.size(); ++i) {
          yh.push_back(d.mapping.to_hijack(set.y_o[i].item<std::int64_t>()));
        }
        set.y_h = torch::tensor(yh, torch::kInt64);
        set.id_o = d.original_train.ids;
        set.id_h = d.original_train.ids;
        set.mapping = d.mapping;
      }
      const auto buffer = distill::load_trajectory_buffer(buffer_path(*traj));
      auto observer_model = load_checkpoint(*obs).model;
      models::freeze(*observer_model);
      const distill::ObserverModel observer(observer_model, set.num_classes(),
                                            config_.at("image_size").get<std::int64_t>());
      const auto cfg = distill_config_from(config_);
      auto run = distill::distill(set, buffer, observer, cfg, stage_seed("distill"));
      run.dod.extra["surrogate_arch"] = buffer.front().arch_id;
      run.dod.extra["mode"] = config_.at("mode");
      distill::save_dod(dir / "dod", run.dod);
      write_json(dir / "losses.json", run.losses);
    }, cached);
  });
}

namespace {

datasets::TrainingSet victim_training_set(const distill::DistilledOsmosisSet& dod, const json& config,
                                          const TaskData& data, std::uint64_t seed) {
  auto training = dod.as_training_set();
  const auto ratio = config.at("dilution").at("ratio").get<double>();
  if (ratio > 0.0) training = datasets::dilute(training, data.original_train, ratio, seed);
  return training;
}

hijack::TestSets test_sets(const TaskData& data) {
  return {data.original_test, mapped_only(data.hijack_test, data.mapping)};
}

hijack::HijackConfig victim_config(const json& config, std::int64_t num_classes) {
  auto cfg = hijack_config_from(config);
  cfg.victim.arch.num_classes = num_classes;
  return cfg;
}

}  // namespace

fs::path Pipeline::hijack_stage() {
  const auto key = stage_key("hijack");
  std::optional<fs::path> osm;
  std::optional<fs::path> dist;
  if (!cache_.has("hijack", key)) {
    osm = osmosis_stage();
    dist = distill_stage();
  }
  return timed("hijack", [&](bool* cached) {
    return cache_.get_or_build("hijack", key, {{"stage", "hijack"}}, [&](const fs::path& dir) {
      const auto dod = distill::load_dod(dod_path(*dist));
      const auto training = victim_training_set(dod, config_, data(), stage_seed("dilution"));
      auto [transporter, tcfg] = transport::load_transporter(*osm / "transporter");
      const auto carrier = load_tensor_dir(*osm / "carrier").at("carrier");
      const auto cfg = victim_config(config_, dod.num_classes);
      std::vector<models::ClassifierPtr> victims;
      auto report = hijack::run_hijack_experiment(training, &transporter, carrier, dod.mapping, test_sets(data()), cfg,
                                                  stage_seed("hijack"), fingerprint_, &victims);
      report.extra["mode"] = config_.at("mode").get<std::string>();
      report.extra["ipc"] = dod.ipc;
      report.extra["n_patches"] = dod.n_patches;
      report.extra["dilution_ratio"] = config_.at("dilution").at("ratio").get<double>();
      report.extra["training_size"] = training.size();
      report.extra["real_samples"] = training.real_count();
      save_report(dir / "report.json", report);
      save_checkpoint(dir / "victim", *victims.front(), cfg.victim.arch);
    }, cached);
  });
}

fs::path Pipeline::defense_stage() {
  const auto key = stage_key("defense");
  std::optional<fs::path> osm;
  std::optional<fs::path> dist;
  std::optional<fs::path> hij;
  if (!cache_.has("defense", key)) {
    osm = osmosis_stage();
    dist = distill_stage();
    hij = hijack_stage();
  }
  return timed("defense", [&](bool* cached) {
    return cache_.get_or_build("defense", key, {{"stage", "defense"}}, [&](const fs::path& dir) {
      const auto& dcfg = config_.at("defense");
      const auto& d = data();
      const auto dod = distill::load_dod(dod_path(*dist));
      auto [transporter, tcfg] = transport::load_transporter(*osm / "transporter");
      const auto carrier = load_tensor_dir(*osm / "carrier").at("carrier");
      auto victim = load_checkpoint(*hij / "victim").model;
      const auto tests = test_sets(d);
      const auto hcfg = victim_config(config_, dod.num_classes);
      json summary = json::object();

      if (dcfg.at("strip").at("enabled").get<bool>()) {
        const auto& s = dcfg.at("strip");
        const auto n = s.at("max_queries").get<std::int64_t>();
        const auto attack =
            hijack::make_queries(&transporter, carrier, head(tests.hijack.images, n), hijack::QueryMode::transported);
        const auto benign = head(tests.original.images, n);
        torch::Tensor pool;
        const auto policy = s.at("overlay_pool").get<std::string>();
        if (policy == "clean_dod") {
          auto clean_cfg = config_;
          clean_cfg["mode"] = "clean_control";
          Pipeline clean(clean_cfg, cache_.root());
          pool = distill::load_dod(dod_path(clean.distill_stage())).images;
        } else {
          pool = d.original_train.images;
        }
        const auto result = defense::strip_report(*victim, attack, benign, pool, strip_config_from(config_),
                                                  stage_seed("strip"));
        write_json(dir / "strip.json", json::parse(result.to_json().dump()));
        auto mean = [](const std::vector<double>& v) {
          double acc = 0.0;
          for (auto x : v) acc += x;
          return v.empty() ? 0.0 : acc / static_cast<double>(v.size());
        };
        summary["strip"] = {{"overlap_statistic", result.overlap_statistic},
                            {"mean_entropy_attack", mean(result.entropies_attack)},
                            {"mean_entropy_benign", mean(result.entropies_benign)},
                            {"queries_attack", result.entropies_attack.size()},
                            {"queries_benign", result.entropies_benign.size()},
                            {"overlay_pool", policy}};
      }

      if (dcfg.at("dpsgd").at("enabled").get<bool>()) {
        const auto& p = dcfg.at("dpsgd");
        const defense::PrivacyConfig privacy{p.at("epsilon").get<double>(), p.at("delta").get<double>(),
                                             p.at("clip_norm").get<double>(), p.at("noise_multiplier").get<double>(),
                                             p.at("accountant").get<std::string>()};
        const auto training = victim_training_set(dod, config_, d, stage_seed("dilution"));
        auto private_victim = hijack::make_victim(hcfg.victim, stage_seed("dpsgd.init"));
        const auto rep = defense::dpsgd_finetune(*private_victim, training, privacy, hcfg.finetune, stage_seed("dpsgd"));
        auto j = json::parse(rep.to_json().dump());
        j["utility"] = hijack::evaluate_utility(*private_victim, tests.original).overall;
        j["asr"] = hijack::evaluate_asr(*private_victim, &transporter, carrier, dod.mapping, tests.hijack,
                                        hcfg.query_mode)
                       .overall;
        write_json(dir / "dpsgd.json", j);
        j.erase("epoch_losses");
        summary["dpsgd"] = j;
      }

      if (dcfg.at("projection").at("enabled").get<bool>()) {
        const auto n = dcfg.at("projection").at("samples_per_tag").get<std::int64_t>();
        defense::LabeledInputs inputs;
        std::vector<torch::Tensor> parts;
        auto add = [&](const std::string& tag, const torch::Tensor& images, const torch::Tensor& labels) {
          const auto k = std::min(n, images.size(0));
          parts.push_back(images.narrow(0, 0, k));
          for (std::int64_t i = 0; i < k; ++i) {
            inputs.tags.push_back(tag);
            inputs.class_ids.push_back(labels[i].item<std::int64_t>());
          }
        };
        add("original", tests.original.images, tests.original.labels);
        add("dod", dod.images, dod.class_ids.to(torch::kInt64));
        if (config_.at("mode") == "od") {
          const auto set = transport::load_osmosis_set(osmosis_set_path(*osm));
          add("osmosis", set.x_c, set.y_o);
        }
        inputs.images = torch::cat(parts);
        const auto proj = defense::feature_projection(*victim, inputs, tsne_config_from(config_),
                                                      stage_seed("projection"));
        proj.write_csv(dir / "projection.csv");
        write_json(dir / "projection.json", json::parse(proj.to_json().dump()));
        std::vector<std::int64_t> tag_ids;
        std::vector<std::string> tag_names;
        for (const auto& t : proj.tags) {
          auto it = std::find(tag_names.begin(), tag_names.end(), t);
          if (it == tag_names.end()) {
            tag_names.push_back(t);
            it = tag_names.end() - 1;
          }
          tag_ids.push_back(it - tag_names.begin());
        }
        summary["projection"] = {
            {"points", proj.tags.size()},
            {"tags", tag_names},
            {"silhouette_by_tag", defense::silhouette_score(proj.points, torch::tensor(tag_ids, torch::kInt64))},
            {"silhouette_by_class",
             defense::silhouette_score(proj.points, torch::tensor(proj.class_ids, torch::kInt64))}};
      }

      if (dcfg.at("cross_arch").at("enabled").get<bool>()) {
        std::vector<models::Arch> archs;
        for (const auto& a : dcfg.at("cross_arch").at("victims")) archs.push_back(models::parse_arch(a.get<std::string>()));
        const auto surrogate = dod.extra.value("surrogate_arch", std::string("toy_cnn"));
        const auto reports = defense::cross_arch_eval(dod, surrogate, archs, &transporter, carrier, tests, hcfg,
                                                      stage_seed("cross_arch"), fingerprint_);
        json rows = json::array();
        for (const auto& r : reports) {
          rows.push_back(
              {{"victim_arch", r.extra.at("victim_arch")}, {"utility", r.utility}, {"asr", r.asr}, {"asr_raw", r.asr_raw}});
        }
        write_json(dir / "cross_arch.json", rows);
        summary["cross_arch"] = rows;
      }
      write_json(dir / "defense.json", summary);
    }, cached);
  });
}

RunRecord Pipeline::run() {
  record_.status = "running";
  try {
    const auto hij = hijack_stage();
    record_.report = load_report(hij / "report.json");
    if (defense_enabled()) {
      record_.defense = read_json(defense_stage() / "defense.json");
    }
    record_.status = "ok";
  } catch (const std::exception& e) {
    record_.status = "failed";
    record_.error = e.what();
    record_.exit_code = exit_code_for(e);
    store_record(cache_.root(), record_);
    throw;
  }
  store_record(cache_.root(), record_);
  return record_;
}

RunRecord run_pipeline(const json& config, const fs::path& artifact_root) {
  Pipeline pipeline(config, artifact_root);
  return pipeline.run();
}

// ---------------------------------------------------------------------------------------------
// Sweeps

json sweep_point(const json& config, const std::string& axis, const json& value) {
  auto out = materialize_config(config);
  if (axis == "ipc" || axis == "key_patches") {
    if (!value.is_number_integer() || value.get<std::int64_t>() < 1) {
      throw ConfigError("sweep axis " + axis + " takes positive integers, got " + value.dump());
    }
    set_config_value(out, axis == "ipc" ? "distill.ipc" : "distill.n_patches", value);
  } else if (axis == "dilution") {
    if (!value.is_number() || value.get<double>() < 0.0 || value.get<double>() > 1.0) {
      throw ConfigError("sweep axis dilution takes ratios in [0, 1], got " + value.dump());
    }
    set_config_value(out, "dilution.ratio", value);
  } else if (axis == "extractor" || axis == "victim_arch") {
    if (!value.is_string()) throw ConfigError("sweep axis " + axis + " takes architecture names");
    models::parse_arch(value.get<std::string>());
    set_config_value(out, axis == "extractor" ? "extractor.arch" : "victim.arch", value);
  } else if (axis == "dataset_pair") {
    if (!value.is_object() || !value.contains("original_dataset") || !value.contains("hijacking_dataset")) {
      throw ConfigError("sweep axis dataset_pair takes objects with original_dataset and hijacking_dataset");
    }
    set_config_value(out, "original_dataset", value.at("original_dataset"));
    set_config_value(out, "hijacking_dataset", value.at("hijacking_dataset"));
  } else {
    throw ConfigError("unknown sweep axis '" + axis + "'");
  }
  out["sweep"]["axis"] = "";
  out["sweep"]["values"] = json::array();
  validate_config(out);
  return out;
}

std::vector<RunRecord> run_sweep(const json& config, const std::string& axis, const std::vector<json>& values,
                                 const fs::path& artifact_root) {
  if (values.empty()) throw ConfigError("sweep needs at least one value");
  const auto base = materialize_config(config);
  std::vector<json> points;
  for (const auto& v : values) points.push_back(sweep_point(base, axis, v));

  std::vector<RunRecord> records(points.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next++) < points.size();) {
      RunRecord rec;
      try {
        Pipeline pipeline(points[i], artifact_root);
        try {
          rec = pipeline.run();
        } catch (const std::exception&) {
          rec = pipeline.record();
        }
      } catch (const std::exception& e) {
        rec.fingerprint = fingerprint(points[i]);
        rec.mode = points[i].at("mode").get<std::string>();
        rec.status = "failed";
        rec.error = e.what();
        rec.exit_code = exit_code_for(e);
        rec.config = points[i];
      }
      rec.axis = axis;
      rec.axis_value = values[i];
      if (rec.status != "ok") log::error("sweep point " + values[i].dump() + " failed: " + rec.error);
      store_record(artifact_root, rec);
      records[i] = std::move(rec);
    }
  };
  const auto parallel = std::min<std::size_t>(base.at("sweep").at("parallelism").get<std::size_t>(), points.size());
  std::vector<std::thread> threads;
  for (std::size_t t = 1; t < parallel; ++t) threads.emplace_back(worker);
  worker();
  for (auto& t : threads) t.join();
  return records;
}

}  // namespace osmosis::experiments
