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

#include "osmosis/experiments/config.hpp"

#include <cmath>
#include <set>

#include "osmosis/core/error.hpp"
#include "osmosis/core/hash.hpp"
#include "osmosis/core/tensor_io.hpp"

namespace osmosis::experiments {

using nlohmann::json;

namespace {

json dataset_section(const std::string& name, std::vector<std::int64_t> classes) {
  return {{"name", name},
          {"classes", classes},
          {"train_per_class", 0},
          {"test_per_class", 0},
          {"source_uri", ""}};
}

bool is_number(const json& v) { return v.is_number_integer() || v.is_number_unsigned() || v.is_number_float(); }

bool compatible(const json& slot, const json& value) {
  if (slot.is_null()) return true;
  if (slot.is_number_float()) return is_number(value);
  if (slot.is_number_integer() || slot.is_number_unsigned()) {
    if (value.is_number_integer() || value.is_number_unsigned()) return true;
    if (value.is_number_float()) {
      const auto d = value.get<double>();
      return std::isfinite(d) && std::floor(d) == d;
    }
    return false;
  }
  return slot.type() == value.type();
}

json coerce(const json& slot, const json& value) {
  if ((slot.is_number_integer() || slot.is_number_unsigned()) && value.is_number_float()) {
    return static_cast<std::int64_t>(value.get<double>());
  }
  if (slot.is_number_float() && !value.is_number_float()) return value.get<double>();
  return value;
}

// Open-ended sections accept any keys.
bool free_form(const std::string& key) { return key == "sweep.values" || key.ends_with("classes"); }

void merge(json& base, const json& user, const std::string& prefix) {
  if (!user.is_object()) throw ConfigError("config section '" + prefix + "' must be an object");
  for (const auto& [k, v] : user.items()) {
    const auto key = prefix.empty() ? k : prefix + "." + k;
    if (!base.contains(k)) throw ConfigError("unknown config key '" + key + "'");
    auto& slot = base[k];
    if (slot.is_object() && !free_form(key)) {
      merge(slot, v, key);
      continue;
    }
    if (!free_form(key) && !compatible(slot, v)) {
      throw ConfigError("config key '" + key + "' expects " + std::string(slot.type_name()) + ", got " +
                        v.type_name());
    }
    slot = free_form(key) ? v : coerce(slot, v);
  }
}

double num(const json& j, const char* key) { return j.at(key).get<double>(); }
std::int64_t integer(const json& j, const char* key) { return j.at(key).get<std::int64_t>(); }

}  // namespace

json default_config() {
  return {
      {"schema_version", kConfigSchemaVersion},
      {"seed", 0},
      {"mode", "od"},
      {"image_size", 32},
      {"original_dataset", dataset_section("cifar10", {})},
      {"hijacking_dataset", dataset_section("mnist", {})},
      {"mapping", {{"strategy", "identity"}, {"seed", 0}}},
      {"extractor",
       {{"arch", "mobilenetv2"},
        {"width", 32},
        {"checkpoint", ""},
        {"pretrain", {{"dataset", "tiny_imagenet"}, {"classes", json::array()}, {"train_per_class", 0},
                      {"epochs", 3}, {"lr", 0.001}, {"batch_size", 64}}}}},
      {"observer",
       {{"arch", "resnet18"}, {"width", 32}, {"checkpoint", ""}, {"epochs", 3}, {"lr", 0.001}, {"batch_size", 64}}},
      {"transporter",
       {{"depth", 3},
        {"base_width", 32},
        {"epochs", 100},
        {"lr", 0.01},
        {"batch_size", 64},
        {"lambda_v", 1.0},
        {"lambda_s", 1.0}}},
      {"carrier", "balanced_mean"},
      {"trajectories",
       {{"arch", "toy_cnn"},
        {"width", 32},
        {"depth", 3},
        {"num_experts", 5},
        {"epochs", 6},
        {"steps", -1},
        {"lr", 0.01},
        {"batch_size", 64},
        {"snapshot_interval", 10}}},
      {"distill",
       {{"ipc", 50},
        {"n_patches", 4},
        {"crop_grid", {2, 2}},
        {"iterations", 300},
        {"expert_span", 2},
        {"lr_pixels", 100.0},
        {"momentum", 0.5},
        {"syn_lr_init", 0.01},
        {"lr_syn_lr", 1e-5},
        {"learn_syn_lr", true},
        {"min_syn_lr", 1e-5},
        {"learn_labels", false},
        {"lr_labels", 1.0},
        {"matching_labels", "hard"},
        {"relabel", "observer"},
        {"score_target", "original"}}},
      {"victim",
       {{"arch", "resnet18"},
        {"width", 32},
        {"pretrained", ""},
        {"epochs", 300},
        {"lr", 0.01},
        {"batch_size", 64},
        {"seeds", 1},
        {"query_mode", "transported"}}},
      {"dilution", {{"ratio", 0.0}}},
      {"defense",
       {{"strip", {{"enabled", false}, {"n_perturbations", 100}, {"blend_alpha", 0.5}, {"bins", 50},
                   {"max_queries", 200}, {"overlay_pool", "original_train"}}},
        {"dpsgd", {{"enabled", false}, {"epsilon", 8.0}, {"delta", 1e-5}, {"clip_norm", 1.0},
                   {"noise_multiplier", -1.0}, {"accountant", "rdp"}}},
        {"projection", {{"enabled", false}, {"perplexity", 30.0}, {"iterations", 1000}, {"learning_rate", 200.0},
                        {"samples_per_tag", 100}}},
        {"cross_arch", {{"enabled", false}, {"victims", {"toy_resnet"}}}}}},
      {"sweep", {{"axis", ""}, {"values", json::array()}, {"parallelism", 1}}},
  };
}

json materialize_config(const json& user) {
  auto out = default_config();
  if (user.contains("schema_version") && user["schema_version"] != kConfigSchemaVersion) {
    throw ConfigError("unsupported config schema_version " + user["schema_version"].dump());
  }
  merge(out, user, "");
  return out;
}

json load_config(const fs::path& path) {
  if (!fs::exists(path)) throw ConfigError("config file not found: " + path.string());
  json user;
  try {
    user = read_json(path);
  } catch (const json::exception& e) {
    throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  return materialize_config(user);
}

void set_config_value(json& config, const std::string& dotted_key, const json& value) {
  json patch = value;
  std::string rest = dotted_key;
  std::vector<std::string> parts;
  for (std::size_t pos; (pos = rest.find('.')) != std::string::npos; rest = rest.substr(pos + 1)) {
    parts.push_back(rest.substr(0, pos));
  }
  parts.push_back(rest);
  for (auto it = parts.rbegin(); it != parts.rend(); ++it) {
    if (it->empty()) throw ConfigError("malformed config key '" + dotted_key + "'");
    patch = json{{*it, patch}};
  }
  merge(config, patch, "");
}

void apply_override(json& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override '" + assignment + "' is not of the form key=value");
  }
  const auto key = assignment.substr(0, eq);
  const auto text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  set_config_value(config, key, value);
}

std::string fingerprint(const json& config) { return sha256_hex(config.dump()); }

void validate_config(const json& c) {
  if (c.at("schema_version") != kConfigSchemaVersion) throw ConfigError("unsupported config schema_version");
  const auto mode = c.at("mode").get<std::string>();
  if (mode != "od" && mode != "clean_control") throw ConfigError("mode must be 'od' or 'clean_control'");
  if (integer(c, "image_size") < 8) throw ConfigError("image_size must be >= 8");

  const auto o = dataset_spec_from(c.at("original_dataset"), datasets::Role::original);
  const auto h = dataset_spec_from(c.at("hijacking_dataset"), datasets::Role::hijacking);
  if (h.num_classes < o.num_classes) {
    throw ConfigError("hijacking_dataset needs at least as many classes as original_dataset");
  }
  datasets::parse_mapping_strategy(c.at("mapping").at("strategy").get<std::string>());
  models::parse_arch(c.at("extractor").at("arch").get<std::string>());
  models::parse_arch(c.at("observer").at("arch").get<std::string>());
  models::parse_arch(c.at("victim").at("arch").get<std::string>());
  if (c.at("extractor").at("checkpoint").get<std::string>().empty()) {
    datasets::dataset_spec(c.at("extractor").at("pretrain").at("dataset").get<std::string>());
  }
  if (c.at("trajectories").at("arch") != "toy_cnn") {
    throw ConfigError("trajectories.arch: only toy_cnn surrogates support trajectory matching");
  }
  if (integer(c.at("trajectories"), "num_experts") < 1) throw ConfigError("trajectories.num_experts must be >= 1");

  transporter_config_from(c).weights.validate();
  const auto d = distill_config_from(c);
  if (d.ipc < 1) throw ConfigError("distill.ipc must be >= 1");
  const auto root = static_cast<std::int64_t>(std::llround(std::sqrt(static_cast<double>(d.n_patches))));
  if (d.n_patches < 1 || root * root != d.n_patches) throw ConfigError("distill.n_patches must be a perfect square");
  if (d.iterations < 0) throw ConfigError("distill.iterations must be >= 0");

  const auto ratio = num(c.at("dilution"), "ratio");
  if (!(ratio >= 0.0 && ratio <= 1.0)) throw ConfigError("dilution.ratio must lie in [0, 1]");

  const auto& dp = c.at("defense").at("dpsgd");
  defense::PrivacyConfig privacy{num(dp, "epsilon"), num(dp, "delta"), num(dp, "clip_norm"),
                                 num(dp, "noise_multiplier"), dp.at("accountant").get<std::string>()};
  privacy.validate();
  const auto pool = c.at("defense").at("strip").at("overlay_pool").get<std::string>();
  if (pool != "original_train" && pool != "clean_dod") {
    throw ConfigError("defense.strip.overlay_pool must be 'original_train' or 'clean_dod'");
  }
  for (const auto& v : c.at("defense").at("cross_arch").at("victims")) models::parse_arch(v.get<std::string>());

  const auto& sw = c.at("sweep");
  const auto axis = sw.at("axis").get<std::string>();
  static const std::set<std::string> axes{"ipc", "key_patches", "dilution", "dataset_pair", "extractor",
                                          "victim_arch"};
  if (!axis.empty()) {
    if (!axes.count(axis)) throw ConfigError("sweep.axis '" + axis + "' is not a sweep axis");
    if (sw.at("values").empty()) throw ConfigError("sweep.values must be non-empty when sweep.axis is set");
  }
  if (integer(sw, "parallelism") < 1) throw ConfigError("sweep.parallelism must be >= 1");
}

datasets::DatasetSpec dataset_spec_from(const json& section, datasets::Role role) {
  auto spec = datasets::dataset_spec(section.at("name").get<std::string>());
  auto classes = section.at("classes").get<std::vector<std::int64_t>>();
  if (classes.empty()) {
    for (std::int64_t i = 0; i < spec.num_classes; ++i) classes.push_back(i);
  }
  for (auto k : classes) {
    if (k < 0 || k >= spec.num_classes) {
      throw ConfigError("dataset '" + spec.name + "' has no class " + std::to_string(k));
    }
  }
  const auto uri = section.at("source_uri").get<std::string>();
  if (!uri.empty()) spec.source_uri = uri;
  return datasets::with_classes(std::move(spec), std::move(classes), role);
}

transport::TransporterTrainConfig transporter_config_from(const json& c) {
  const auto& t = c.at("transporter");
  transport::TransporterTrainConfig out;
  out.arch.depth = integer(t, "depth");
  out.arch.base_width = integer(t, "base_width");
  out.arch.resolution = integer(c, "image_size");
  out.weights = {num(t, "lambda_v"), num(t, "lambda_s")};
  out.epochs = integer(t, "epochs");
  out.optimizer = {num(t, "lr"), integer(t, "batch_size")};
  return out;
}

distill::DistillConfig distill_config_from(const json& c) {
  const auto& d = c.at("distill");
  distill::DistillConfig out;
  out.ipc = integer(d, "ipc");
  out.n_patches = integer(d, "n_patches");
  const auto grid = d.at("crop_grid").get<std::vector<std::int64_t>>();
  if (grid.size() != 2) throw ConfigError("distill.crop_grid must have two entries");
  out.crop_grid = {grid[0], grid[1]};
  out.iterations = integer(d, "iterations");
  out.expert_span = integer(d, "expert_span");
  out.lr_pixels = num(d, "lr_pixels");
  out.momentum = num(d, "momentum");
  out.syn_lr_init = num(d, "syn_lr_init");
  out.lr_syn_lr = num(d, "lr_syn_lr");
  out.learn_syn_lr = d.at("learn_syn_lr").get<bool>();
  out.min_syn_lr = num(d, "min_syn_lr");
  out.learn_labels = d.at("learn_labels").get<bool>();
  out.lr_labels = num(d, "lr_labels");
  out.matching_labels = distill::parse_label_source(d.at("matching_labels").get<std::string>());
  out.relabel = distill::parse_label_source(d.at("relabel").get<std::string>());
  out.score_target = distill::parse_score_target(d.at("score_target").get<std::string>());
  return out;
}

distill::ExpertTrainConfig expert_config_from(const json& c) {
  const auto& t = c.at("trajectories");
  return {num(t, "lr"), integer(t, "batch_size"), integer(t, "epochs"), integer(t, "steps"),
          integer(t, "snapshot_interval")};
}

hijack::HijackConfig hijack_config_from(const json& c) {
  const auto& v = c.at("victim");
  hijack::HijackConfig out;
  out.victim.arch.arch = models::parse_arch(v.at("arch").get<std::string>());
  out.victim.arch.width = integer(v, "width");
  out.victim.arch.resolution = integer(c, "image_size");
  out.victim.pretrained = v.at("pretrained").get<std::string>();
  out.finetune = {integer(v, "epochs"), integer(v, "batch_size"), num(v, "lr")};
  out.victim_seeds = integer(v, "seeds");
  out.query_mode = hijack::parse_query_mode(v.at("query_mode").get<std::string>());
  return out;
}

defense::StripConfig strip_config_from(const json& c) {
  const auto& s = c.at("defense").at("strip");
  return {integer(s, "n_perturbations"), num(s, "blend_alpha"), integer(s, "bins")};
}

defense::TsneConfig tsne_config_from(const json& c) {
  const auto& p = c.at("defense").at("projection");
  defense::TsneConfig out;
  out.perplexity = num(p, "perplexity");
  out.iterations = integer(p, "iterations");
  out.learning_rate = num(p, "learning_rate");
  return out;
}

}  // namespace osmosis::experiments
