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

#include "osmosis/cli/cli.hpp"

#include <CLI11.hpp>

#include <exception>
#include <iostream>
#include <sstream>

#include "osmosis/core/error.hpp"
#include "osmosis/core/log.hpp"
#include "osmosis/core/seed.hpp"
#include "osmosis/core/tensor_io.hpp"
#include "osmosis/distiller/dod_io.hpp"
#include "osmosis/experiments/config.hpp"
#include "osmosis/experiments/pipeline.hpp"
#include "osmosis/experiments/report.hpp"

namespace osmosis::cli {

using nlohmann::json;
namespace ex = osmosis::experiments;

namespace {

struct Invocation {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out;
  std::int64_t seed = -1;
  int verbose = 0;
};

class Summary {
 public:
  explicit Summary(std::ostream& out) : out_(out) {}
  template <typename T>
  void add(const std::string& key, const T& value) {
    std::ostringstream os;
    os << std::boolalpha << value;
    lines_.emplace_back(key, os.str());
  }
  void add(const std::string& key, double value) {
    std::ostringstream os;
    os.precision(6);
    os << std::fixed << value;
    lines_.emplace_back(key, os.str());
  }
  ~Summary() {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto& [k, v] : lines_) out_ << k << "=" << v << "\n";
  }

 private:
  std::ostream& out_;
  std::vector<std::pair<std::string, std::string>> lines_;
};

json build_config(const Invocation& inv) {
  json config = inv.config_path.empty() ? ex::default_config() : ex::load_config(inv.config_path);
  for (const auto& o : inv.overrides) ex::apply_override(config, o);
  if (inv.seed >= 0) config["seed"] = inv.seed;
  ex::validate_config(config);
  return config;
}

fs::path artifact_root(const Invocation& inv) {
  return inv.out.empty() ? ex::default_artifact_root() : fs::path(inv.out);
}

void need(const std::optional<fs::path>& dir, const std::string& what, const std::string& hint) {
  if (!dir) throw ArtifactError(what + " not found; " + hint, what);
}

fs::path existing_path(const std::string& path, const std::string& what, const std::string& hint) {
  if (!fs::exists(path)) throw ArtifactError(what + " not found at " + path + "; " + hint, what);
  return path;
}

double mean_of(const json& v) {
  double acc = 0.0;
  for (const auto& x : v) acc += x.get<double>();
  return v.empty() ? 0.0 : acc / static_cast<double>(v.size());
}

void cmd_osmose(const Invocation& inv, std::ostream& out) {
  ex::Pipeline p(build_config(inv), artifact_root(inv));
  const auto dir = p.osmosis_stage();
  const auto set = transport::load_osmosis_set(ex::Pipeline::osmosis_set_path(dir));
  const auto& st = p.record().stages.back();
  Summary s(out);
  s.add("stage", "osmose");
  s.add("fingerprint", p.fingerprint());
  s.add("cached", st.cached);
  s.add("seconds", st.seconds);
  s.add("osmosis_dir", dir.string());
  s.add("samples", set.size());
  s.add("classes", set.num_classes());
}

void cmd_distill(const Invocation& inv, const std::string& from, const std::string& trajectories, std::ostream& out) {
  ex::Pipeline p(build_config(inv), artifact_root(inv));
  const bool od = p.config().at("mode") == "od";
  if (!from.empty()) {
    p.use_osmosis(existing_path(from, "osmosis artifact", "run `od osmose` to create one"));
  } else if (od) {
    need(p.existing("osmosis"), "osmosis artifact", "run `od osmose` with this config first or pass --from <dir>");
  }
  if (!trajectories.empty()) {
    p.use_trajectories(existing_path(trajectories, "trajectory buffer",
                                     "omit --trajectories to record a new buffer, or point it at an existing one"));
  }
  const auto dir = p.distill_stage();
  const auto dod = distill::load_dod(ex::Pipeline::dod_path(dir));
  const auto& st = p.record().stages.back();
  Summary s(out);
  s.add("stage", "distill");
  s.add("fingerprint", p.fingerprint());
  s.add("cached", st.cached);
  s.add("seconds", st.seconds);
  s.add("dod_dir", ex::Pipeline::dod_path(dir).string());
  s.add("images", dod.size());
  s.add("ipc", dod.ipc);
  s.add("n_patches", dod.n_patches);
  s.add("final_trajectory_loss", dod.extra.value("final_trajectory_loss", 0.0));
}

void require_dod(ex::Pipeline& p, const std::string& dod) {
  if (!dod.empty()) {
    p.use_dod(existing_path(dod, "DOD", "run `od distill` to create one"));
  } else {
    need(p.existing("distill"), "DOD", "run `od distill` with this config first or pass --dod <dir>");
  }
  need(p.existing("osmosis"), "osmosis artifact", "run `od osmose` with this config first");
}

void cmd_hijack(const Invocation& inv, const std::string& dod, std::ostream& out) {
  ex::Pipeline p(build_config(inv), artifact_root(inv));
  require_dod(p, dod);
  const auto dir = p.hijack_stage();
  const auto report = ex::load_report(dir / "report.json");
  const auto& st = p.record().stages.back();
  Summary s(out);
  s.add("stage", "hijack");
  s.add("fingerprint", p.fingerprint());
  s.add("cached", st.cached);
  s.add("seconds", st.seconds);
  s.add("report", (dir / "report.json").string());
  s.add("victim_arch", report.extra.value("victim_arch", std::string()));
  s.add("victim_seeds", report.seeds.size());
  s.add("asr_raw", report.asr_raw);
  s.add("utility", report.utility);
  s.add("asr", report.asr);
}

void cmd_defend(const Invocation& inv, const std::string& dod, std::ostream& out) {
  ex::Pipeline p(build_config(inv), artifact_root(inv));
  require_dod(p, dod);
  Summary s(out);
  s.add("stage", "defend");
  s.add("fingerprint", p.fingerprint());
  if (!p.defense_enabled()) {
    s.add("probes", 0);
    return;
  }
  const auto dir = p.defense_stage();
  const auto summary = read_json(dir / "defense.json");
  s.add("probes", summary.size());
  s.add("defense_dir", dir.string());
  if (summary.contains("strip")) {
    const auto strip = read_json(dir / "strip.json");
    s.add("strip_entropies", (dir / "strip.json").string());
    s.add("strip_queries", strip.at("entropies_attack").size() + strip.at("entropies_benign").size());
    s.add("strip_mean_entropy_attack", mean_of(strip.at("entropies_attack")));
    s.add("strip_mean_entropy_benign", mean_of(strip.at("entropies_benign")));
    s.add("strip_overlap", summary.at("strip").at("overlap_statistic").get<double>());
  }
  if (summary.contains("dpsgd")) {
    const auto& d = summary.at("dpsgd");
    s.add("dpsgd_report", (dir / "dpsgd.json").string());
    s.add("dpsgd_epsilon_spent", d.at("epsilon_spent").get<double>());
    s.add("dpsgd_noise_multiplier", d.at("noise_multiplier").get<double>());
    s.add("dpsgd_utility", d.at("utility").get<double>());
    s.add("dpsgd_asr", d.at("asr").get<double>());
  }
  if (summary.contains("projection")) {
    s.add("projection_csv", (dir / "projection.csv").string());
    s.add("projection_silhouette_by_tag", summary.at("projection").at("silhouette_by_tag").get<double>());
  }
  if (summary.contains("cross_arch")) {
    for (const auto& row : summary.at("cross_arch")) {
      const auto arch = row.at("victim_arch").get<std::string>();
      s.add("cross_arch_" + arch + "_utility", row.at("utility").get<double>());
      s.add("cross_arch_" + arch + "_asr", row.at("asr").get<double>());
    }
  }
}

std::vector<json> parse_values(const std::string& text) {
  std::vector<json> out;
  if (text.empty()) return out;
  const auto whole = json::parse(text, nullptr, false);
  if (!whole.is_discarded() && whole.is_array()) return whole.get<std::vector<json>>();
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    auto v = json::parse(item, nullptr, false);
    out.push_back(v.is_discarded() ? json(item) : v);
  }
  return out;
}

int cmd_sweep(const Invocation& inv, std::string axis, const std::string& values_text, std::ostream& out) {
  const auto config = build_config(inv);
  auto values = parse_values(values_text);
  if (axis.empty()) axis = config.at("sweep").at("axis").get<std::string>();
  if (values.empty()) values = config.at("sweep").at("values").get<std::vector<json>>();
  if (axis.empty()) throw ConfigError("sweep needs an axis (--axis or sweep.axis)");
  if (values.empty()) throw ConfigError("sweep needs values (--values or sweep.values)");
  const auto root = artifact_root(inv);
  const auto records = ex::run_sweep(config, axis, values, root);

  json manifest = {{"axis", axis}, {"values", values}, {"records", json::array()}};
  int status = kOk;
  std::size_t failed = 0;
  for (const auto& r : records) {
    manifest["records"].push_back((root / "runs" / r.fingerprint / "record.json").string());
    if (r.status != "ok") {
      ++failed;
      if (status == kOk) status = r.exit_code == 0 ? kRuntime : r.exit_code;
    }
  }
  const auto path = root / "sweeps" / (ex::fingerprint(config) + "-" + axis + ".json");
  fs::create_directories(path.parent_path());
  write_json(path, manifest);

  Summary s(out);
  s.add("stage", "sweep");
  s.add("axis", axis);
  for (const auto& r : records) {
    const auto tag = "point_" + (r.axis_value.is_string() ? r.axis_value.get<std::string>() : r.axis_value.dump());
    if (r.report) {
      s.add(tag + "_utility", r.report->utility);
      s.add(tag + "_asr", r.report->asr);
    } else {
      s.add(tag + "_status", r.status);
    }
  }
  s.add("records", records.size());
  s.add("failed", failed);
  s.add("sweep_manifest", path.string());
  return status;
}

std::vector<ex::RunRecord> collect_records(const std::vector<std::string>& inputs) {
  std::vector<ex::RunRecord> out;
  for (const auto& in : inputs) {
    const fs::path p = in;
    if (!fs::exists(p)) throw ArtifactError("record input not found: " + in, "records");
    if (fs::is_regular_file(p)) {
      const auto j = read_json(p);
      if (j.contains("records") && j.contains("axis")) {
        for (const auto& r : j.at("records")) out.push_back(ex::load_record(r.get<std::string>()));
        continue;
      }
    }
    out.push_back(ex::load_record(p));
  }
  return out;
}

void cmd_report(const Invocation& inv, const std::vector<std::string>& inputs, std::string report_dir,
                std::ostream& out) {
  if (inputs.empty()) throw ConfigError("report needs run records or a sweep manifest");
  const auto records = collect_records(inputs);
  if (report_dir.empty()) report_dir = (artifact_root(inv) / "report").string();
  const auto bundle = ex::emit_report(records, report_dir);
  Summary s(out);
  s.add("stage", "report");
  s.add("axis", bundle.axis.empty() ? std::string("run") : bundle.axis);
  s.add("rows", bundle.rows.size());
  s.add("report_dir", report_dir);
}

int error_code(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return kUsage;
  if (dynamic_cast<const ArtifactError*>(&e)) return kMissingArtifact;
  if (dynamic_cast<const nlohmann::json::exception*>(&e)) return kUsage;
  return kRuntime;
}

std::string one_line(std::string s) {
  for (auto& c : s) {
    if (c == '\n') c = ' ';
  }
  return s;
}

}  // namespace

int od_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Osmosis distillation hijacking toolkit", "od"};
  app.require_subcommand(1);
  app.fallthrough();
  Invocation inv;
  app.add_option("--config", inv.config_path, "Experiment config (JSON)");
  app.add_option("--override", inv.overrides, "Config override key=value (repeatable)")
      ->allow_extra_args(false)
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  app.add_option("--out", inv.out, "Artifact root (default: $OD_ARTIFACT_ROOT or ./artifacts)");
  app.add_option("--seed", inv.seed, "Global seed");
  app.add_flag("-v,--verbose", inv.verbose, "Log progress to stderr (repeat for debug)");

  auto* osmose = app.add_subcommand("osmose", "Train the Transporter and write the osmosis set");
  auto* distill_cmd = app.add_subcommand("distill", "Distill the osmosis set into a DOD");
  std::string from;
  std::string trajectories;
  distill_cmd->add_option("--from", from, "Osmosis artifact directory to distill");
  distill_cmd->add_option("--trajectories", trajectories, "Existing expert trajectory buffer");
  auto* hijack_cmd = app.add_subcommand("hijack", "Fine-tune victims on the DOD and measure utility and ASR");
  std::string dod;
  hijack_cmd->add_option("--dod", dod, "DOD directory (default: this config's distill stage)");
  auto* defend = app.add_subcommand("defend", "Run the enabled defense probes");
  defend->add_option("--dod", dod, "DOD directory (default: this config's distill stage)");
  auto* sweep = app.add_subcommand("sweep", "Run the full pipeline for each value of one axis");
  std::string axis;
  std::string values;
  sweep->add_option("--axis", axis, "ipc, key_patches, dilution, dataset_pair, extractor or victim_arch");
  sweep->add_option("--values", values, "Comma-separated values or a JSON array");
  auto* report = app.add_subcommand("report", "Emit a report bundle from run records or sweep manifests");
  std::vector<std::string> inputs;
  std::string report_dir;
  report->add_option("inputs", inputs, "record.json files, run directories or sweep manifests");
  report->add_option("--report-dir", report_dir, "Output directory (default: <out>/report)");

  std::vector<std::string> argv_store{"od"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  log::set_level(inv.verbose >= 2 ? log::Level::debug : inv.verbose == 1 ? log::Level::info : log::Level::warn);
  configure_determinism();
  try {
    if (*osmose) cmd_osmose(inv, out);
    if (*distill_cmd) cmd_distill(inv, from, trajectories, out);
    if (*hijack_cmd) cmd_hijack(inv, dod, out);
    if (*defend) cmd_defend(inv, dod, out);
    if (*sweep) return cmd_sweep(inv, axis, values, out);
    if (*report) cmd_report(inv, inputs, report_dir, out);
  } catch (const std::exception& e) {
    const int code = error_code(e);
    err << "error code=" << code;
    if (const auto* a = dynamic_cast<const ArtifactError*>(&e); a && !a->field().empty()) {
      err << " field=" << one_line(a->field());
    }
    err << " message=" << one_line(e.what()) << "\n";
    return code;
  }
  return kOk;
}

}  // namespace osmosis::cli
