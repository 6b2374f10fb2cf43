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

#include "osmosis/experiments/report.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include "osmosis/core/error.hpp"
#include "osmosis/core/tensor_io.hpp"
#include "osmosis/experiments/plot.hpp"

namespace osmosis::experiments {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string label(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_null()) return "-";
  return v.dump();
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string fixed(double v, int digits = 4) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

}  // namespace

ordered_json ReportBundle::to_json() const {
  ordered_json j;
  j["axis"] = axis;
  j["rows"] = ordered_json::array();
  for (const auto& r : rows) {
    ordered_json row;
    row["axis_value"] = ordered_json::parse(r.axis_value.dump());
    row["fingerprint"] = r.fingerprint;
    row["status"] = r.status;
    if (r.status == "ok") {
      row["utility"] = r.utility;
      row["asr"] = r.asr;
      row["asr_raw"] = r.asr_raw;
      row["seeds"] = r.seeds;
    } else {
      row["error"] = r.error;
    }
    if (!r.defense.empty()) row["defense"] = ordered_json::parse(r.defense.dump());
    j["rows"].push_back(row);
  }
  return j;
}

ReportBundle emit_report(const std::vector<RunRecord>& records, const fs::path& out_dir) {
  if (records.empty()) throw ConfigError("report needs at least one run record");
  ReportBundle bundle;
  bundle.axis = records.front().axis;
  for (const auto& rec : records) {
    if (rec.axis != bundle.axis) {
      throw ConfigError("records mix sweep axes '" + bundle.axis + "' and '" + rec.axis + "'");
    }
    ReportRow row;
    row.axis_value = rec.axis.empty() ? json(rec.fingerprint.substr(0, 12)) : rec.axis_value;
    row.fingerprint = rec.fingerprint;
    row.status = rec.status == "ok" && rec.report ? "ok" : "failed";
    row.error = rec.error;
    if (rec.report) {
      row.utility = rec.report->utility;
      row.asr = rec.report->asr;
      row.asr_raw = rec.report->asr_raw;
      row.seeds = rec.report->seeds.size();
    }
    row.defense = rec.defense;
    bundle.rows.push_back(std::move(row));
  }

  fs::create_directories(out_dir / "tables");
  fs::create_directories(out_dir / "plots");
  {
    std::ofstream out(out_dir / "report.json");
    out << bundle.to_json().dump(2) << "\n";
  }

  const auto axis_name = bundle.axis.empty() ? std::string("run") : bundle.axis;
  {
    std::ofstream csv(out_dir / "tables" / "results.csv");
    csv << csv_field(axis_name) << ",fingerprint,status,utility,asr,asr_raw,seeds\n";
    csv << std::setprecision(17);
    for (const auto& r : bundle.rows) {
      csv << csv_field(label(r.axis_value)) << "," << r.fingerprint << "," << r.status << ",";
      if (r.status == "ok") {
        csv << r.utility << "," << r.asr << "," << r.asr_raw << "," << r.seeds << "\n";
      } else {
        csv << ",,,\n";
      }
    }
  }

  std::ofstream md(out_dir / "report.md");
  md << "# Hijacking results\n\n";
  md << "Sweep axis: `" << axis_name << "`, " << bundle.rows.size() << " run(s).\n\n";
  md << "| " << axis_name << " | utility | ASR | ASR (raw queries) | status |\n";
  md << "|---|---|---|---|---|\n";
  for (const auto& r : bundle.rows) {
    md << "| " << label(r.axis_value) << " | ";
    if (r.status == "ok") {
      md << fixed(r.utility) << " | " << fixed(r.asr) << " | " << fixed(r.asr_raw) << " | ok |\n";
    } else {
      md << "- | - | - | failed: " << r.error << " |\n";
    }
  }

  bool any_defense = false;
  for (const auto& r : bundle.rows) any_defense = any_defense || !r.defense.empty();
  if (any_defense) {
    md << "\n## Defenses\n\n";
    for (const auto& r : bundle.rows) {
      if (r.defense.empty()) continue;
      md << "### " << label(r.axis_value) << "\n\n```json\n" << r.defense.dump(2) << "\n```\n\n";
    }
  }

  LinePlot plot;
  plot.title = "utility and ASR vs " + axis_name;
  plot.x_label = axis_name;
  plot.y_label = "accuracy";
  bool numeric = true;
  for (const auto& r : bundle.rows) numeric = numeric && r.axis_value.is_number();
  Series utility{"utility", {}, {31, 119, 180}};
  Series asr{"asr", {}, {214, 39, 40}};
  for (std::size_t i = 0; i < bundle.rows.size(); ++i) {
    const auto& r = bundle.rows[i];
    if (r.status != "ok") continue;
    plot.x.push_back(numeric ? r.axis_value.get<double>() : static_cast<double>(i));
    plot.x_ticks.push_back(label(r.axis_value));
    utility.values.push_back(r.utility);
    asr.values.push_back(r.asr);
  }
  plot.series = {utility, asr};
  if (!plot.x.empty()) {
    write_line_plot(out_dir / "plots" / "metrics.png", plot);
    md << "\n![utility and ASR](plots/metrics.png)\n";
  }
  return bundle;
}

}  // namespace osmosis::experiments
