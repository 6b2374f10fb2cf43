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
#include <string>
#include <vector>

#include <json.hpp>

#include "osmosis/experiments/pipeline.hpp"

namespace osmosis::experiments {

struct ReportRow {
  nlohmann::json axis_value;
  std::string fingerprint;
  std::string status;
  std::string error;
  double utility = 0.0;
  double asr = 0.0;
  double asr_raw = 0.0;
  std::size_t seeds = 0;
  nlohmann::json defense = nlohmann::json::object();
};

struct ReportBundle {
  std::string axis;
  std::vector<ReportRow> rows;

  nlohmann::ordered_json to_json() const;
};

/// Writes report.json, report.md, tables/results.csv and plots/metrics.png (with a JSON sidecar)
/// under `out_dir`. All records must share one sweep axis.
ReportBundle emit_report(const std::vector<RunRecord>& records, const std::filesystem::path& out_dir);

}  // namespace osmosis::experiments
