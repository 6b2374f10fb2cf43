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

#include <array>
#include <filesystem>
#include <string>
#include <vector>

namespace osmosis::experiments {

struct Series {
  std::string name;
  std::vector<double> values;
  std::array<std::uint8_t, 3> color{0, 0, 0};
};

struct LinePlot {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<std::string> x_ticks;
  std::vector<double> x;
  std::vector<Series> series;
  double y_min = 0.0;
  double y_max = 1.0;
  std::int64_t width = 640;
  std::int64_t height = 400;
};

/// Rasterizes `plot` to a PNG and writes its data and labels to a sidecar `<path>.json`.
void write_line_plot(const std::filesystem::path& path, const LinePlot& plot);

}  // namespace osmosis::experiments
