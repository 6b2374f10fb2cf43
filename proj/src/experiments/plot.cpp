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

#include "osmosis/experiments/plot.hpp"

#include <torch/torch.h>

#include <algorithm>
#include <cmath>

#include "osmosis/core/error.hpp"
#include "osmosis/core/image.hpp"
#include "osmosis/core/tensor_io.hpp"

namespace osmosis::experiments {

namespace {

constexpr std::int64_t kLeft = 56;
constexpr std::int64_t kRight = 24;
constexpr std::int64_t kTop = 24;
constexpr std::int64_t kBottom = 40;

class Canvas {
 public:
  Canvas(std::int64_t w, std::int64_t h) : w_(w), h_(h), px_(static_cast<std::size_t>(w * h * 3), 255) {}

  void set(std::int64_t x, std::int64_t y, std::array<std::uint8_t, 3> c) {
    if (x < 0 || y < 0 || x >= w_ || y >= h_) return;
    const auto i = static_cast<std::size_t>((y * w_ + x) * 3);
    px_[i] = c[0];
    px_[i + 1] = c[1];
    px_[i + 2] = c[2];
  }

  void rect(std::int64_t x0, std::int64_t y0, std::int64_t x1, std::int64_t y1, std::array<std::uint8_t, 3> c) {
    for (auto y = std::min(y0, y1); y <= std::max(y0, y1); ++y) {
      for (auto x = std::min(x0, x1); x <= std::max(x0, x1); ++x) set(x, y, c);
    }
  }

  void line(double x0, double y0, double x1, double y1, std::array<std::uint8_t, 3> c, std::int64_t thick) {
    const auto steps = static_cast<std::int64_t>(std::ceil(std::max(std::abs(x1 - x0), std::abs(y1 - y0)))) + 1;
    for (std::int64_t s = 0; s <= steps; ++s) {
      const double t = static_cast<double>(s) / static_cast<double>(steps);
      const auto x = static_cast<std::int64_t>(std::lround(x0 + t * (x1 - x0)));
      const auto y = static_cast<std::int64_t>(std::lround(y0 + t * (y1 - y0)));
      rect(x - thick / 2, y - thick / 2, x + (thick - 1) / 2, y + (thick - 1) / 2, c);
    }
  }

  torch::Tensor tensor() const {
    auto t = torch::from_blob(const_cast<std::uint8_t*>(px_.data()), {h_, w_, 3}, torch::kUInt8).clone();
    return t.permute({2, 0, 1}).to(torch::kFloat32).div(255.0);
  }

 private:
  std::int64_t w_;
  std::int64_t h_;
  std::vector<std::uint8_t> px_;
};

}  // namespace

void write_line_plot(const fs::path& path, const LinePlot& plot) {
  require(!plot.x.empty(), "plot needs at least one x value");
  require(plot.y_max > plot.y_min, "plot y range is empty");
  for (const auto& s : plot.series) require(s.values.size() == plot.x.size(), "series '" + s.name + "' length mismatch");

  Canvas canvas(plot.width, plot.height);
  const auto x0 = kLeft;
  const auto x1 = plot.width - kRight;
  const auto y0 = plot.height - kBottom;
  const auto y1 = kTop;
  const auto [xmin_it, xmax_it] = std::minmax_element(plot.x.begin(), plot.x.end());
  const double xmin = *xmin_it;
  const double xspan = *xmax_it > xmin ? *xmax_it - xmin : 1.0;
  auto px = [&](double v) {
    const double t = plot.x.size() == 1 ? 0.5 : (v - xmin) / xspan;
    return static_cast<double>(x0) + t * static_cast<double>(x1 - x0);
  };
  auto py = [&](double v) {
    const double t = (std::clamp(v, plot.y_min, plot.y_max) - plot.y_min) / (plot.y_max - plot.y_min);
    return static_cast<double>(y0) - t * static_cast<double>(y0 - y1);
  };

  const std::array<std::uint8_t, 3> grid{225, 225, 225};
  const std::array<std::uint8_t, 3> axis{40, 40, 40};
  for (int i = 0; i <= 4; ++i) {
    const auto y = py(plot.y_min + (plot.y_max - plot.y_min) * i / 4.0);
    canvas.line(static_cast<double>(x0), y, static_cast<double>(x1), y, grid, 1);
  }
  for (const auto v : plot.x) canvas.line(px(v), static_cast<double>(y0), px(v), static_cast<double>(y0 + 6), axis, 1);
  canvas.line(static_cast<double>(x0), static_cast<double>(y0), static_cast<double>(x1), static_cast<double>(y0), axis, 2);
  canvas.line(static_cast<double>(x0), static_cast<double>(y0), static_cast<double>(x0), static_cast<double>(y1), axis, 2);

  for (std::size_t s = 0; s < plot.series.size(); ++s) {
    const auto& series = plot.series[s];
    for (std::size_t i = 0; i < plot.x.size(); ++i) {
      const auto cx = px(plot.x[i]);
      const auto cy = py(series.values[i]);
      if (i + 1 < plot.x.size()) canvas.line(cx, cy, px(plot.x[i + 1]), py(series.values[i + 1]), series.color, 2);
      canvas.rect(std::lround(cx) - 3, std::lround(cy) - 3, std::lround(cx) + 3, std::lround(cy) + 3, series.color);
    }
    const auto ly = kTop + 4 + static_cast<std::int64_t>(s) * 14;
    canvas.rect(x1 - 30, ly, x1 - 10, ly + 6, series.color);
  }

  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_png(path, canvas.tensor());

  Json sidecar = {{"title", plot.title},
                  {"x_label", plot.x_label},
                  {"y_label", plot.y_label},
                  {"x", plot.x},
                  {"x_ticks", plot.x_ticks},
                  {"y_range", {plot.y_min, plot.y_max}},
                  {"series", Json::array()}};
  for (const auto& s : plot.series) {
    sidecar["series"].push_back({{"name", s.name}, {"values", s.values}, {"color", s.color}});
  }
  write_json(fs::path(path.string() + ".json"), sidecar);
}

}  // namespace osmosis::experiments
