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

#include "osmosis/defense/tsne.hpp"

#include <cmath>

#include "osmosis/core/error.hpp"
#include "osmosis/core/seed.hpp"

namespace osmosis::defense {

namespace {

torch::Tensor squared_distances(const torch::Tensor& x) {
  const auto sq = x.pow(2).sum(1, true);
  return (sq + sq.t() - 2.0 * x.matmul(x.t())).clamp_min(0.0);
}

/// Row-conditional affinities whose entropy matches log(perplexity).
torch::Tensor conditional_affinities(const torch::Tensor& d, double perplexity) {
  const auto n = d.size(0);
  auto p = torch::zeros_like(d);
  const double target = std::log(perplexity);
  const auto da = d.accessor<double, 2>();
  auto pa = p.accessor<double, 2>();
  std::vector<double> row(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    double beta = 1.0;
    double lo = -INFINITY;
    double hi = INFINITY;
    double min_d = INFINITY;
    for (std::int64_t j = 0; j < n; ++j) {
      if (j != i) min_d = std::min(min_d, da[i][j]);
    }
    for (int iter = 0; iter < 200; ++iter) {
      double sum = 0.0;
      double weighted = 0.0;
      for (std::int64_t j = 0; j < n; ++j) {
        const double v = j == i ? 0.0 : std::exp(-beta * (da[i][j] - min_d));
        row[static_cast<std::size_t>(j)] = v;
        sum += v;
        weighted += v * (da[i][j] - min_d);
      }
      const double entropy = std::log(sum) + beta * weighted / sum;
      for (std::int64_t j = 0; j < n; ++j) pa[i][j] = row[static_cast<std::size_t>(j)] / sum;
      const double diff = entropy - target;
      if (std::abs(diff) < 1e-5) break;
      if (diff > 0) {
        lo = beta;
        beta = std::isinf(hi) ? beta * 2.0 : 0.5 * (beta + hi);
      } else {
        hi = beta;
        beta = std::isinf(lo) ? beta / 2.0 : 0.5 * (beta + lo);
      }
    }
  }
  return p;
}

}  // namespace

nlohmann::json TsneConfig::to_json() const {
  return {{"method", "tsne"},
          {"perplexity", perplexity},
          {"iterations", iterations},
          {"learning_rate", learning_rate},
          {"early_exaggeration", early_exaggeration},
          {"exaggeration_iterations", exaggeration_iterations}};
}

torch::Tensor tsne(const torch::Tensor& features, const TsneConfig& cfg, std::uint64_t seed) {
  require(features.dim() == 2, "t-SNE expects an (N, D) matrix");
  const auto n = features.size(0);
  if (static_cast<double>(n) <= cfg.perplexity) {
    throw ConfigError("t-SNE needs more samples (" + std::to_string(n) + ") than the perplexity (" +
                      std::to_string(cfg.perplexity) + ")");
  }
  const auto x = features.to(torch::kFloat64).contiguous();
  auto p = conditional_affinities(squared_distances(x), cfg.perplexity);
  p = (p + p.t()) / (2.0 * static_cast<double>(n));
  p = p.clamp_min(1e-12);

  auto gen = make_generator(derive_seed(seed, "tsne.init"));
  auto y = torch::randn({n, 2}, gen, torch::TensorOptions().dtype(torch::kFloat64)) * 1e-4;
  auto update = torch::zeros_like(y);
  auto gains = torch::ones_like(y);
  const auto eye = torch::eye(n, torch::kFloat64);
  for (std::int64_t it = 0; it < cfg.iterations; ++it) {
    const bool early = it < cfg.exaggeration_iterations;
    const auto pe = early ? p * cfg.early_exaggeration : p;
    const auto num = (1.0 / (1.0 + squared_distances(y))) * (1.0 - eye);
    const auto q = (num / num.sum()).clamp_min(1e-12);
    const auto w = (pe - q) * num;
    const auto grad = 4.0 * (w.sum(1, true) * y - w.matmul(y));
    const double momentum = early ? 0.5 : 0.8;
    const auto same_sign = (grad > 0) == (update > 0);
    gains = torch::where(same_sign, gains * 0.8, gains + 0.2).clamp_min(0.01);
    update = momentum * update - cfg.learning_rate * gains * grad;
    y = y + update;
    y = y - y.mean(0, true);
  }
  return y;
}

double silhouette_score(const torch::Tensor& points, const torch::Tensor& labels) {
  const auto n = points.size(0);
  require(n >= 2 && labels.size(0) == n, "silhouette needs matching points and labels");
  const auto d = squared_distances(points.to(torch::kFloat64)).sqrt();
  const auto l = labels.to(torch::kInt64);
  const auto classes = std::get<0>(torch::_unique(l));
  require(classes.size(0) >= 2, "silhouette needs at least two clusters");
  double total = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    const auto li = l[i].item<std::int64_t>();
    double a = 0.0;
    double b = INFINITY;
    bool singleton = false;
    for (std::int64_t k = 0; k < classes.size(0); ++k) {
      const auto c = classes[k].item<std::int64_t>();
      auto mask = l == c;
      const auto count = mask.sum().item<std::int64_t>();
      const auto sum = d[i].masked_select(mask).sum().item<double>();
      if (c == li) {
        singleton = count == 1;
        if (!singleton) a = sum / static_cast<double>(count - 1);
      } else {
        b = std::min(b, sum / static_cast<double>(count));
      }
    }
    if (singleton) continue;
    total += (b - a) / std::max(a, b);
  }
  return total / static_cast<double>(n);
}

}  // namespace osmosis::defense
