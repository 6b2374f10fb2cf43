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

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <map>

#include "osmosis/core/error.hpp"
#include "osmosis/core/seed.hpp"
#include "osmosis/defense/dpsgd.hpp"
#include "osmosis/defense/privacy.hpp"
#include "osmosis/defense/strip.hpp"
#include "osmosis/defense/tsne.hpp"
#include "osmosis/hijack/victim.hpp"
#include "support.hpp"

namespace osmosis::defense {
namespace {

using testing::LambdaClassifier;

TEST(Entropy, UniformAndOneHotBounds) {
  for (const std::int64_t k : {2, 5, 10}) {
    const auto uniform = torch::full({3, k}, 1.0 / static_cast<double>(k));
    const auto h = shannon_entropy(uniform);
    for (std::int64_t i = 0; i < 3; ++i) EXPECT_NEAR(h[i].item<double>(), std::log(static_cast<double>(k)), 1e-7);
    const auto onehot = torch::one_hot(torch::arange(3) % k, k).to(torch::kFloat32);
    EXPECT_EQ(shannon_entropy(onehot).abs().max().item<double>(), 0.0);
  }
  auto gen = make_generator(0);
  const auto p = torch::softmax(torch::randn({200, 7}, gen) * 3.0, 1);
  const auto h = shannon_entropy(p);
  EXPECT_GE(h.min().item<double>(), 0.0);
  EXPECT_LE(h.max().item<double>(), std::log(7.0));
  const auto manual = -(p.to(torch::kFloat64) * p.to(torch::kFloat64).log()).sum(1);
  EXPECT_TRUE(torch::allclose(h, manual, 1e-12, 1e-9));
}

TEST(Strip, SinglePerturbationMatchesHandBlend) {
  auto gen = make_generator(4);
  const auto w = torch::randn({48, 3}, gen);
  auto victim = std::make_shared<LambdaClassifier>([w](const torch::Tensor& x) { return x.flatten(1).matmul(w); }, 3);
  const auto query = torch::rand({3, 4, 4}, gen);
  const auto overlay = torch::rand({1, 3, 4, 4}, gen);
  const double alpha = 0.3;
  const auto blend = query * (1.0 - alpha) + overlay[0] * alpha;
  const auto p = torch::softmax(blend.flatten().matmul(w).to(torch::kFloat64), 0);
  const double expected = -(p * p.log()).sum().item<double>();
  EXPECT_NEAR(strip_probe(*victim, query, overlay, 1, alpha, 17), expected, 1e-6);
}

TEST(Strip, RejectsBadArguments) {
  auto victim = testing::uniform_classifier(3);
  const auto q = torch::zeros({1, 2, 2});
  EXPECT_THROW(strip_probe(*victim, q, torch::zeros({1, 1, 2, 2}), 0, 0.5, 0), ConfigError);
  EXPECT_THROW(strip_probe(*victim, q, torch::zeros({1, 1, 2, 2}), 1, 1.0, 0), ConfigError);
  EXPECT_THROW(strip_probe(*victim, q, torch::zeros({1, 1, 3, 3}), 1, 0.5, 0), ConfigError);
}

TEST(Strip, ConstantVictimGivesFullOverlap) {
  auto victim = testing::uniform_classifier(4);
  auto gen = make_generator(2);
  StripConfig cfg{5, 0.5, 10};
  const auto r = strip_report(*victim, torch::rand({6, 1, 4, 4}, gen), torch::rand({6, 1, 4, 4}, gen),
                              torch::rand({3, 1, 4, 4}, gen), cfg, 1);
  ASSERT_EQ(r.entropies_attack.size(), 6u);
  for (const double h : r.entropies_attack) EXPECT_NEAR(h, std::log(4.0), 1e-9);
  EXPECT_NEAR(r.overlap_statistic, 1.0, 1e-12);
}

TEST(Overlap, Mocks) {
  EXPECT_NEAR(histogram_overlap({1, 2, 3}, {1, 2, 3}, 10), 1.0, 1e-12);
  EXPECT_NEAR(histogram_overlap({0, 0.1}, {0.9, 1.0}, 10), 0.0, 1e-12);
  // Two bins over [0, 1]: a = {0.5 low, 0.5 high}, b = {0.25 low, 0.75 high}.
  const std::vector<double> a{0.0, 0.2, 0.8, 1.0};
  const std::vector<double> b{0.0, 0.9, 0.8, 1.0};
  EXPECT_NEAR(histogram_overlap(a, b, 2), 0.75, 1e-12);
  EXPECT_NEAR(histogram_overlap(b, a, 2), histogram_overlap(a, b, 2), 1e-15);
  EXPECT_THROW(histogram_overlap({}, {1.0}, 2), ConfigError);
}

// Numerical integral of E_{z~N(0, s^2)}[(1 - q + q exp((2z - 1) / (2 s^2)))^a].
double rdp_by_quadrature(double q, double sigma, int alpha) {
  const long double s = sigma;
  const long double lo = -20.0L * s - 10.0L;
  const long double hi = 20.0L * s + 10.0L;
  const int n = 200000;
  const long double h = (hi - lo) / n;
  long double total = 0.0L;
  for (int i = 0; i <= n; ++i) {
    const long double z = lo + h * i;
    const long double density = std::exp(-z * z / (2 * s * s)) / std::sqrt(2 * M_PIl * s * s);
    const long double ratio = 1 - q + q * std::exp((2 * z - 1) / (2 * s * s));
    const long double w = (i == 0 || i == n) ? 1 : (i % 2 ? 4 : 2);
    total += w * density * std::pow(ratio, static_cast<long double>(alpha));
  }
  return static_cast<double>(std::log(total * h / 3) / (alpha - 1));
}

TEST(Rdp, FullBatchIsGaussianMechanism) {
  for (const double sigma : {0.5, 1.0, 3.0}) {
    for (const int a : {2, 5, 32}) {
      EXPECT_DOUBLE_EQ(rdp_sampled_gaussian(1.0, sigma, a), a / (2.0 * sigma * sigma));
    }
  }
  EXPECT_EQ(rdp_sampled_gaussian(0.0, 1.0, 4), 0.0);
}

TEST(Rdp, MatchesQuadrature) {
  for (const double q : {0.01, 0.1, 0.5}) {
    for (const double sigma : {0.8, 1.5, 4.0}) {
      for (const int a : {2, 3, 8, 16}) {
        const double expected = rdp_by_quadrature(q, sigma, a);
        EXPECT_NEAR(rdp_sampled_gaussian(q, sigma, a), expected, 1e-6 * std::max(1.0, std::abs(expected)))
            << "q=" << q << " sigma=" << sigma << " alpha=" << a;
      }
    }
  }
}

TEST(Rdp, EpsilonMonotonicity) {
  RdpAccountant acc(0.05, 1.1);
  double prev = 0.0;
  for (const std::int64_t steps : {1, 10, 100, 1000}) {
    const double e = acc.epsilon_after(steps, 1e-5);
    EXPECT_GT(e, prev);
    prev = e;
  }
  EXPECT_LT(RdpAccountant(0.05, 2.0).epsilon_after(100, 1e-5), RdpAccountant(0.05, 1.0).epsilon_after(100, 1e-5));
  acc.step(100);
  EXPECT_DOUBLE_EQ(acc.epsilon(1e-5), acc.epsilon_after(100, 1e-5));
}

TEST(Rdp, CalibrationMeetsTargetTightly) {
  for (const double eps : {1.0, 4.0, 8.0}) {
    const double sigma = calibrate_noise_multiplier(eps, 1e-5, 0.1, 200);
    EXPECT_LE(RdpAccountant(0.1, sigma).epsilon_after(200, 1e-5), eps * (1.0 + 1e-9));
    EXPECT_GT(RdpAccountant(0.1, sigma * 0.99).epsilon_after(200, 1e-5), eps);
  }
}

TEST(Privacy, ValidateRejectsBadConfigs) {
  PrivacyConfig p;
  EXPECT_NO_THROW(p.validate());
  p.epsilon = 0.0;
  EXPECT_THROW(p.validate(), ConfigError);
  p = {};
  p.delta = 1.0;
  EXPECT_THROW(p.validate(), ConfigError);
  p = {};
  p.noise_multiplier = 0.0;
  EXPECT_THROW(p.validate(), ConfigError);
  p.epsilon = std::numeric_limits<double>::infinity();
  EXPECT_NO_THROW(p.validate());
}

datasets::TrainingSet small_set(std::int64_t n, std::uint64_t seed) {
  auto gen = make_generator(seed);
  datasets::TrainingSet t;
  const auto labels = torch::arange(n, torch::kInt64).remainder(2);
  t.images = torch::rand({n, 3, 8, 8}, gen) + labels.view({n, 1, 1, 1}).to(torch::kFloat32);
  t.targets = torch::one_hot(labels, 2).to(torch::kFloat32);
  t.is_real.assign(static_cast<std::size_t>(n), false);
  return t;
}

hijack::VictimSpec small_victim() {
  hijack::VictimSpec v;
  v.arch = {models::Arch::toy_cnn, 2, 4, 8};
  return v;
}

TEST(Dpsgd, ClippedNormsNeverExceedBound) {
  auto victim = hijack::make_victim(small_victim(), 1);
  PrivacyConfig p;
  p.epsilon = 50.0;
  p.clip_norm = 0.05;
  std::int64_t calls = 0;
  double worst = 0.0;
  const auto r = dpsgd_finetune(*victim, small_set(24, 2), p, {1, 8, 0.01}, 3, [&](double norm) {
    ++calls;
    worst = std::max(worst, norm);
  });
  EXPECT_EQ(calls, 24);
  EXPECT_LE(worst, p.clip_norm);
  EXPECT_DOUBLE_EQ(r.max_clipped_norm, worst);
  EXPECT_EQ(r.steps, 3);
  EXPECT_DOUBLE_EQ(r.sampling_rate, 8.0 / 24.0);
  EXPECT_GT(r.noise_multiplier, 0.0);
  EXPECT_LE(r.epsilon_spent, p.epsilon * (1.0 + 1e-9));
}

TEST(Dpsgd, NoiselessUnclippedLimitMatchesAdam) {
  const auto data = small_set(16, 5);
  const hijack::FinetuneConfig cfg{1, 16, 0.01};
  auto plain = hijack::make_victim(small_victim(), 4);
  auto dp = hijack::make_victim(small_victim(), 4);
  hijack::finetune_victim(*plain, data, cfg, 6);
  PrivacyConfig p;
  p.epsilon = std::numeric_limits<double>::infinity();
  p.noise_multiplier = 0.0;
  p.clip_norm = 1e12;
  const auto r = dpsgd_finetune(*dp, data, p, cfg, 6);
  EXPECT_EQ(r.steps, 1);
  EXPECT_FALSE(r.aborted);
  const auto la = models::predict_logits(*plain, data.images);
  const auto lb = models::predict_logits(*dp, data.images);
  EXPECT_LT((la - lb).abs().max().item<double>(), 1e-6);
  // Conv biases are cancelled by the following norm, so Adam turns their rounding-level gradients into full steps.
  const auto a = plain->named_parameters();
  const auto b = dp->named_parameters();
  for (const auto& item : a) {
    if (item.key().ends_with("conv_bias")) continue;
    EXPECT_LT((item.value() - b[item.key()]).abs().max().item<double>(), 1e-6) << item.key();
  }
}

TEST(Dpsgd, StopsWhenBudgetIsExhausted) {
  auto victim = hijack::make_victim(small_victim(), 1);
  PrivacyConfig p;
  p.epsilon = 2.0;
  p.noise_multiplier = 0.5;
  const auto r = dpsgd_finetune(*victim, small_set(16, 2), p, {50, 8, 0.01}, 3);
  EXPECT_TRUE(r.aborted);
  EXPECT_LT(r.steps, r.planned_steps);
  EXPECT_LE(r.epsilon_spent, p.epsilon * (1.0 + 1e-9));
}

double brute_silhouette(const torch::Tensor& pts, const torch::Tensor& labels) {
  const auto n = pts.size(0);
  const auto x = pts.to(torch::kFloat64);
  double total = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    std::map<std::int64_t, std::pair<double, std::int64_t>> per;
    for (std::int64_t j = 0; j < n; ++j) {
      if (i == j) continue;
      auto& [sum, count] = per[labels[j].item<std::int64_t>()];
      sum += (x[i] - x[j]).norm().item<double>();
      ++count;
    }
    const auto own = labels[i].item<std::int64_t>();
    if (per[own].second == 0) continue;
    const double a = per[own].first / static_cast<double>(per[own].second);
    double b = std::numeric_limits<double>::infinity();
    for (const auto& [c, sc] : per) {
      if (c != own && sc.second > 0) b = std::min(b, sc.first / static_cast<double>(sc.second));
    }
    total += (b - a) / std::max(a, b);
  }
  return total / static_cast<double>(n);
}

TEST(Silhouette, MatchesBruteForce) {
  auto gen = make_generator(8);
  const auto pts = torch::randn({30, 3}, gen);
  const auto labels = torch::arange(30, torch::kInt64).remainder(3);
  EXPECT_NEAR(silhouette_score(pts, labels), brute_silhouette(pts, labels), 1e-9);
  const auto shifted = pts + labels.view({30, 1}).to(torch::kFloat32) * 4.0;
  EXPECT_NEAR(silhouette_score(shifted, labels), brute_silhouette(shifted, labels), 1e-9);
}

TEST(Tsne, SeparatesClusters) {
  auto gen = make_generator(3);
  const auto labels = torch::arange(60, torch::kInt64).remainder(2);
  const auto feats = torch::randn({60, 10}, gen) + labels.view({60, 1}).to(torch::kFloat32) * 8.0;
  TsneConfig cfg;
  cfg.perplexity = 10.0;
  cfg.iterations = 1000;
  const auto y = tsne(feats, cfg, 1);
  EXPECT_EQ(y.sizes(), (std::vector<std::int64_t>{60, 2}));
  EXPECT_TRUE(torch::isfinite(y).all().item<bool>());
  EXPECT_GT(silhouette_score(y, labels), 0.7);
  EXPECT_TRUE(torch::equal(y, tsne(feats, cfg, 1)));
}

TEST(Tsne, RequiresMorePointsThanPerplexity) {
  TsneConfig cfg;
  cfg.perplexity = 30.0;
  EXPECT_THROW(tsne(torch::randn({20, 4}), cfg, 0), ConfigError);
}

}  // namespace
}  // namespace osmosis::defense
