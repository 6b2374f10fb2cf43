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

#include "osmosis/core/error.hpp"
#include "osmosis/core/seed.hpp"
#include "osmosis/datasets/label_mapping.hpp"
#include "osmosis/models/classifier.hpp"
#include "osmosis/transporter/losses.hpp"
#include "osmosis/transporter/training.hpp"
#include "osmosis/transporter/transporter.hpp"
#include "support.hpp"

namespace osmosis::transport {
namespace {

FeatureExtractor frozen_extractor(std::uint64_t seed = 1) {
  auto model = models::make_classifier({models::Arch::toy_cnn, 4, 8, 16}, seed);
  models::freeze(*model);
  model->eval();
  return FeatureExtractor(model);
}

double scalar_mean_abs(const torch::Tensor& a, const torch::Tensor& b) {
  const auto x = a.contiguous().to(torch::kFloat64);
  const auto y = b.contiguous().to(torch::kFloat64);
  const auto* px = x.data_ptr<double>();
  const auto* py = y.data_ptr<double>();
  double acc = 0.0;
  for (std::int64_t i = 0; i < x.numel(); ++i) acc += std::abs(px[i] - py[i]);
  return acc / static_cast<double>(x.numel());
}

TEST(Transporter, OutputShapeAndRange) {
  auto t = build_transporter(32, {3, 8, 32, 3}, 0);
  const auto x = torch::rand({2, 3, 32, 32});
  const auto y = t->forward(x, torch::rand({2, 3, 32, 32}));
  EXPECT_EQ(y.sizes(), x.sizes());
  EXPECT_GE(y.min().item<double>(), 0.0);
  EXPECT_LE(y.max().item<double>(), 1.0);
}

TEST(Transporter, IllegalDepthNamesMaximum) {
  EXPECT_EQ(max_legal_depth(24), 3);
  try {
    build_transporter(24, {4, 8, 24, 3}, 0);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find('3'), std::string::npos) << e.what();
  }
}

TEST(Transporter, SaveLoadReproducesOutputs) {
  testing::TempDir tmp;
  auto t = build_transporter(16, {2, 4, 16, 3}, 3);
  save_transporter(tmp / "t", t);
  auto [u, config] = load_transporter(tmp / "t");
  const auto a = torch::rand({2, 3, 16, 16});
  const auto b = torch::rand({2, 3, 16, 16});
  EXPECT_TRUE(testing::bit_equal(transport(t, a, b), transport(u, a, b)));
  EXPECT_EQ(config["kind"], "transporter");
}

TEST(Losses, VisualLossVanishesOnIdentity) {
  const auto x = torch::rand({4, 3, 16, 16});
  EXPECT_EQ(visual_loss(x, x).item<double>(), 0.0);
}

TEST(Losses, SemanticLossVanishesOnIdentity) {
  const auto fe = frozen_extractor();
  const auto x = torch::rand({4, 3, 16, 16});
  EXPECT_EQ(semantic_loss(fe, x, x).item<double>(), 0.0);
}

TEST(Losses, MatchScalarReimplementation) {
  const auto fe = frozen_extractor();
  auto gen = make_generator(4);
  const auto xc = torch::rand({3, 3, 16, 16}, gen);
  const auto xo = torch::rand({3, 3, 16, 16}, gen);
  const auto xh = torch::rand({3, 3, 16, 16}, gen);
  EXPECT_NEAR(visual_loss(xc, xo).item<double>(), scalar_mean_abs(xc, xo), 1e-5);
  torch::NoGradGuard ng;
  const auto fc = fe.backbone().features(xc);
  const auto fh = fe.backbone().features(xh);
  EXPECT_NEAR(semantic_loss(fe, xc, xh).item<double>(), scalar_mean_abs(fc, fh), 1e-5);
}

TEST(Losses, WeightReductionIdentities) {
  const auto fe = frozen_extractor();
  auto gen = make_generator(5);
  const auto xc = torch::rand({2, 3, 16, 16}, gen);
  const auto xo = torch::rand({2, 3, 16, 16}, gen);
  const auto xh = torch::rand({2, 3, 16, 16}, gen);
  const auto v = visual_loss(xc, xo).item<double>();
  const auto s = semantic_loss(fe, xc, xh).item<double>();
  EXPECT_NEAR(total_loss({1.0, 0.0}, xc, xo, xh, fe).item<double>(), v, 1e-6);
  EXPECT_NEAR(total_loss({0.0, 1.0}, xc, xo, xh, fe).item<double>(), s, 1e-6);
  EXPECT_NEAR(total_loss({2.5, 0.5}, xc, xo, xh, fe).item<double>(), 2.5 * v + 0.5 * s, 1e-6);
  EXPECT_NEAR(total_loss({1.0, 1.0}, xo, xo, xo, fe).item<double>(), 0.0, 1e-6);
}

TEST(Losses, NegativeWeightsRejected) {
  EXPECT_THROW((LossWeights{-1.0, 1.0}.validate()), ConfigError);
  EXPECT_THROW((LossWeights{0.0, 0.0}.validate()), ConfigError);
}

TEST(Losses, TrainableExtractorRejected) {
  auto model = models::make_classifier({models::Arch::toy_cnn, 4, 8, 16}, 0);
  FeatureExtractor fe(model);
  EXPECT_THROW(fe(torch::rand({1, 3, 16, 16})), ConfigError);
}

TEST(Losses, TotalLossGradientMatchesFiniteDifferences) {
  const auto fe = frozen_extractor(2);
  auto gen = make_generator(6);
  const auto xo = torch::rand({1, 3, 16, 16}, gen).to(torch::kFloat64);
  const auto xh = torch::rand({1, 3, 16, 16}, gen).to(torch::kFloat64);
  auto xc = torch::rand({1, 3, 16, 16}, gen).to(torch::kFloat64).requires_grad_(true);
  fe.backbone().to(torch::kFloat64);
  const LossWeights w{3.0, 1.0};
  auto loss = total_loss(w, xc, xo, xh, fe);
  const auto grad = torch::autograd::grad({loss}, {xc})[0];

  torch::NoGradGuard ng;
  const double h = 1e-6;
  auto probe = torch::randn({1, 3, 16, 16}, gen).to(torch::kFloat64);
  probe /= probe.norm();
  const auto plus = total_loss(w, xc + h * probe, xo, xh, fe).item<double>();
  const auto minus = total_loss(w, xc - h * probe, xo, xh, fe).item<double>();
  const double numeric = (plus - minus) / (2 * h);
  const double analytic = (grad * probe).sum().item<double>();
  EXPECT_NEAR(analytic, numeric, 1e-3 * std::max(1.0, std::abs(numeric)));
}

TEST(Training, ShortRunProducesLabelledOsmosisSet) {
  datasets::LabeledImages orig;
  datasets::LabeledImages hij;
  auto gen = make_generator(7);
  orig.images = torch::rand({16, 3, 16, 16}, gen);
  orig.labels = torch::arange(16, torch::kInt64) % 2;
  hij.images = torch::rand({16, 3, 16, 16}, gen);
  hij.labels = torch::arange(16, torch::kInt64) % 2;
  for (std::int64_t i = 0; i < 16; ++i) {
    orig.ids.push_back(i);
    hij.ids.push_back(100 + i);
  }
  const auto m = datasets::make_label_mapping(2, 2, datasets::MappingStrategy::identity, 0);
  TransporterTrainConfig cfg;
  cfg.arch = {2, 4, 16, 3};
  cfg.epochs = 2;
  cfg.optimizer.batch_size = 8;
  std::vector<EpochLoss> history;
  auto run = train_transporter(orig, hij, m, frozen_extractor(), cfg, 1,
                               [&](const EpochLoss& e) { history.push_back(e); });
  EXPECT_EQ(history.size(), 2u);
  EXPECT_EQ(run.osmosis.size(), 16);
  EXPECT_TRUE(torch::equal(run.osmosis.y_o, orig.labels));
  for (std::int64_t i = 0; i < 16; ++i) {
    EXPECT_EQ(run.osmosis.y_h[i].item<std::int64_t>(), m.to_hijack(run.osmosis.y_o[i].item<std::int64_t>()));
  }
  testing::TempDir tmp;
  save_osmosis_set(tmp / "o", run.osmosis);
  const auto back = load_osmosis_set(tmp / "o");
  EXPECT_TRUE(testing::bit_equal(back.x_c, run.osmosis.x_c));
  EXPECT_EQ(back.id_h, run.osmosis.id_h);
  EXPECT_EQ(back.mapping, run.osmosis.mapping);
}

}  // namespace
}  // namespace osmosis::transport
