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

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include "osmosis/core/error.hpp"
#include "osmosis/core/seed.hpp"
#include "osmosis/core/tensor_io.hpp"
#include "osmosis/distiller/distill.hpp"
#include "osmosis/distiller/dod_io.hpp"
#include "osmosis/distiller/patches.hpp"
#include "osmosis/distiller/trajectory.hpp"
#include "support.hpp"

namespace osmosis::distill {
namespace {

using testing::TempDir;

TEST(Tiling, CropReassembleIdentityOnRandomImages) {
  auto gen = make_generator(1);
  for (int i = 0; i < 100; ++i) {
    const std::int64_t rows = 1 + i % 4;
    const std::int64_t cols = 1 + (i / 4) % 4;
    const auto img = torch::rand({3, rows * 4, cols * 5}, gen);
    const auto patches = crop_patches(img, rows, cols, i, 0);
    ASSERT_EQ(static_cast<std::int64_t>(patches.size()), rows * cols);
    EXPECT_TRUE(torch::equal(reassemble_patches(patches, rows, cols), img));
    EXPECT_EQ(patches.back().grid_pos, (GridPos{rows - 1, cols - 1}));
  }
}

TEST(Tiling, BatchedCropMatchesSingleCrop) {
  auto gen = make_generator(2);
  const auto imgs = torch::rand({3, 3, 8, 8}, gen);
  const auto grid = crop_grid(imgs, 2, 2);
  EXPECT_EQ(grid.sizes(), (std::vector<std::int64_t>{3, 4, 3, 4, 4}));
  for (std::int64_t n = 0; n < 3; ++n) {
    const auto patches = crop_patches(imgs[n], 2, 2);
    for (std::int64_t p = 0; p < 4; ++p) EXPECT_TRUE(torch::equal(grid[n][p], patches[static_cast<std::size_t>(p)].pixels));
  }
}

TEST(Tiling, IndivisibleImageRejected) { EXPECT_THROW(crop_patches(torch::rand({3, 7, 8}), 2, 2), ConfigError); }

TEST(Realism, UniformObserverGivesMinusTwoLogK) {
  for (const std::int64_t k : {2, 4, 10, 100}) {
    const ObserverModel observer(testing::uniform_classifier(k), k, 16);
    const HumanObserverProxy human({7}, torch::tensor({std::int64_t{1}}));
    Patch p{torch::rand({3, 8, 8}), 7, {0, 0}, 0, 0.0};
    EXPECT_NEAR(realism_score(observer, human, p, 0), -2.0 * std::log(static_cast<double>(k)), 1e-9);
  }
}

TEST(Realism, MatchesHandComputedCrossEntropies) {
  const std::vector<double> logits{2.0, -1.0, 0.5, 0.0};
  auto clf = std::make_shared<testing::LambdaClassifier>(
      [&](const torch::Tensor& x) {
        return torch::tensor(std::vector<float>(logits.begin(), logits.end())).repeat({x.size(0), 1});
      },
      4);
  const ObserverModel observer(clf, 4, 16);
  const HumanObserverProxy human({3}, torch::tensor({std::int64_t{2}}));
  double lse = 0.0;
  for (const auto l : logits) lse += std::exp(l);
  lse = std::log(lse);
  const double expected = (logits[2] - lse) + (logits[0] - lse);
  Patch p{torch::rand({3, 8, 8}), 3, {0, 0}, 0, 0.0};
  EXPECT_NEAR(realism_score(observer, human, p, 0), expected, 1e-6);
  EXPECT_LE(realism_score(observer, human, p, 0), 0.0);
}

bool oracle_order(const Patch& a, const Patch& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.parent_id != b.parent_id) return a.parent_id < b.parent_id;
  if (a.grid_pos.row != b.grid_pos.row) return a.grid_pos.row < b.grid_pos.row;
  return a.grid_pos.col < b.grid_pos.col;
}

TEST(Selection, EqualsExhaustiveSortOnRandomPatches) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> score(-10.0, 0.0);
  std::uniform_int_distribution<std::int64_t> cls(0, 2);
  std::vector<Patch> patches;
  for (std::int64_t i = 0; i < 1000; ++i) {
    // Coarse scores force ties that the id order must break.
    const double s = std::round(score(rng) * 4.0) / 4.0;
    patches.push_back({torch::Tensor(), i / 4, {(i % 4) / 2, i % 2}, cls(rng), s});
  }
  for (const std::int64_t n : {1, 4, 9, 16, 25}) {
    for (std::int64_t c = 0; c < 3; ++c) {
      std::vector<Patch> expected;
      std::copy_if(patches.begin(), patches.end(), std::back_inserter(expected),
                   [&](const Patch& p) { return p.class_id == c; });
      std::sort(expected.begin(), expected.end(), oracle_order);
      expected.resize(static_cast<std::size_t>(n));
      const auto got = select_key_patches(patches, c, n);
      ASSERT_EQ(got.size(), expected.size());
      for (std::size_t i = 0; i < got.size(); ++i) {
        EXPECT_EQ(got[i].parent_id, expected[i].parent_id);
        EXPECT_EQ(got[i].grid_pos, expected[i].grid_pos);
        EXPECT_EQ(got[i].score, expected[i].score);
      }
    }
  }
}

TEST(Selection, ShortClassNamesTheClass) {
  std::vector<Patch> patches{{torch::Tensor(), 0, {0, 0}, 3, -1.0}};
  try {
    select_key_patches(patches, 3, 2);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find('3'), std::string::npos);
  }
}

TEST(Mosaic, PlacesPatchesRowMajor) {
  std::vector<Patch> patches;
  for (std::int64_t i = 0; i < 4; ++i) patches.push_back({torch::full({3, 4, 4}, i / 4.0), i, {0, 0}, 0, 0.0});
  const auto m = assemble_mosaic(patches, 8);
  EXPECT_EQ(m.pixels.sizes(), (std::vector<std::int64_t>{3, 8, 8}));
  EXPECT_NEAR(m.pixels[0][0][0].item<double>(), 0.0, 1e-6);
  EXPECT_NEAR(m.pixels[0][0][7].item<double>(), 0.25, 1e-6);
  EXPECT_NEAR(m.pixels[0][7][0].item<double>(), 0.5, 1e-6);
  EXPECT_NEAR(m.pixels[0][7][7].item<double>(), 0.75, 1e-6);
  EXPECT_EQ(m.provenance.size(), 4u);
  patches.pop_back();
  EXPECT_THROW(assemble_mosaic(patches, 8), ConfigError);
}

TEST(TrajectoryLoss, BoundaryValues) {
  auto gen = make_generator(3);
  const auto a = torch::randn({50}, gen);
  const auto b = torch::randn({50}, gen);
  EXPECT_NEAR(trajectory_loss(b, a, b).item<double>(), 0.0, 1e-6);
  EXPECT_NEAR(trajectory_loss(a, a, b).item<double>(), 1.0, 1e-6);
  EXPECT_THROW(trajectory_loss(b, a, a), ConfigError);
}

TEST(TrajectoryLoss, MatchesScalarRatioOnRandomVectors) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> d;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> th(8), st(8), tg(8);
    double num = 0.0;
    double den = 0.0;
    for (int i = 0; i < 8; ++i) {
      th[i] = d(rng);
      st[i] = d(rng);
      tg[i] = d(rng);
      num += (th[i] - tg[i]) * (th[i] - tg[i]);
      den += (st[i] - tg[i]) * (st[i] - tg[i]);
    }
    auto t = [](const std::vector<double>& v) { return torch::tensor(v, torch::kFloat64); };
    EXPECT_NEAR(trajectory_loss(t(th), t(st), t(tg)).item<double>(), num / den, 1e-5 * std::max(1.0, num / den));
  }
}

TEST(TrajectoryLoss, GradientMatchesFiniteDifferences) {
  auto gen = make_generator(4);
  const auto st = torch::randn({6}, gen).to(torch::kFloat64);
  const auto tg = torch::randn({6}, gen).to(torch::kFloat64);
  auto th = torch::randn({6}, gen).to(torch::kFloat64).requires_grad_(true);
  const auto grad = torch::autograd::grad({trajectory_loss(th, st, tg)}, {th})[0];
  torch::NoGradGuard ng;
  const double h = 1e-6;
  for (std::int64_t i = 0; i < 6; ++i) {
    auto e = torch::zeros({6}, torch::kFloat64);
    e[i] = h;
    const double numeric =
        (trajectory_loss(th + e, st, tg).item<double>() - trajectory_loss(th - e, st, tg).item<double>()) / (2 * h);
    const double analytic = grad[i].item<double>();
    EXPECT_NEAR(analytic, numeric, 1e-3 * std::max(std::abs(numeric), 1e-3));
  }
}

models::ToyCnnLayout tiny_layout() {
  models::ToyCnnLayout l;
  l.width = 4;
  l.depth = 2;
  l.num_classes = 2;
  l.resolution = 8;
  return l;
}

TEST(Trajectory, RecordsSnapshotsAndRoundTrips) {
  auto gen = make_generator(5);
  const auto x = torch::rand({32, 3, 8, 8}, gen);
  const auto y = torch::arange(32, torch::kInt64) % 2;
  ExpertTrainConfig cfg;
  cfg.batch_size = 8;
  cfg.epochs = 2;
  cfg.snapshot_interval = 2;
  const auto t = record_expert_trajectory(x, y, "toy_cnn", tiny_layout(), cfg, 9);
  EXPECT_EQ(t.num_snapshots(), 2 * 4 / 2 + 1);
  EXPECT_EQ(t.param_count(), tiny_layout().numel());
  const auto again = record_expert_trajectory(x, y, "toy_cnn", tiny_layout(), cfg, 9);
  EXPECT_TRUE(testing::bit_equal(t.snapshots, again.snapshots));

  TempDir tmp;
  save_trajectory_buffer(tmp / "buf", {t, again});
  const auto back = load_trajectory_buffer(tmp / "buf");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_TRUE(testing::bit_equal(back[0].snapshots, t.snapshots));
  EXPECT_EQ(back[0].seed, t.seed);
  EXPECT_EQ(back[0].layout.width, 4);
  EXPECT_THROW(record_expert_trajectory(x, y, "resnet18", tiny_layout(), cfg, 9), ConfigError);
}

TEST(Trajectory, MissingBufferNamesField) {
  try {
    load_trajectory_buffer("/nonexistent/buffer");
    FAIL();
  } catch (const ArtifactError& e) {
    EXPECT_EQ(e.field(), "trajectories");
  }
}

DistilledOsmosisSet toy_dod() {
  DistilledOsmosisSet dod;
  auto gen = make_generator(6);
  dod.ipc = 2;
  dod.num_classes = 3;
  dod.n_patches = 4;
  dod.images = torch::rand({6, 3, 8, 8}, gen);
  dod.soft_labels = torch::softmax(torch::randn({6, 3}, gen), 1);
  dod.class_ids = torch::tensor({0, 0, 1, 1, 2, 2}, torch::kInt64);
  dod.mapping = datasets::make_label_mapping(3, 5, datasets::MappingStrategy::random, 2);
  for (std::int64_t i = 0; i < 6; ++i) {
    dod.provenance.push_back({{i, {0, 0}}, {i + 10, {0, 1}}, {i + 20, {1, 0}}, {i + 30, {1, 1}}});
  }
  dod.extra = {{"surrogate_arch", "toy_cnn"}};
  return dod;
}

TEST(DodIo, RoundTripIsBitIdentical) {
  TempDir tmp;
  const auto dod = toy_dod();
  save_dod(tmp / "d", dod);
  const auto back = load_dod(tmp / "d");
  EXPECT_TRUE(testing::bit_equal(back.images, dod.images));
  EXPECT_TRUE(testing::bit_equal(back.soft_labels, dod.soft_labels));
  EXPECT_TRUE(torch::equal(back.class_ids, dod.class_ids));
  EXPECT_EQ(back.provenance, dod.provenance);
  EXPECT_EQ(back.mapping, dod.mapping);
  EXPECT_EQ(back.extra, dod.extra);
  save_dod(tmp / "e", back);
  for (const auto* f : {"images.f32", "soft_labels.f32", "dod.json"}) {
    std::ifstream a(tmp / "d" / f, std::ios::binary);
    std::ifstream b(tmp / "e" / f, std::ios::binary);
    EXPECT_EQ(std::string(std::istreambuf_iterator<char>(a), {}), std::string(std::istreambuf_iterator<char>(b), {}));
  }
}

TEST(DodIo, TamperedTensorFailsNamingIt) {
  TempDir tmp;
  save_dod(tmp / "d", toy_dod());
  {
    std::fstream f(tmp / "d" / "soft_labels.f32", std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(3);
    f.put('\x01');
  }
  try {
    load_dod(tmp / "d");
    FAIL();
  } catch (const ArtifactError& e) {
    EXPECT_EQ(e.field(), "soft_labels");
  }
}

TEST(DodIo, WrongCardinalityRejectedOnSave) {
  TempDir tmp;
  auto dod = toy_dod();
  dod.ipc = 3;
  EXPECT_THROW(save_dod(tmp / "d", dod), ConfigError);
}

TEST(DodIo, VersionOneFixtureMigratesToGoldenManifest) {
  const auto dir = testing::fixture("dod_v1");
  const auto migrated = migrate_dod_manifest(read_json(dir / "dod.json"));
  EXPECT_EQ(migrated, read_json(dir / "expected_v2.json"));
  const auto dod = load_dod(dir);
  const auto sums = read_json(dir / "expected_sums.json");
  EXPECT_EQ(dod.size(), 4);
  EXPECT_NEAR(dod.images.to(torch::kFloat64).sum().item<double>(), sums["images_sum"].get<double>(), 1e-9);
  EXPECT_NEAR(dod.soft_labels.to(torch::kFloat64).sum().item<double>(), sums["labels_sum"].get<double>(), 1e-9);
  EXPECT_EQ(dod.provenance[1][2], (ProvenanceEntry{12, {1, 0}}));
  EXPECT_EQ(migrate_dod_manifest(migrated), migrated);
}

TEST(DodIo, UnknownSchemaRejected) {
  EXPECT_THROW(migrate_dod_manifest({{"schema_version", 99}}), ArtifactError);
  EXPECT_THROW(migrate_dod_manifest({{"ipc", 1}}), ArtifactError);
}

TEST(Distill, SmallRunHasRequestedCardinalityAndLabels) {
  auto gen = make_generator(7);
  transport::OsmosisSet set;
  set.x_c = torch::rand({24, 3, 8, 8}, gen);
  set.y_o = torch::arange(24, torch::kInt64) % 2;
  set.y_h = set.y_o.clone();
  for (std::int64_t i = 0; i < 24; ++i) {
    set.id_o.push_back(i);
    set.id_h.push_back(100 + i);
  }
  set.mapping = datasets::make_label_mapping(2, 2, datasets::MappingStrategy::identity, 0);
  ExpertTrainConfig ecfg;
  ecfg.batch_size = 8;
  ecfg.epochs = 3;
  ecfg.snapshot_interval = 1;
  std::vector<ExpertTrajectory> buffer{
      record_expert_trajectory(set.x_c, set.y_o, "toy_cnn", tiny_layout(), ecfg, 1)};
  const ObserverModel observer(testing::uniform_classifier(2), 2, 8);

  DistillConfig cfg;
  cfg.ipc = 3;
  cfg.n_patches = 4;
  cfg.iterations = 3;
  cfg.relabel = LabelSource::hard;
  std::vector<double> losses;
  const auto run = distill(set, buffer, observer, cfg, 1, [&](std::int64_t, double l) { losses.push_back(l); });
  EXPECT_EQ(run.dod.size(), 6);
  EXPECT_EQ(run.dod.images.sizes(), (std::vector<std::int64_t>{6, 3, 8, 8}));
  EXPECT_EQ(losses.size(), 3u);
  for (const auto l : losses) EXPECT_TRUE(std::isfinite(l));
  EXPECT_TRUE(torch::equal(run.dod.soft_labels.argmax(1), run.dod.class_ids));
  for (const auto& prov : run.dod.provenance) EXPECT_EQ(prov.size(), 4u);

  cfg.relabel = LabelSource::observer;
  const auto soft = initialize_mosaics(set, observer, cfg);
  EXPECT_TRUE(torch::allclose(soft.soft_labels, torch::full({6, 2}, 0.5)));
}

}  // namespace
}  // namespace osmosis::distill
