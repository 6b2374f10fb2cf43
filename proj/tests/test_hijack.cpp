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

#include "osmosis/core/error.hpp"
#include "osmosis/core/seed.hpp"
#include "osmosis/core/tensor_io.hpp"
#include "osmosis/hijack/evaluation.hpp"
#include "osmosis/hijack/victim.hpp"
#include "osmosis/models/toy_cnn.hpp"
#include "support.hpp"

namespace osmosis::hijack {
namespace {

using testing::LambdaClassifier;
using testing::TempDir;

datasets::LabeledImages filled_images(const std::vector<std::int64_t>& labels, const std::vector<double>& fills) {
  datasets::LabeledImages out;
  out.images = torch::empty({static_cast<std::int64_t>(labels.size()), 1, 4, 4});
  for (std::size_t i = 0; i < labels.size(); ++i) out.images[static_cast<std::int64_t>(i)].fill_(fills[i]);
  out.labels = torch::tensor(labels, torch::kInt64);
  for (std::size_t i = 0; i < labels.size(); ++i) out.ids.push_back(static_cast<std::int64_t>(i));
  return out;
}

// Predicts class round(10 * mean pixel).
std::shared_ptr<LambdaClassifier> fill_reader(std::int64_t k) {
  return std::make_shared<LambdaClassifier>(
      [k](const torch::Tensor& x) {
        const auto cls = (x.flatten(1).mean(1) * 10.0).round().to(torch::kInt64).clamp(0, k - 1);
        return torch::one_hot(cls, k).to(torch::kFloat32);
      },
      k);
}

TEST(Carrier, BalancedMeanIsMeanOfClassMeans) {
  // Class 0 has three images, class 1 has one; the plain mean would be skewed toward class 0.
  const auto data = filled_images({0, 0, 0, 1}, {0.0, 0.1, 0.2, 1.0});
  const auto c = compute_carrier(data, "balanced_mean");
  EXPECT_NEAR(c.mean().item<double>(), (0.1 + 1.0) / 2.0, 1e-6);
  EXPECT_EQ(c.sizes(), (std::vector<std::int64_t>{1, 4, 4}));
}

TEST(Carrier, ClassMeanPolicy) {
  const auto data = filled_images({0, 0, 1}, {0.2, 0.4, 0.9});
  EXPECT_NEAR(compute_carrier(data, "class_mean:0").mean().item<double>(), 0.3, 1e-6);
  EXPECT_NEAR(compute_carrier(data, "class_mean:1").mean().item<double>(), 0.9, 1e-6);
  EXPECT_THROW(compute_carrier(data, "class_mean:5"), ConfigError);
  EXPECT_THROW(compute_carrier(data, "median"), ConfigError);
}

TEST(Utility, CountsTopOneHits) {
  auto victim = fill_reader(4);
  const auto test = filled_images({0, 1, 2, 3, 3}, {0.0, 0.1, 0.2, 0.3, 0.0});
  const auto acc = evaluate_utility(*victim, test);
  EXPECT_DOUBLE_EQ(acc.overall, 0.8);
  ASSERT_EQ(acc.per_class.size(), 4u);
  EXPECT_DOUBLE_EQ(acc.per_class[3], 0.5);
  EXPECT_EQ(acc.per_class_count[3], 2);
}

TEST(Asr, PerfectVictimUnderRandomMapping) {
  const auto mapping = datasets::make_label_mapping(4, 6, datasets::MappingStrategy::random, 11);
  std::vector<std::int64_t> labels;
  std::vector<double> fills;
  for (const auto& [o, h] : mapping.pairs) {
    for (int r = 0; r < 3; ++r) {
      labels.push_back(h);
      fills.push_back(static_cast<double>(o) / 10.0);
    }
  }
  auto victim = fill_reader(4);
  const auto test = filled_images(labels, fills);
  EXPECT_DOUBLE_EQ(evaluate_asr(*victim, nullptr, {}, mapping, test, QueryMode::raw).overall, 1.0);
}

TEST(Asr, ConstantVictimHitsOnlyItsClass) {
  const auto mapping = datasets::make_label_mapping(4, 4, datasets::MappingStrategy::random, 3);
  auto victim = std::make_shared<LambdaClassifier>(
      [](const torch::Tensor& x) { return torch::one_hot(torch::zeros({x.size(0)}, torch::kInt64), 4).to(torch::kFloat32); },
      4);
  const auto test = filled_images({0, 1, 2, 3}, {0.0, 0.0, 0.0, 0.0});
  const auto acc = evaluate_asr(*victim, nullptr, {}, mapping, test, QueryMode::raw);
  EXPECT_DOUBLE_EQ(acc.overall, 0.25);
  EXPECT_DOUBLE_EQ(acc.per_class[static_cast<std::size_t>(mapping.to_hijack(0))], 1.0);
}

TEST(Asr, UnmappedHijackClassIsRejected) {
  const auto mapping = datasets::make_label_mapping(2, 2, datasets::MappingStrategy::identity, 0);
  auto victim = fill_reader(2);
  const auto test = filled_images({0, 5}, {0.0, 0.0});
  EXPECT_THROW(evaluate_asr(*victim, nullptr, {}, mapping, test, QueryMode::raw), ConfigError);
}

TEST(Asr, TransportedQueriesNeedTransporter) {
  EXPECT_THROW(make_queries(nullptr, torch::zeros({1, 4, 4}), torch::zeros({2, 1, 4, 4}), QueryMode::transported),
               ConfigError);
  const auto raw = torch::rand({2, 1, 4, 4});
  EXPECT_TRUE(torch::equal(make_queries(nullptr, {}, raw, QueryMode::raw), raw));
}

TEST(QueryModeNames, RoundTrip) {
  EXPECT_EQ(parse_query_mode(to_string(QueryMode::raw)), QueryMode::raw);
  EXPECT_EQ(parse_query_mode(to_string(QueryMode::transported)), QueryMode::transported);
  EXPECT_THROW(parse_query_mode("both"), ConfigError);
}

datasets::TrainingSet tiny_training_set(std::uint64_t seed) {
  auto gen = make_generator(seed);
  datasets::TrainingSet t;
  const auto labels = torch::arange(16, torch::kInt64).remainder(2);
  t.images = torch::rand({16, 3, 8, 8}, gen) * 0.2 + labels.view({16, 1, 1, 1}).to(torch::kFloat32) * 0.6;
  t.targets = torch::one_hot(labels, 2).to(torch::kFloat32);
  t.is_real.assign(16, false);
  return t;
}

VictimSpec tiny_victim() {
  VictimSpec v;
  v.arch = {models::Arch::toy_cnn, 2, 4, 8};
  return v;
}

TEST(Finetune, LossDecreasesAndIsDeterministic) {
  const auto data = tiny_training_set(1);
  FinetuneConfig cfg{20, 8, 0.01};
  auto a = make_victim(tiny_victim(), 5);
  auto b = make_victim(tiny_victim(), 5);
  const auto la = finetune_victim(*a, data, cfg, 9);
  const auto lb = finetune_victim(*b, data, cfg, 9);
  ASSERT_EQ(la.size(), 20u);
  EXPECT_LT(la.back(), la.front());
  EXPECT_EQ(la, lb);
  const auto pa = a->parameters();
  const auto pb = b->parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_TRUE(torch::equal(pa[i], pb[i]));
}

TEST(Finetune, RejectsNonFiniteLoss) {
  auto data = tiny_training_set(1);
  data.images[0].fill_(std::numeric_limits<float>::quiet_NaN());
  auto v = make_victim(tiny_victim(), 0);
  EXPECT_THROW(finetune_victim(*v, data, {1, 16, 0.01}, 0), DivergenceError);
}

TEST(Victim, PretrainedBackboneKeepsFeaturesAndRedrawsHead) {
  TempDir tmp;
  auto source = make_victim(tiny_victim(), 1);
  finetune_victim(*source, tiny_training_set(2), {5, 8, 0.01}, 0);
  save_module(tmp.path(), *source, {});
  auto spec = tiny_victim();
  spec.pretrained = tmp.path().string();
  auto v = make_victim(spec, 7);
  const auto& a = dynamic_cast<models::ToyCnn&>(*source);
  const auto& b = dynamic_cast<models::ToyCnn&>(*v);
  const auto backbone = a.layout().numel() - a.layout().num_classes * (a.layout().feature_dim() + 1);
  EXPECT_TRUE(torch::equal(a.flat_parameters().narrow(0, 0, backbone), b.flat_parameters().narrow(0, 0, backbone)));
  EXPECT_FALSE(torch::equal(a.flat_parameters().narrow(0, backbone, a.layout().numel() - backbone),
                            b.flat_parameters().narrow(0, backbone, a.layout().numel() - backbone)));
  spec.pretrained = (tmp.path() / "missing").string();
  EXPECT_THROW(make_victim(spec, 7), ArtifactError);
}

TEST(Experiment, AveragesSeedsAndReturnsVictims) {
  const auto data = tiny_training_set(3);
  const auto mapping = datasets::make_label_mapping(2, 2, datasets::MappingStrategy::identity, 0);
  TestSets tests;
  tests.original.images = data.images;
  tests.original.labels = data.targets.argmax(1);
  tests.hijack = tests.original;
  HijackConfig cfg;
  cfg.victim = tiny_victim();
  cfg.finetune = {10, 8, 0.01};
  cfg.victim_seeds = 2;
  cfg.query_mode = QueryMode::raw;
  std::vector<models::ClassifierPtr> victims;
  const auto r = run_hijack_experiment(data, nullptr, {}, mapping, tests, cfg, 4, "fp", &victims);
  ASSERT_EQ(r.seeds.size(), 2u);
  EXPECT_EQ(victims.size(), 2u);
  EXPECT_NEAR(r.utility, (r.seeds[0].utility + r.seeds[1].utility) / 2.0, 1e-12);
  EXPECT_NEAR(r.asr, (r.seeds[0].asr + r.seeds[1].asr) / 2.0, 1e-12);
  // Identity mapping with the original test set as hijack set: ASR equals utility.
  EXPECT_NEAR(r.asr, r.utility, 1e-12);
  const auto back = EvalReport::from_json(nlohmann::json::parse(r.to_json().dump()));
  EXPECT_EQ(nlohmann::json::parse(back.to_json().dump()), nlohmann::json::parse(r.to_json().dump()));
}

}  // namespace
}  // namespace osmosis::hijack
