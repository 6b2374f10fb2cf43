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

#include <fstream>

#include "osmosis/core/error.hpp"
#include "osmosis/core/image.hpp"
#include "osmosis/core/tensor_io.hpp"
#include "osmosis/experiments/artifacts.hpp"
#include "osmosis/experiments/config.hpp"
#include "osmosis/experiments/pipeline.hpp"
#include "osmosis/experiments/report.hpp"
#include "osmosis/models/toy_cnn.hpp"
#include "support.hpp"

namespace osmosis::experiments {
namespace {

using nlohmann::json;
using testing::TempDir;

json tiny_config() { return materialize_config(load_config(testing::fixture("tiny_config.json"))); }

std::string error_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

TEST(Config, DefaultsAreMaterialized) {
  const auto c = materialize_config(json::object());
  EXPECT_EQ(c, default_config());
  EXPECT_EQ(c.at("schema_version"), kConfigSchemaVersion);
  const auto tiny = tiny_config();
  EXPECT_EQ(tiny.at("distill").at("lr_pixels"), default_config().at("distill").at("lr_pixels"));
  EXPECT_EQ(tiny.at("distill").at("ipc"), 2);
}

TEST(Config, UnknownKeysAndTypeChangesNameTheKey) {
  EXPECT_NE(error_of([] { materialize_config({{"distill", {{"ipcs", 3}}}}); }).find("distill.ipcs"),
            std::string::npos);
  EXPECT_NE(error_of([] { materialize_config({{"victim", {{"epochs", "many"}}}}); }).find("victim.epochs"),
            std::string::npos);
  EXPECT_NE(error_of([] { materialize_config({{"victim", {{"epochs", 2.5}}}}); }).find("victim.epochs"),
            std::string::npos);
  EXPECT_EQ(materialize_config({{"victim", {{"epochs", 7.0}}}}).at("victim").at("epochs"), 7);
  EXPECT_EQ(materialize_config({{"victim", {{"lr", 1}}}}).at("victim").at("lr"), 1.0);
  EXPECT_THROW(materialize_config({{"schema_version", 99}}), ConfigError);
}

TEST(Config, Overrides) {
  auto c = default_config();
  apply_override(c, "distill.n_patches=9");
  apply_override(c, "victim.arch=toy_cnn");
  apply_override(c, "original_dataset.classes=[1,2]");
  EXPECT_EQ(c.at("distill").at("n_patches"), 9);
  EXPECT_EQ(c.at("victim").at("arch"), "toy_cnn");
  EXPECT_EQ(c.at("original_dataset").at("classes"), json::array({1, 2}));
  EXPECT_NE(error_of([&] { apply_override(c, "nope.x=1"); }).find("nope"), std::string::npos);
  EXPECT_THROW(apply_override(c, "distill.ipc"), ConfigError);
}

TEST(Config, FingerprintTracksContent) {
  const auto a = tiny_config();
  auto b = a;
  EXPECT_EQ(fingerprint(a), fingerprint(b));
  EXPECT_EQ(fingerprint(a).size(), 64u);
  b["distill"]["iterations"] = 3;
  EXPECT_NE(fingerprint(a), fingerprint(b));
}

TEST(Config, ValidationRejectsInconsistentSettings) {
  auto c = tiny_config();
  EXPECT_NO_THROW(validate_config(c));
  auto bad = c;
  bad["distill"]["n_patches"] = 3;
  EXPECT_THROW(validate_config(bad), ConfigError);
  bad = c;
  bad["dilution"]["ratio"] = 1.5;
  EXPECT_THROW(validate_config(bad), ConfigError);
  bad = c;
  bad["defense"]["dpsgd"]["epsilon"] = 0.0;
  EXPECT_THROW(validate_config(bad), ConfigError);
  bad = c;
  bad["original_dataset"]["name"] = "imagenet21k";
  EXPECT_THROW(validate_config(bad), ConfigError);
  bad = c;
  bad["hijacking_dataset"]["classes"] = json::array({2});
  EXPECT_THROW(validate_config(bad), ConfigError);
}

TEST(Sweep, PointsWriteTheirAxisKey) {
  const auto c = tiny_config();
  EXPECT_EQ(sweep_point(c, "ipc", 5).at("distill").at("ipc"), 5);
  EXPECT_EQ(sweep_point(c, "key_patches", 9).at("distill").at("n_patches"), 9);
  EXPECT_EQ(sweep_point(c, "dilution", 0.3).at("dilution").at("ratio"), 0.3);
  EXPECT_EQ(sweep_point(c, "victim_arch", "toy_resnet").at("victim").at("arch"), "toy_resnet");
  const json pair = {{"original_dataset", {{"classes", {4, 5}}}}, {"hijacking_dataset", {{"classes", {6, 7}}}}};
  EXPECT_EQ(sweep_point(c, "dataset_pair", pair).at("hijacking_dataset").at("classes"), json::array({6, 7}));
  EXPECT_THROW(sweep_point(c, "ipc", 0), ConfigError);
  EXPECT_THROW(sweep_point(c, "key_patches", 5), ConfigError);
  EXPECT_THROW(sweep_point(c, "dilution", 2.0), ConfigError);
  EXPECT_THROW(sweep_point(c, "victim_arch", "alexnet"), ConfigError);
  EXPECT_THROW(sweep_point(c, "temperature", 1), ConfigError);
}

class TinyPipeline : public ::testing::Test {
 protected:
  TempDir root;
};

TEST_F(TinyPipeline, RunsAndReusesEveryStage) {
  const auto first = run_pipeline(tiny_config(), root.path());
  ASSERT_EQ(first.status, "ok") << first.error;
  ASSERT_TRUE(first.report.has_value());
  EXPECT_GE(first.report->asr, 0.0);
  EXPECT_LE(first.report->asr, 1.0);
  EXPECT_FALSE(first.defense.empty());
  for (const auto& s : first.stages) EXPECT_FALSE(s.cached) << s.name;

  const auto second = run_pipeline(tiny_config(), root.path());
  for (const auto& s : second.stages) EXPECT_TRUE(s.cached) << s.name;
  EXPECT_EQ(json::parse(second.report->to_json().dump()), json::parse(first.report->to_json().dump()));

  const auto stored = load_record(root.path() / "runs" / first.fingerprint);
  EXPECT_EQ(stored.status, "ok");
  EXPECT_EQ(stored.fingerprint, first.fingerprint);
  EXPECT_EQ(json::parse(stored.to_json().dump()).at("report"), json::parse(second.to_json().dump()).at("report"));
}

TEST_F(TinyPipeline, ChangedInputInvalidatesOnlyDownstreamStages) {
  auto config = tiny_config();
  const auto base = run_pipeline(config, root.path());
  config["victim"]["epochs"] = 3;
  const auto changed = run_pipeline(config, root.path());
  EXPECT_TRUE(changed.stage("osmosis")->cached);
  EXPECT_TRUE(changed.stage("distill")->cached);
  EXPECT_FALSE(changed.stage("hijack")->cached);
  config["distill"]["iterations"] = 3;
  const auto redistilled = run_pipeline(config, root.path());
  EXPECT_TRUE(redistilled.stage("osmosis")->cached);
  EXPECT_TRUE(redistilled.stage("trajectories")->cached);
  EXPECT_FALSE(redistilled.stage("distill")->cached);
  EXPECT_NE(redistilled.stage("distill")->key, base.stage("distill")->key);
}

TEST_F(TinyPipeline, IdenticalConfigsReproduceAcrossRoots) {
  TempDir other;
  const auto a = run_pipeline(tiny_config(), root.path());
  const auto b = run_pipeline(tiny_config(), other.path());
  EXPECT_EQ(json::parse(a.report->to_json().dump()), json::parse(b.report->to_json().dump()));
  const auto dod_a = Pipeline::dod_path(a.stage("distill")->path);
  const auto dod_b = Pipeline::dod_path(b.stage("distill")->path);
  EXPECT_EQ(content_id(dod_a), content_id(dod_b));
}

TEST_F(TinyPipeline, DilutionSweepSharesTheDod) {
  const auto records = run_sweep(tiny_config(), "dilution", {0.0, 0.5}, root.path());
  ASSERT_EQ(records.size(), 2u);
  for (const auto& r : records) {
    EXPECT_EQ(r.status, "ok") << r.error;
    EXPECT_EQ(r.axis, "dilution");
  }
  EXPECT_EQ(records[0].stage("distill")->key, records[1].stage("distill")->key);
  EXPECT_NE(records[0].stage("hijack")->key, records[1].stage("hijack")->key);
  EXPECT_EQ(records[1].report->extra.at("real_samples"), 4);
}

TEST_F(TinyPipeline, FailingPointDoesNotStopTheSweep) {
  // 24 training images per class cannot fill 100 mosaics of 4 patches.
  const auto records = run_sweep(tiny_config(), "ipc", {2, 100}, root.path());
  ASSERT_EQ(records.size(), 2u);
  EXPECT_EQ(records[0].status, "ok");
  EXPECT_NE(records[1].status, "ok");
  EXPECT_FALSE(records[1].error.empty());
  EXPECT_NE(records[1].exit_code, 0);
  EXPECT_TRUE(fs::exists(root.path() / "runs" / records[1].fingerprint / "record.json"));
}

TEST_F(TinyPipeline, SinglePointSweepEqualsPipelineRun) {
  const auto run = run_pipeline(tiny_config(), root.path());
  const auto swept = run_sweep(tiny_config(), "ipc", {2}, root.path());
  ASSERT_EQ(swept.size(), 1u);
  EXPECT_EQ(json::parse(swept[0].report->to_json().dump()).at("utility"),
            json::parse(run.report->to_json().dump()).at("utility"));
  EXPECT_EQ(swept[0].report->asr, run.report->asr);
}

RunRecord fake_record(const std::string& axis, json value, double utility, double asr) {
  RunRecord r;
  r.fingerprint = "fp" + value.dump();
  r.mode = "od";
  r.axis = axis;
  r.axis_value = std::move(value);
  r.status = "ok";
  hijack::EvalReport rep;
  rep.fingerprint = r.fingerprint;
  rep.utility = utility;
  rep.asr = asr;
  rep.asr_raw = asr / 2.0;
  rep.seeds = {{1, utility, asr, asr / 2.0}};
  r.report = rep;
  return r;
}

TEST(Report, SingleRecordGivesOneRow) {
  TempDir out;
  const auto bundle = emit_report({fake_record("", nullptr, 0.9, 0.7)}, out.path());
  EXPECT_EQ(bundle.rows.size(), 1u);
  for (const auto* f : {"report.json", "report.md", "tables/results.csv", "plots/metrics.png"}) {
    EXPECT_TRUE(fs::exists(out / f)) << f;
  }
}

TEST(Report, JsonTableEqualsSourceReports) {
  TempDir out;
  std::vector<RunRecord> records;
  for (int ipc : {1, 10, 25, 50}) records.push_back(fake_record("ipc", ipc, 0.5 + ipc / 200.0, 0.25 + ipc / 100.0));
  records[2].status = "failed";
  records[2].error = "short class 3";
  records[2].report.reset();
  emit_report(records, out.path());
  const auto table = read_json(out / "report.json");
  EXPECT_EQ(table.at("axis"), "ipc");
  ASSERT_EQ(table.at("rows").size(), 4u);
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& row = table.at("rows")[i];
    EXPECT_EQ(row.at("axis_value"), records[i].axis_value);
    EXPECT_EQ(row.at("status"), records[i].status);
    if (!records[i].report) {
      EXPECT_EQ(row.at("error"), records[i].error);
      continue;
    }
    EXPECT_EQ(row.at("utility").get<double>(), records[i].report->utility);
    EXPECT_EQ(row.at("asr").get<double>(), records[i].report->asr);
    EXPECT_EQ(row.at("asr_raw").get<double>(), records[i].report->asr_raw);
  }
  std::ifstream csv(out / "tables" / "results.csv");
  std::string line;
  int lines = 0;
  while (std::getline(csv, line)) ++lines;
  EXPECT_EQ(lines, 5);
}

TEST(Report, PlotHasOneSeriesPerMetric) {
  TempDir out;
  emit_report({fake_record("dilution", 0.1, 0.9, 0.7), fake_record("dilution", 0.9, 0.95, 0.3)}, out.path());
  const auto sidecar = read_json(out / "plots" / "metrics.png.json");
  ASSERT_EQ(sidecar.at("series").size(), 2u);
  EXPECT_EQ(sidecar.at("series")[0].at("name"), "utility");
  EXPECT_EQ(sidecar.at("series")[1].at("name"), "asr");
  EXPECT_EQ(sidecar.at("series")[1].at("values"), json::array({0.7, 0.3}));
  const auto png = read_png(out / "plots" / "metrics.png");
  EXPECT_EQ(png.size(0), 3);
}

TEST(Report, RejectsEmptyAndMixedInputs) {
  TempDir out;
  EXPECT_THROW(emit_report({}, out.path()), ConfigError);
  EXPECT_THROW(emit_report({fake_record("ipc", 1, 0.9, 0.5), fake_record("dilution", 0.1, 0.9, 0.5)}, out.path()),
               ConfigError);
}

TEST(Artifacts, CheckpointRoundTripIsBitIdentical) {
  TempDir dir;
  const models::ArchSpec spec{models::Arch::toy_cnn, 3, 4, 16};
  auto model = models::make_classifier(spec, 9);
  save_checkpoint(dir / "ckpt", *model, spec);
  const auto loaded = load_checkpoint(dir / "ckpt");
  EXPECT_EQ(loaded.spec.num_classes, 3);
  EXPECT_EQ(loaded.spec.width, 4);
  const auto a = model->named_parameters();
  const auto b = loaded.model->named_parameters();
  ASSERT_EQ(a.size(), b.size());
  for (const auto& item : a) EXPECT_TRUE(testing::bit_equal(item.value(), b[item.key()])) << item.key();
  const auto artifact = load_artifact(dir / "ckpt", ArtifactKind::checkpoint);
  EXPECT_EQ(kind_of(artifact), ArtifactKind::checkpoint);
  EXPECT_THROW(load_artifact(dir / "ckpt", ArtifactKind::dod), ArtifactError);
  EXPECT_THROW(load_checkpoint(dir / "missing"), ArtifactError);
}

TEST(Artifacts, ReportRoundTrip) {
  TempDir dir;
  hijack::EvalReport r;
  r.fingerprint = "abc";
  r.utility = 0.123456789012345678;
  r.asr = 1.0 / 3.0;
  r.seeds = {{7, 0.1, 0.2, 0.3}};
  r.extra["ipc"] = 10;
  save_artifact(dir / "report.json", r);
  const auto back = std::get<hijack::EvalReport>(load_artifact(dir / "report.json", ArtifactKind::report));
  EXPECT_EQ(back.utility, r.utility);
  EXPECT_EQ(back.asr, r.asr);
  EXPECT_EQ(back.seeds[0].seed, 7u);
  std::ofstream(dir / "bad.json") << "{\"utility\": 1}";
  EXPECT_THROW(load_report(dir / "bad.json"), ArtifactError);
}

TEST(Artifacts, KindNamesRoundTrip) {
  for (const auto k : {ArtifactKind::osmosis_set, ArtifactKind::trajectory, ArtifactKind::dod,
                       ArtifactKind::checkpoint, ArtifactKind::report}) {
    EXPECT_EQ(parse_artifact_kind(to_string(k)), k);
  }
  EXPECT_THROW(parse_artifact_kind("weights"), ConfigError);
}

TEST(Artifacts, ContentIdFollowsContent) {
  TempDir dir;
  save_tensor_dir(dir / "a", {{"x", torch::arange(6.0)}}, {});
  const auto id = content_id(dir / "a");
  EXPECT_EQ(id, content_id(dir / "a"));
  save_tensor_dir(dir / "b", {{"x", torch::arange(6.0)}}, {});
  EXPECT_EQ(id, content_id(dir / "b"));
  save_tensor_dir(dir / "c", {{"x", torch::arange(6.0) + 1}}, {});
  EXPECT_NE(id, content_id(dir / "c"));
}

TEST(StageCacheTest, BuildsOnceAndCleansFailedBuilds) {
  TempDir root;
  StageCache cache(root.path());
  int builds = 0;
  bool cached = true;
  const auto build = [&](const fs::path& dir) {
    ++builds;
    std::ofstream(dir / "payload.txt") << "x";
  };
  const auto p1 = cache.get_or_build("s", "k1", {{"a", 1}}, build, &cached);
  EXPECT_FALSE(cached);
  const auto p2 = cache.get_or_build("s", "k1", {{"a", 1}}, build, &cached);
  EXPECT_TRUE(cached);
  EXPECT_EQ(p1, p2);
  EXPECT_EQ(builds, 1);
  EXPECT_TRUE(fs::exists(p1 / "payload.txt"));
  EXPECT_THROW(cache.get_or_build("s", "k2", {}, [](const fs::path&) { throw DivergenceError("stage", 0); }),
               DivergenceError);
  EXPECT_FALSE(cache.has("s", "k2"));
  EXPECT_FALSE(fs::exists(cache.path("s", "k2")));
}

}  // namespace
}  // namespace osmosis::experiments
