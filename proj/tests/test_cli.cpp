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

#include <sstream>

#include "osmosis/cli/cli.hpp"
#include "osmosis/core/tensor_io.hpp"
#include "support.hpp"

namespace osmosis::cli {
namespace {

using nlohmann::json;
using testing::TempDir;

struct Result {
  int code;
  std::string out;
  std::string err;

  std::map<std::string, std::string> summary() const {
    std::map<std::string, std::string> kv;
    std::istringstream in(out);
    for (std::string line; std::getline(in, line);) {
      const auto eq = line.find('=');
      if (eq != std::string::npos) kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return kv;
  }
  std::string last_line(std::size_t from_end = 0) const {
    std::vector<std::string> lines;
    std::istringstream in(out);
    for (std::string line; std::getline(in, line);) lines.push_back(line);
    return lines.size() > from_end ? lines[lines.size() - 1 - from_end] : "";
  }
};

Result od(std::vector<std::string> args) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = od_main(args, out, err);
  return {code, out.str(), err.str()};
}

class Cli : public ::testing::Test {
 protected:
  Result run(const std::string& sub, std::vector<std::string> extra = {}) {
    std::vector<std::string> args{"--config", config, "--out", root.path().string()};
    args.insert(args.end(), extra.begin(), extra.end());
    args.insert(args.begin() + 4, sub);
    return od(args);
  }
  Result run_with(std::vector<std::string> global, const std::string& sub, std::vector<std::string> extra = {}) {
    std::vector<std::string> args{"--config", config, "--out", root.path().string()};
    args.insert(args.end(), global.begin(), global.end());
    args.push_back(sub);
    args.insert(args.end(), extra.begin(), extra.end());
    return od(args);
  }

  TempDir root;
  std::string config = testing::fixture("tiny_config.json").string();
};

TEST(CliBasics, HelpExitsZero) {
  for (const auto& args : std::vector<std::vector<std::string>>{{"--help"}, {"hijack", "--help"}, {"osmose", "--help"}}) {
    const auto r = od(args);
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("Usage"), std::string::npos);
  }
}

TEST(CliBasics, MissingSubcommandIsUsageError) { EXPECT_EQ(od({}).code, 2); }

TEST_F(Cli, UnknownOverrideKeyIsNamed) {
  const auto r = run_with({"--override", "distill.no_such_key=4"}, "osmose");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("distill.no_such_key"), std::string::npos);
  EXPECT_EQ(r.err.rfind("error code=2", 0), 0u);
}

TEST_F(Cli, StagesRunInOrderAndReportSummaries) {
  const auto o = run("osmose");
  ASSERT_EQ(o.code, 0) << o.err;
  EXPECT_EQ(o.summary().at("samples"), "48");
  EXPECT_TRUE(fs::exists(o.summary().at("osmosis_dir")));

  const auto d = run_with({"--override", "distill.n_patches=4"}, "distill");
  ASSERT_EQ(d.code, 0) << d.err;
  const auto ds = d.summary();
  EXPECT_EQ(ds.at("images"), "4");
  EXPECT_EQ(ds.at("ipc"), "2");
  EXPECT_EQ(ds.at("n_patches"), "4");
  EXPECT_TRUE(ds.contains("final_trajectory_loss"));
  EXPECT_EQ(read_json(fs::path(ds.at("dod_dir")) / "dod.json").at("n_patches"), 4);

  const auto h = run("hijack");
  ASSERT_EQ(h.code, 0) << h.err;
  EXPECT_EQ(h.last_line(1).rfind("utility=", 0), 0u);
  EXPECT_EQ(h.last_line(0).rfind("asr=", 0), 0u);

  const auto f = run("defend");
  ASSERT_EQ(f.code, 0) << f.err;
  const auto fs_ = f.summary();
  EXPECT_EQ(fs_.at("probes"), "1");
  const auto strip = read_json(fs_.at("strip_entropies"));
  EXPECT_FALSE(strip.at("entropies_attack").empty());

  const auto again = run("hijack");
  EXPECT_EQ(again.summary().at("cached"), "true");
  EXPECT_EQ(again.summary().at("asr"), h.summary().at("asr"));
}

TEST_F(Cli, MissingUpstreamArtifactsExitThree) {
  const auto h = run("hijack");
  EXPECT_EQ(h.code, 3);
  EXPECT_NE(h.err.find("field=DOD"), std::string::npos);
  EXPECT_NE(h.err.find("od distill"), std::string::npos);
  EXPECT_EQ(run("distill").code, 3);
  EXPECT_EQ(run("hijack", {"--dod", (root.path() / "nowhere").string()}).code, 3);
  ASSERT_EQ(run("osmose").code, 0);
  const auto t = run("distill", {"--trajectories", (root.path() / "no_buffer").string()});
  EXPECT_EQ(t.code, 3);
  EXPECT_NE(t.err.find("omit --trajectories"), std::string::npos);
}

TEST_F(Cli, DefendWithoutProbesPrintsEmptySection) {
  ASSERT_EQ(run("osmose").code, 0);
  ASSERT_EQ(run("distill").code, 0);
  const auto r = run_with({"--override", "defense.strip.enabled=false"}, "defend");
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.summary().at("probes"), "0");
}

TEST_F(Cli, NonPositiveEpsilonIsUsageError) {
  const auto r = run_with({"--override", "defense.dpsgd.enabled=true", "--override", "defense.dpsgd.epsilon=0"},
                          "defend");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("epsilon"), std::string::npos);
}

TEST_F(Cli, SweepAndReport) {
  const auto s = run("sweep", {"--axis", "ipc", "--values", "1,2"});
  ASSERT_EQ(s.code, 0) << s.err;
  const auto ss = s.summary();
  EXPECT_EQ(ss.at("records"), "2");
  EXPECT_EQ(ss.at("failed"), "0");
  const auto manifest = ss.at("sweep_manifest");

  const auto r = od({"--out", root.path().string(), "report", manifest, "--report-dir", (root / "rep").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.summary().at("rows"), "2");
  EXPECT_EQ(r.summary().at("axis"), "ipc");
  EXPECT_EQ(read_json(root / "rep" / "report.json").at("rows").size(), 2u);

  const auto d = run("sweep", {"--axis", "dilution", "--values", "[0.2]"});
  ASSERT_EQ(d.code, 0) << d.err;
  const auto mixed = od({"report", manifest, d.summary().at("sweep_manifest"), "--report-dir", (root / "x").string()});
  EXPECT_EQ(mixed.code, 2);
}

TEST_F(Cli, ReportOverFourRecordsHasFourRows) {
  const auto s = run("sweep", {"--axis", "ipc", "--values", "[1,2,3,4]"});
  ASSERT_EQ(s.code, 0) << s.err;
  const auto manifest = read_json(s.summary().at("sweep_manifest"));
  std::vector<std::string> args{"report"};
  for (const auto& p : manifest.at("records")) args.push_back(p.get<std::string>());
  args.push_back("--report-dir");
  args.push_back((root / "rep4").string());
  const auto r = od(args);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.summary().at("rows"), "4");
}

TEST_F(Cli, BadSweepValueIsUsageError) {
  EXPECT_EQ(run("sweep", {"--axis", "ipc", "--values", "0"}).code, 2);
  EXPECT_EQ(run("sweep", {"--axis", "colour", "--values", "1"}).code, 2);
}

}  // namespace
}  // namespace osmosis::cli
