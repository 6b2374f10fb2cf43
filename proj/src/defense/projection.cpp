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

#include "osmosis/defense/projection.hpp"

#include <fstream>

#include "osmosis/core/error.hpp"

namespace osmosis::defense {

nlohmann::ordered_json FeatureProjection::to_json() const {
  nlohmann::ordered_json pts = nlohmann::ordered_json::array();
  const auto p = points.to(torch::kFloat64).contiguous();
  for (std::int64_t i = 0; i < p.size(0); ++i) {
    pts.push_back({{"x", p[i][0].item<double>()},
                   {"y", p[i][1].item<double>()},
                   {"tag", tags[static_cast<std::size_t>(i)]},
                   {"class", class_ids[static_cast<std::size_t>(i)]}});
  }
  nlohmann::ordered_json j;
  j["method_params"] = nlohmann::ordered_json::parse(method_params.dump());
  j["points"] = pts;
  return j;
}

void FeatureProjection::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw ArtifactError("cannot write " + path.string(), path.filename().string());
  out.precision(17);
  out << "x,y,tag,class\n";
  const auto p = points.to(torch::kFloat64).contiguous();
  for (std::int64_t i = 0; i < p.size(0); ++i) {
    out << p[i][0].item<double>() << ',' << p[i][1].item<double>() << ',' << tags[static_cast<std::size_t>(i)] << ','
        << class_ids[static_cast<std::size_t>(i)] << '\n';
  }
}

FeatureProjection feature_projection(models::Classifier& victim, const LabeledInputs& inputs, const TsneConfig& cfg,
                                     std::uint64_t seed) {
  require(inputs.images.defined() && inputs.images.size(0) > 0, "projection inputs are empty");
  const auto n = static_cast<std::size_t>(inputs.images.size(0));
  require(inputs.tags.size() == n && inputs.class_ids.size() == n, "projection tags and classes must match inputs");
  FeatureProjection out;
  out.points = tsne(models::extract_features(victim, inputs.images), cfg, seed);
  out.tags = inputs.tags;
  out.class_ids = inputs.class_ids;
  out.method_params = cfg.to_json();
  out.method_params["seed"] = seed;
  return out;
}

std::vector<hijack::EvalReport> cross_arch_eval(const distill::DistilledOsmosisSet& dod,
                                                const std::string& surrogate_arch,
                                                const std::vector<models::Arch>& victim_archs,
                                                transport::Transporter* transporter, const torch::Tensor& carrier,
                                                const hijack::TestSets& tests, const hijack::HijackConfig& base,
                                                std::uint64_t seed, const std::string& fingerprint) {
  require(!victim_archs.empty(), "cross-architecture evaluation needs at least one victim");
  const auto recorded = dod.extra.value("surrogate_arch", surrogate_arch);
  require(recorded == surrogate_arch, "DOD was distilled with surrogate '" + recorded + "', not '" + surrogate_arch + "'");
  std::vector<hijack::EvalReport> out;
  for (const auto arch : victim_archs) {
    auto cfg = base;
    cfg.victim.arch.arch = arch;
    auto report = hijack::run_hijack_experiment(dod.as_training_set(), transporter, carrier, dod.mapping, tests, cfg,
                                                seed, fingerprint);
    report.extra["surrogate_arch"] = surrogate_arch;
    out.push_back(std::move(report));
  }
  return out;
}

}  // namespace osmosis::defense
