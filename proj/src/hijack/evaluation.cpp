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

#include "osmosis/hijack/evaluation.hpp"

#include "osmosis/core/error.hpp"
#include "osmosis/core/log.hpp"
#include "osmosis/core/seed.hpp"

namespace osmosis::hijack {

namespace {

Accuracy tally(const torch::Tensor& correct, const torch::Tensor& classes, std::int64_t num_classes) {
  Accuracy a;
  a.overall = correct.to(torch::kFloat64).mean().item<double>();
  for (std::int64_t c = 0; c < num_classes; ++c) {
    const auto mask = classes == c;
    const auto count = mask.sum().item<std::int64_t>();
    a.per_class_count.push_back(count);
    a.per_class.push_back(count == 0 ? 0.0 : correct.masked_select(mask).to(torch::kFloat64).mean().item<double>());
  }
  return a;
}

nlohmann::ordered_json seed_json(const SeedResult& s) {
  return {{"seed", s.seed}, {"utility", s.utility}, {"asr", s.asr}, {"asr_raw", s.asr_raw}};
}

}  // namespace

std::string to_string(QueryMode m) { return m == QueryMode::transported ? "transported" : "raw"; }

QueryMode parse_query_mode(const std::string& s) {
  if (s == "transported") return QueryMode::transported;
  if (s == "raw") return QueryMode::raw;
  throw ConfigError("unknown query mode '" + s + "'");
}

torch::Tensor compute_carrier(const datasets::LabeledImages& originals, const std::string& policy) {
  require(originals.size() > 0, "carrier needs original images");
  const auto k = originals.labels.max().item<std::int64_t>() + 1;
  const auto class_mean = [&](std::int64_t c) {
    const auto idx = torch::nonzero(originals.labels == c).flatten();
    require(idx.numel() > 0, "carrier class " + std::to_string(c) + " has no images");
    return originals.images.index_select(0, idx).mean(0);
  };
  if (policy == "balanced_mean") {
    std::vector<torch::Tensor> means;
    for (std::int64_t c = 0; c < k; ++c) means.push_back(class_mean(c));
    return torch::stack(means).mean(0);
  }
  if (policy.starts_with("class_mean:")) {
    std::int64_t c = 0;
    try {
      c = std::stoll(policy.substr(11));
    } catch (const std::exception&) {
      throw ConfigError("bad carrier policy '" + policy + "'");
    }
    require(c >= 0 && c < k, "carrier class out of range in '" + policy + "'");
    return class_mean(c);
  }
  throw ConfigError("unknown carrier policy '" + policy + "'");
}

Accuracy evaluate_utility(models::Classifier& victim, const datasets::LabeledImages& test) {
  require(test.size() > 0, "utility test set is empty");
  const auto logits = models::predict_logits(victim, test.images);
  return tally(logits.argmax(1) == test.labels, test.labels, logits.size(1));
}

torch::Tensor make_queries(transport::Transporter* transporter, const torch::Tensor& carrier,
                           const torch::Tensor& hijack_images, QueryMode mode) {
  if (mode == QueryMode::raw) return hijack_images;
  require(transporter != nullptr && !transporter->is_empty(), "transported queries need a transporter");
  require(carrier.defined() && carrier.dim() == 3, "transported queries need a (C,H,W) carrier image");
  return transport::transport(*transporter, carrier.unsqueeze(0).expand_as(hijack_images).contiguous(), hijack_images);
}

Accuracy evaluate_asr(models::Classifier& victim, transport::Transporter* transporter, const torch::Tensor& carrier,
                      const datasets::LabelMapping& mapping, const datasets::LabeledImages& hijack_test,
                      QueryMode mode) {
  require(hijack_test.size() > 0, "hijack test set is empty");
  const auto yh = hijack_test.labels.contiguous();
  const auto* yp = yh.data_ptr<std::int64_t>();
  std::int64_t max_h = 0;
  for (std::int64_t i = 0; i < hijack_test.size(); ++i) {
    if (!mapping.to_original(yp[i])) {
      throw ConfigError("hijack class " + std::to_string(yp[i]) + " is outside the label mapping");
    }
    max_h = std::max(max_h, yp[i]);
  }
  const auto queries = make_queries(transporter, carrier, hijack_test.images, mode);
  const auto pred_o = models::predict_logits(victim, queries).argmax(1).contiguous();
  const auto* po = pred_o.data_ptr<std::int64_t>();
  auto correct = torch::empty({hijack_test.size()}, torch::kBool);
  auto* cp = correct.data_ptr<bool>();
  for (std::int64_t i = 0; i < hijack_test.size(); ++i) {
    bool hit = false;
    for (const auto& [o, h] : mapping.pairs) {
      if (o == po[i]) {
        hit = h == yp[i];
        break;
      }
    }
    cp[i] = hit;
  }
  return tally(correct, yh, max_h + 1);
}

nlohmann::ordered_json EvalReport::to_json() const {
  nlohmann::ordered_json seeds_json = nlohmann::ordered_json::array();
  for (const auto& s : seeds) seeds_json.push_back(seed_json(s));
  nlohmann::ordered_json j;
  j["fingerprint"] = fingerprint;
  j["utility"] = utility;
  j["asr"] = asr;
  j["asr_raw"] = asr_raw;
  j["utility_per_class"] = utility_per_class;
  j["asr_per_class"] = asr_per_class;
  j["seeds"] = seeds_json;
  j["extra"] = extra;
  return j;
}

EvalReport EvalReport::from_json(const nlohmann::json& j) {
  EvalReport r;
  try {
    r.fingerprint = j.at("fingerprint").get<std::string>();
    r.utility = j.at("utility").get<double>();
    r.asr = j.at("asr").get<double>();
    r.asr_raw = j.value("asr_raw", 0.0);
    r.utility_per_class = j.value("utility_per_class", std::vector<double>{});
    r.asr_per_class = j.value("asr_per_class", std::vector<double>{});
    for (const auto& s : j.value("seeds", nlohmann::json::array())) {
      r.seeds.push_back({s.at("seed").get<std::uint64_t>(), s.at("utility").get<double>(), s.at("asr").get<double>(),
                         s.value("asr_raw", 0.0)});
    }
    if (j.contains("extra")) r.extra = nlohmann::ordered_json::parse(j.at("extra").dump());
  } catch (const nlohmann::json::exception& e) {
    throw ArtifactError(std::string("malformed report: ") + e.what(), "report");
  }
  return r;
}

EvalReport run_hijack_experiment(const datasets::TrainingSet& training, transport::Transporter* transporter,
                                 const torch::Tensor& carrier, const datasets::LabelMapping& mapping,
                                 const TestSets& tests, const HijackConfig& cfg, std::uint64_t seed,
                                 const std::string& fingerprint, std::vector<models::ClassifierPtr>* victims) {
  require(cfg.victim_seeds >= 1, "victim_seeds must be >= 1");
  EvalReport report;
  report.fingerprint = fingerprint;
  std::vector<double> util_pc;
  std::vector<double> asr_pc;
  const auto n = static_cast<double>(cfg.victim_seeds);
  for (std::int64_t s = 0; s < cfg.victim_seeds; ++s) {
    const auto vseed = derive_seed(seed, "victim." + std::to_string(s));
    auto victim = make_victim(cfg.victim, vseed);
    finetune_victim(*victim, training, cfg.finetune, vseed);
    const auto u = evaluate_utility(*victim, tests.original);
    const auto a = evaluate_asr(*victim, transporter, carrier, mapping, tests.hijack, cfg.query_mode);
    const auto raw = evaluate_asr(*victim, transporter, carrier, mapping, tests.hijack, QueryMode::raw);
    report.seeds.push_back({vseed, u.overall, a.overall, raw.overall});
    log::info("victim seed " + std::to_string(s) + " utility " + std::to_string(u.overall) + " asr " +
              std::to_string(a.overall) + " asr_raw " + std::to_string(raw.overall));
    if (util_pc.empty()) util_pc.assign(u.per_class.size(), 0.0);
    if (asr_pc.empty()) asr_pc.assign(a.per_class.size(), 0.0);
    for (std::size_t c = 0; c < util_pc.size(); ++c) util_pc[c] += u.per_class[c] / n;
    for (std::size_t c = 0; c < asr_pc.size(); ++c) asr_pc[c] += a.per_class[c] / n;
    report.utility += u.overall / n;
    report.asr += a.overall / n;
    report.asr_raw += raw.overall / n;
    if (victims) victims->push_back(victim);
  }
  report.utility_per_class = util_pc;
  report.asr_per_class = asr_pc;
  report.extra["victim_arch"] = models::to_string(cfg.victim.arch.arch);
  report.extra["query_mode"] = to_string(cfg.query_mode);
  report.extra["victim_seeds"] = cfg.victim_seeds;
  return report;
}

}  // namespace osmosis::hijack
