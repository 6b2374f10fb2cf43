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

#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "osmosis/datasets/dataset.hpp"
#include "osmosis/datasets/label_mapping.hpp"
#include "osmosis/datasets/pairing.hpp"
#include "osmosis/hijack/victim.hpp"
#include "osmosis/models/classifier.hpp"
#include "osmosis/transporter/transporter.hpp"

namespace osmosis::hijack {

enum class QueryMode { transported, raw };

std::string to_string(QueryMode m);
QueryMode parse_query_mode(const std::string& s);

struct Accuracy {
  double overall = 0.0;
  std::vector<double> per_class;
  std::vector<std::int64_t> per_class_count;
};

/// Benign carrier for transported queries. "balanced_mean" averages the per-class mean images;
/// "class_mean:<k>" is the mean image of original class k.
torch::Tensor compute_carrier(const datasets::LabeledImages& originals, const std::string& policy);

/// Top-1 accuracy on an original-task test set.
Accuracy evaluate_utility(models::Classifier& victim, const datasets::LabeledImages& test);

/// Hijacking accuracy. Each query is T(carrier, x_h) or x_h; the predicted original class is
/// mapped forward and compared with y_h.
Accuracy evaluate_asr(models::Classifier& victim, transport::Transporter* transporter, const torch::Tensor& carrier,
                      const datasets::LabelMapping& mapping, const datasets::LabeledImages& hijack_test,
                      QueryMode mode);

/// Hijack queries as the victim sees them.
torch::Tensor make_queries(transport::Transporter* transporter, const torch::Tensor& carrier,
                           const torch::Tensor& hijack_images, QueryMode mode);

struct SeedResult {
  std::uint64_t seed = 0;
  double utility = 0.0;
  double asr = 0.0;
  double asr_raw = 0.0;
};

struct EvalReport {
  std::string fingerprint;
  double utility = 0.0;
  double asr = 0.0;
  double asr_raw = 0.0;
  std::vector<double> utility_per_class;
  std::vector<double> asr_per_class;
  std::vector<SeedResult> seeds;
  nlohmann::ordered_json extra = nlohmann::ordered_json::object();

  nlohmann::ordered_json to_json() const;
  static EvalReport from_json(const nlohmann::json& j);
};

struct HijackConfig {
  VictimSpec victim;
  FinetuneConfig finetune;
  std::int64_t victim_seeds = 1;
  QueryMode query_mode = QueryMode::transported;
};

struct TestSets {
  datasets::LabeledImages original;
  datasets::LabeledImages hijack;
};

/// Fine-tunes cfg.victim_seeds victims on `training` and averages utility and ASR. Trained victims
/// are appended to `victims` when given.
EvalReport run_hijack_experiment(const datasets::TrainingSet& training, transport::Transporter* transporter,
                                 const torch::Tensor& carrier, const datasets::LabelMapping& mapping,
                                 const TestSets& tests, const HijackConfig& cfg, std::uint64_t seed,
                                 const std::string& fingerprint,
                                 std::vector<models::ClassifierPtr>* victims = nullptr);

}  // namespace osmosis::hijack
