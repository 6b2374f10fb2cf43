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

#include <filesystem>
#include <functional>
#include <cstring>
#include <random>
#include <string>

#include "osmosis/models/classifier.hpp"

namespace osmosis::testing {

/// Classifier whose logits are an arbitrary function of the input; the features are the logits.
class LambdaClassifier : public models::Classifier {
 public:
  LambdaClassifier(std::function<torch::Tensor(const torch::Tensor&)> fn, std::int64_t k)
      : fn_(std::move(fn)), k_(k) {}
  torch::Tensor features(const torch::Tensor& x) override { return fn_(x); }
  torch::Tensor head(const torch::Tensor& f) override { return f; }
  std::string head_prefix() const override { return "head."; }
  std::int64_t feature_dim() const override { return k_; }

 private:
  std::function<torch::Tensor(const torch::Tensor&)> fn_;
  std::int64_t k_;
};

inline std::shared_ptr<LambdaClassifier> uniform_classifier(std::int64_t k) {
  return std::make_shared<LambdaClassifier>([k](const torch::Tensor& x) { return torch::zeros({x.size(0), k}); }, k);
}

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("osmosis_test_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::filesystem::path fixture(const std::string& relative) {
  return std::filesystem::path(OSMOSIS_FIXTURE_DIR) / relative;
}

inline bool bit_equal(const torch::Tensor& a, const torch::Tensor& b) {
  if (a.sizes() != b.sizes()) return false;
  const auto x = a.contiguous().to(torch::kFloat32);
  const auto y = b.contiguous().to(torch::kFloat32);
  return std::memcmp(x.data_ptr(), y.data_ptr(), static_cast<std::size_t>(x.numel()) * sizeof(float)) == 0;
}

}  // namespace osmosis::testing
