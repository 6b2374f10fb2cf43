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
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace osmosis {

namespace fs = std::filesystem;
using Json = nlohmann::json;

using NamedTensors = std::vector<std::pair<std::string, torch::Tensor>>;

/// Writes a tensor as raw little-endian float32 and returns its SHA-256.
std::string write_f32(const fs::path& path, const torch::Tensor& tensor);

/// Reads a raw float32 file; the element count must match `shape`.
torch::Tensor read_f32(const fs::path& path, const std::vector<std::int64_t>& shape);

Json read_json(const fs::path& path);
void write_json(const fs::path& path, const Json& value);

/// A directory populated under a temporary name and renamed into place on commit().
/// Uncommitted staging directories are removed on destruction.
class StagingDir {
 public:
  explicit StagingDir(fs::path target);
  ~StagingDir();
  StagingDir(const StagingDir&) = delete;
  StagingDir& operator=(const StagingDir&) = delete;

  const fs::path& path() const noexcept { return staging_; }
  void commit();

 private:
  fs::path target_;
  fs::path staging_;
  bool committed_ = false;
};

/// Tensor directory: config.json, index.json and one float32 file per tensor.
/// index.json maps each name to its file, shape, byte offset, size and SHA-256.
void save_tensor_dir(const fs::path& dir, const NamedTensors& tensors, const Json& config);

struct TensorDir {
  Json config;
  NamedTensors tensors;

  const torch::Tensor& at(const std::string& name) const;
};

/// Loads and verifies every tensor hash; a mismatch raises ArtifactError naming the tensor.
TensorDir load_tensor_dir(const fs::path& dir);

/// Parameters followed by buffers, in registration order.
NamedTensors module_state(const torch::nn::Module& module);

void save_module(const fs::path& dir, const torch::nn::Module& module, const Json& config);

/// Copies tensors from `dir` into `module`. Names listed in `skip_prefixes` are left untouched;
/// every other module tensor must be present with a matching shape.
Json load_module(const fs::path& dir, torch::nn::Module& module,
                 const std::vector<std::string>& skip_prefixes = {});

/// Copies all parameters and buffers of `src` into `dst` (identical architectures).
void copy_module_state(const torch::nn::Module& src, torch::nn::Module& dst);

}  // namespace osmosis
