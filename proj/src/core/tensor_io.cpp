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

#include "osmosis/core/tensor_io.hpp"

#include <unistd.h>

#include <atomic>
#include <bit>
#include <fstream>

#include "osmosis/core/error.hpp"
#include "osmosis/core/hash.hpp"

static_assert(std::endian::native == std::endian::little,
              "tensor files are little-endian float32; big-endian hosts need byte swapping");

namespace osmosis {

namespace {

torch::Tensor as_contiguous_f32(const torch::Tensor& t) {
  return t.detach().to(torch::kCPU, torch::kFloat32).contiguous();
}

std::int64_t numel_of(const std::vector<std::int64_t>& shape) {
  std::int64_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

}  // namespace

std::string write_f32(const fs::path& path, const torch::Tensor& tensor) {
  const auto t = as_contiguous_f32(tensor);
  const auto bytes = std::as_bytes(std::span(t.data_ptr<float>(), static_cast<std::size_t>(t.numel())));
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ArtifactError("cannot write " + path.string(), path.filename().string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ArtifactError("short write to " + path.string(), path.filename().string());
  return sha256_hex(bytes);
}

torch::Tensor read_f32(const fs::path& path, const std::vector<std::int64_t>& shape) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw ArtifactError("missing tensor file " + path.string(), path.filename().string());
  const auto size = static_cast<std::int64_t>(in.tellg());
  const auto n = numel_of(shape);
  if (size != n * static_cast<std::int64_t>(sizeof(float))) {
    throw ArtifactError("tensor file " + path.string() + " has " + std::to_string(size) +
                            " bytes, expected " + std::to_string(n * 4),
                        path.filename().string());
  }
  auto t = torch::empty(shape, torch::kFloat32);
  in.seekg(0);
  in.read(reinterpret_cast<char*>(t.data_ptr<float>()), size);
  return t;
}

Json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ArtifactError("missing " + path.string(), path.filename().string());
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw ArtifactError("malformed JSON in " + path.string() + ": " + e.what(),
                        path.filename().string());
  }
}

void write_json(const fs::path& path, const Json& value) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ArtifactError("cannot write " + path.string(), path.filename().string());
  out << value.dump(2) << '\n';
}

StagingDir::StagingDir(fs::path target) : target_(std::move(target)) {
  static std::atomic<unsigned> counter{0};
  const auto parent = target_.has_parent_path() ? target_.parent_path() : fs::path(".");
  fs::create_directories(parent);
  staging_ = parent / (target_.filename().string() + ".tmp." + std::to_string(::getpid()) + "." +
                       std::to_string(counter++));
  fs::remove_all(staging_);
  fs::create_directories(staging_);
}

StagingDir::~StagingDir() {
  if (!committed_) {
    std::error_code ec;
    fs::remove_all(staging_, ec);
  }
}

void StagingDir::commit() {
  std::error_code ec;
  fs::remove_all(target_, ec);
  fs::rename(staging_, target_);
  committed_ = true;
}

void save_tensor_dir(const fs::path& dir, const NamedTensors& tensors, const Json& config) {
  StagingDir staging(dir);
  Json index = Json::object();
  index["format"] = "f32-le";
  index["tensors"] = Json::array();
  for (const auto& [name, tensor] : tensors) {
    const auto file = name + ".f32";
    const auto sha = write_f32(staging.path() / file, tensor);
    index["tensors"].push_back({{"name", name},
                                {"file", file},
                                {"shape", tensor.sizes().vec()},
                                {"offset", 0},
                                {"nbytes", tensor.numel() * 4},
                                {"sha256", sha}});
  }
  write_json(staging.path() / "index.json", index);
  write_json(staging.path() / "config.json", config);
  staging.commit();
}

const torch::Tensor& TensorDir::at(const std::string& name) const {
  for (const auto& [n, t] : tensors) {
    if (n == name) return t;
  }
  throw ArtifactError("tensor '" + name + "' not present", name);
}

TensorDir load_tensor_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw ArtifactError("missing tensor directory " + dir.string(), "index.json");
  TensorDir out;
  out.config = read_json(dir / "config.json");
  const auto index = read_json(dir / "index.json");
  if (!index.contains("tensors") || !index["tensors"].is_array()) {
    throw ArtifactError("index.json lacks a tensors array", "tensors");
  }
  for (const auto& rec : index["tensors"]) {
    const auto name = rec.at("name").get<std::string>();
    const auto path = dir / rec.at("file").get<std::string>();
    if (rec.value("offset", 0) != 0) throw ArtifactError("unsupported nonzero offset for " + name, name);
    auto t = read_f32(path, rec.at("shape").get<std::vector<std::int64_t>>());
    const auto bytes = std::as_bytes(std::span(t.data_ptr<float>(), static_cast<std::size_t>(t.numel())));
    if (sha256_hex(bytes) != rec.at("sha256").get<std::string>()) {
      throw ArtifactError("content hash mismatch for tensor '" + name + "'", name);
    }
    out.tensors.emplace_back(name, std::move(t));
  }
  return out;
}

NamedTensors module_state(const torch::nn::Module& module) {
  NamedTensors out;
  for (const auto& p : module.named_parameters(true)) out.emplace_back(p.key(), p.value());
  for (const auto& b : module.named_buffers(true)) out.emplace_back(b.key(), b.value());
  return out;
}

void save_module(const fs::path& dir, const torch::nn::Module& module, const Json& config) {
  save_tensor_dir(dir, module_state(module), config);
}

Json load_module(const fs::path& dir, torch::nn::Module& module,
                 const std::vector<std::string>& skip_prefixes) {
  auto loaded = load_tensor_dir(dir);
  auto skipped = [&](const std::string& name) {
    for (const auto& p : skip_prefixes) {
      if (name.rfind(p, 0) == 0) return true;
    }
    return false;
  };
  torch::NoGradGuard no_grad;
  for (auto& [name, dst] : module_state(module)) {
    if (skipped(name)) continue;
    const auto& src = loaded.at(name);
    if (src.sizes() != dst.sizes()) {
      throw ArtifactError("shape mismatch for '" + name + "'", name);
    }
    dst.copy_(src.to(dst.dtype()));
  }
  return loaded.config;
}

void copy_module_state(const torch::nn::Module& src, torch::nn::Module& dst) {
  auto from = module_state(src);
  auto to = module_state(dst);
  require(from.size() == to.size(), "copy_module_state: architectures differ");
  torch::NoGradGuard no_grad;
  for (std::size_t i = 0; i < from.size(); ++i) {
    require(from[i].first == to[i].first && from[i].second.sizes() == to[i].second.sizes(),
            "copy_module_state: tensor '" + from[i].first + "' differs");
    to[i].second.copy_(from[i].second);
  }
}

}  // namespace osmosis
