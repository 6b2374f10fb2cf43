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

#include "osmosis/distiller/trajectory.hpp"

#include <cmath>
#include <algorithm>
#include <cstdio>

#include "osmosis/core/error.hpp"
#include "osmosis/core/hash.hpp"
#include "osmosis/core/seed.hpp"
#include "osmosis/core/tensor_io.hpp"

namespace osmosis::distill {

namespace F = torch::nn::functional;

namespace {

Json layout_json(const models::ToyCnnLayout& l) {
  return {{"width", l.width}, {"depth", l.depth}, {"num_classes", l.num_classes},
          {"resolution", l.resolution}, {"channels", l.channels}};
}

models::ToyCnnLayout layout_from_json(const Json& j) {
  models::ToyCnnLayout l;
  l.width = j.at("width").get<std::int64_t>();
  l.depth = j.at("depth").get<std::int64_t>();
  l.num_classes = j.at("num_classes").get<std::int64_t>();
  l.resolution = j.at("resolution").get<std::int64_t>();
  l.channels = j.at("channels").get<std::int64_t>();
  return l;
}

std::string snapshot_name(std::int64_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "snapshot_%05lld.f32", static_cast<long long>(i));
  return buf;
}

}  // namespace

ExpertTrajectory record_expert_trajectory(const torch::Tensor& images, const torch::Tensor& labels,
                                          const std::string& surrogate_arch, const models::ToyCnnLayout& layout,
                                          const ExpertTrainConfig& cfg, std::uint64_t seed) {
  if (surrogate_arch != "toy_cnn") {
    throw ConfigError("surrogate architecture '" + surrogate_arch + "' has no functional form; use toy_cnn");
  }
  require(images.dim() == 4 && images.size(0) > 0, "expert training set is empty");
  require(cfg.snapshot_interval >= 1, "snapshot interval must be >= 1");
  require(cfg.batch_size >= 1, "expert batch size must be >= 1");
  const auto n = images.size(0);
  const auto per_epoch = std::max<std::int64_t>(1, n / cfg.batch_size);
  const auto bs = std::min(cfg.batch_size, n);
  const auto total = cfg.steps >= 0 ? cfg.steps : cfg.epochs * per_epoch;

  auto gen = make_generator(derive_seed(seed, "expert.init"));
  auto theta = models::init_toy_cnn_params(layout, gen);
  std::vector<torch::Tensor> snaps{theta.clone()};
  const auto y = labels.to(torch::kInt64);
  std::vector<std::int64_t> order;
  for (std::int64_t step = 0; step < total; ++step) {
    const auto pos = step % per_epoch;
    if (pos == 0) order = seeded_permutation(n, derive_seed(seed, "expert.epoch." + std::to_string(step / per_epoch)));
    const auto idx = torch::from_blob(order.data() + pos * bs, {bs}, torch::kInt64).clone();
    auto th = theta.detach().requires_grad_(true);
    const auto loss = F::cross_entropy(models::toy_cnn_forward(images.index_select(0, idx), th, layout),
                                       y.index_select(0, idx));
    if (!std::isfinite(loss.item<double>())) throw DivergenceError("expert trajectory", step);
    const auto grad = torch::autograd::grad({loss}, {th})[0];
    theta = (th - cfg.lr * grad).detach();
    if ((step + 1) % cfg.snapshot_interval == 0) snaps.push_back(theta.clone());
  }
  ExpertTrajectory out;
  out.snapshots = torch::stack(snaps);
  out.snapshot_interval = cfg.snapshot_interval;
  out.arch_id = surrogate_arch;
  out.layout = layout;
  out.seed = seed;
  return out;
}

torch::Tensor trajectory_loss(const torch::Tensor& theta_hat, const torch::Tensor& theta_start,
                              const torch::Tensor& theta_target) {
  require(theta_hat.sizes() == theta_start.sizes() && theta_start.sizes() == theta_target.sizes(),
          "trajectory_loss: parameter vectors differ in shape");
  const auto denom = (theta_start - theta_target).pow(2).sum();
  if (denom.item<double>() == 0.0) throw ConfigError("degenerate expert segment: start equals target");
  return (theta_hat - theta_target).pow(2).sum() / denom;
}

void save_trajectory(const fs::path& dir, const ExpertTrajectory& t) {
  require(t.num_snapshots() >= 1, "trajectory has no snapshots");
  StagingDir staging(dir);
  Json files = Json::array();
  for (std::int64_t i = 0; i < t.num_snapshots(); ++i) {
    const auto name = snapshot_name(i);
    const auto sha = write_f32(staging.path() / name, t.snapshots[i]);
    files.push_back({{"file", name}, {"sha256", sha}});
  }
  write_json(staging.path() / "meta.json", {{"kind", "trajectory"},
                                            {"arch_id", t.arch_id},
                                            {"seed", t.seed},
                                            {"interval", t.snapshot_interval},
                                            {"snapshot_count", t.num_snapshots()},
                                            {"param_count", t.param_count()},
                                            {"layout", layout_json(t.layout)},
                                            {"snapshots", files}});
  staging.commit();
}

ExpertTrajectory load_trajectory(const fs::path& dir) {
  if (!fs::exists(dir / "meta.json")) throw ArtifactError("missing trajectory " + dir.string(), "meta.json");
  const auto meta = read_json(dir / "meta.json");
  ExpertTrajectory t;
  try {
    t.arch_id = meta.at("arch_id").get<std::string>();
    t.seed = meta.at("seed").get<std::uint64_t>();
    t.snapshot_interval = meta.at("interval").get<std::int64_t>();
    t.layout = layout_from_json(meta.at("layout"));
  } catch (const nlohmann::json::exception& e) {
    throw ArtifactError(std::string("malformed trajectory meta: ") + e.what(), "meta.json");
  }
  const auto count = meta.at("snapshot_count").get<std::int64_t>();
  const auto params = meta.at("param_count").get<std::int64_t>();
  const auto& files = meta.at("snapshots");
  if (static_cast<std::int64_t>(files.size()) != count) throw ArtifactError("snapshot list size mismatch", "snapshots");
  std::vector<torch::Tensor> snaps;
  for (const auto& f : files) {
    const auto path = dir / f.at("file").get<std::string>();
    if (sha256_file(path) != f.at("sha256").get<std::string>()) {
      throw ArtifactError("hash mismatch in " + path.string(), f.at("file").get<std::string>());
    }
    snaps.push_back(read_f32(path, {params}));
  }
  t.snapshots = torch::stack(snaps);
  return t;
}

void save_trajectory_buffer(const fs::path& dir, const std::vector<ExpertTrajectory>& buffer) {
  fs::create_directories(dir);
  for (std::size_t i = 0; i < buffer.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "expert_%03zu", i);
    save_trajectory(dir / name, buffer[i]);
  }
}

std::vector<ExpertTrajectory> load_trajectory_buffer(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw ArtifactError("missing trajectory buffer " + dir.string(), "trajectories");
  std::vector<fs::path> entries;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_directory() && e.path().filename().string().starts_with("expert_")) entries.push_back(e.path());
  }
  std::sort(entries.begin(), entries.end());
  if (entries.empty()) throw ArtifactError("trajectory buffer is empty: " + dir.string(), "trajectories");
  std::vector<ExpertTrajectory> out;
  for (const auto& e : entries) out.push_back(load_trajectory(e));
  return out;
}

}  // namespace osmosis::distill
