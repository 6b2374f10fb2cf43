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

#include "osmosis/distiller/distill.hpp"

#include <cmath>
#include <numeric>

#include "osmosis/core/error.hpp"
#include "osmosis/core/log.hpp"
#include "osmosis/core/seed.hpp"

namespace osmosis::distill {

namespace {

torch::Tensor soft_cross_entropy(const torch::Tensor& logits, const torch::Tensor& targets) {
  return -(targets * torch::log_softmax(logits, 1)).sum(1).mean();
}

torch::Tensor labels_for(const LabelSource source, const ObserverModel& observer, const torch::Tensor& images,
                         const torch::Tensor& class_ids, std::int64_t num_classes) {
  if (source == LabelSource::observer) return soft_relabel(observer, images);
  return torch::one_hot(class_ids, num_classes).to(torch::kFloat32);
}

}  // namespace

std::string to_string(LabelSource s) { return s == LabelSource::observer ? "observer" : "hard"; }

LabelSource parse_label_source(const std::string& s) {
  if (s == "observer") return LabelSource::observer;
  if (s == "hard") return LabelSource::hard;
  throw ConfigError("unknown label source '" + s + "'");
}

std::string to_string(ScoreTarget s) { return s == ScoreTarget::original ? "original" : "hijack"; }

ScoreTarget parse_score_target(const std::string& s) {
  if (s == "original") return ScoreTarget::original;
  if (s == "hijack") return ScoreTarget::hijack;
  throw ConfigError("unknown score target '" + s + "'");
}

datasets::TrainingSet DistilledOsmosisSet::as_training_set() const {
  datasets::TrainingSet t;
  t.images = images;
  t.targets = soft_labels;
  t.is_real.assign(static_cast<std::size_t>(size()), false);
  return t;
}

std::vector<Patch> score_key_patches(const transport::OsmosisSet& osmosis, const ObserverModel& observer,
                                     const DistillConfig& cfg) {
  require(osmosis.size() > 0, "osmosis set is empty");
  const auto [rows, cols] = cfg.crop_grid;
  const auto grid = crop_grid(osmosis.x_c, rows, cols);
  const auto n = grid.size(0);
  const auto g = grid.size(1);
  const HumanObserverProxy human(osmosis.id_o, osmosis.y_o);
  std::vector<std::int64_t> human_labels;
  for (const auto id : osmosis.id_o) human_labels.push_back(human.label(id));
  const auto human_t = torch::tensor(human_labels, torch::kInt64).repeat_interleave(g);
  const auto& target = cfg.score_target == ScoreTarget::original ? osmosis.y_o : osmosis.y_h;
  const auto target_t = target.to(torch::kInt64).repeat_interleave(g);
  const auto flat = grid.reshape({n * g, grid.size(2), grid.size(3), grid.size(4)});
  const auto scores = realism_scores(observer, flat, human_t, target_t).contiguous();
  const auto* s = scores.data_ptr<double>();
  const auto y = osmosis.y_o.to(torch::kInt64).contiguous();
  const auto* yp = y.data_ptr<std::int64_t>();

  std::vector<Patch> keys;
  keys.reserve(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    std::vector<Patch> candidates;
    for (std::int64_t k = 0; k < g; ++k) {
      Patch p;
      p.pixels = grid[i][k];
      p.parent_id = osmosis.id_o[static_cast<std::size_t>(i)];
      p.grid_pos = {k / cols, k % cols};
      p.class_id = yp[i];
      p.score = s[i * g + k];
      candidates.push_back(std::move(p));
    }
    keys.push_back(select_key_patches(candidates, yp[i], 1).front());
  }
  return keys;
}

DistilledOsmosisSet initialize_mosaics(const transport::OsmosisSet& osmosis, const ObserverModel& observer,
                                       const DistillConfig& cfg) {
  require(cfg.ipc >= 1, "ipc must be >= 1");
  require(cfg.n_patches >= 1, "n_patches must be >= 1");
  const auto keys = score_key_patches(osmosis, observer, cfg);
  const auto k = osmosis.num_classes();
  const auto res = osmosis.x_c.size(2);
  DistilledOsmosisSet dod;
  std::vector<torch::Tensor> images;
  std::vector<std::int64_t> classes;
  for (std::int64_t c = 0; c < k; ++c) {
    const auto selected = select_key_patches(keys, c, cfg.ipc * cfg.n_patches);
    for (std::int64_t j = 0; j < cfg.ipc; ++j) {
      const std::vector<Patch> group(selected.begin() + j * cfg.n_patches, selected.begin() + (j + 1) * cfg.n_patches);
      auto mosaic = assemble_mosaic(group, res);
      images.push_back(mosaic.pixels);
      classes.push_back(c);
      std::vector<ProvenanceEntry> prov;
      for (const auto& [parent, pos] : mosaic.provenance) prov.push_back({parent, pos});
      dod.provenance.push_back(std::move(prov));
    }
  }
  dod.images = torch::stack(images);
  dod.class_ids = torch::tensor(classes, torch::kInt64);
  dod.ipc = cfg.ipc;
  dod.num_classes = k;
  dod.n_patches = cfg.n_patches;
  dod.mapping = osmosis.mapping;
  dod.soft_labels = labels_for(cfg.relabel, observer, dod.images, dod.class_ids, k);
  return dod;
}

DistillRun distill(const transport::OsmosisSet& osmosis, const std::vector<ExpertTrajectory>& buffer,
                   const ObserverModel& observer, const DistillConfig& cfg, std::uint64_t seed,
                   const IterationCallback& on_iteration) {
  require(!buffer.empty(), "trajectory buffer is empty");
  require(cfg.iterations >= 0, "distillation iterations must be >= 0");
  require(cfg.expert_span >= 1, "expert span must be >= 1");
  const auto& layout = buffer.front().layout;
  for (const auto& t : buffer) {
    require(t.param_count() == layout.numel(), "trajectory parameter count does not match its layout");
    require(t.num_snapshots() > cfg.expert_span, "trajectory has too few snapshots for the expert span");
    require(t.snapshot_interval == buffer.front().snapshot_interval, "trajectories disagree on snapshot interval");
  }
  require(layout.num_classes == osmosis.num_classes(), "surrogate class count does not match the osmosis set");

  DistillRun run;
  run.dod = initialize_mosaics(osmosis, observer, cfg);
  auto& dod = run.dod;
  const auto k = dod.num_classes;

  auto syn = dod.images.clone().requires_grad_(true);
  auto syn_lr = torch::full({}, cfg.syn_lr_init).requires_grad_(cfg.learn_syn_lr);
  const auto match_targets = labels_for(cfg.matching_labels, observer, dod.images, dod.class_ids, k);
  auto label_logits = torch::log(match_targets.clamp_min(1e-6)).requires_grad_(cfg.learn_labels);

  torch::optim::SGD opt_pixels(std::vector<torch::Tensor>{syn},
                               torch::optim::SGDOptions(cfg.lr_pixels).momentum(cfg.momentum));
  torch::optim::SGD opt_lr(std::vector<torch::Tensor>{syn_lr},
                           torch::optim::SGDOptions(cfg.lr_syn_lr).momentum(cfg.momentum));
  torch::optim::SGD opt_labels(std::vector<torch::Tensor>{label_logits},
                               torch::optim::SGDOptions(cfg.lr_labels).momentum(cfg.momentum));

  auto gen = make_generator(derive_seed(seed, "distill"));
  const auto g = cfg.expert_span;
  const auto inner = g * buffer.front().snapshot_interval;
  for (std::int64_t it = 0; it < cfg.iterations; ++it) {
    const auto& traj = buffer[static_cast<std::size_t>(
        torch::randint(static_cast<std::int64_t>(buffer.size()), {1}, gen).item<std::int64_t>())];
    const auto t = torch::randint(traj.num_snapshots() - g, {1}, gen).item<std::int64_t>();
    const auto start = traj.snapshots[t];
    const auto target = traj.snapshots[t + g];
    const auto targets = cfg.learn_labels ? torch::softmax(label_logits, 1) : match_targets;
    auto theta = start.clone().requires_grad_(true);
    for (std::int64_t s = 0; s < inner; ++s) {
      const auto loss = soft_cross_entropy(models::toy_cnn_forward(syn, theta, layout), targets);
      const auto grad = torch::autograd::grad({loss}, {theta}, {}, true, true)[0];
      theta = theta - syn_lr * grad;
    }
    const auto loss = trajectory_loss(theta, start, target);
    const auto value = loss.item<double>();
    if (!std::isfinite(value)) throw DivergenceError("distillation", it);
    opt_pixels.zero_grad();
    opt_lr.zero_grad();
    opt_labels.zero_grad();
    loss.backward();
    opt_pixels.step();
    if (cfg.learn_syn_lr) opt_lr.step();
    if (cfg.learn_labels) opt_labels.step();
    {
      torch::NoGradGuard guard;
      syn.clamp_(0.0, 1.0);
      syn_lr.clamp_min_(cfg.min_syn_lr);
    }
    run.losses.push_back(value);
    if (it % 10 == 0) {
      log::info("distill iteration " + std::to_string(it) + " loss " + std::to_string(value) + " syn_lr " +
                std::to_string(syn_lr.item<double>()));
    }
    if (on_iteration) on_iteration(it, value);
  }

  dod.images = syn.detach().clone();
  if (cfg.learn_labels) {
    dod.soft_labels = torch::softmax(label_logits.detach(), 1);
  } else {
    dod.soft_labels = labels_for(cfg.relabel, observer, dod.images, dod.class_ids, k);
  }
  run.syn_lr = syn_lr.item<double>();
  const auto tail = std::min<std::size_t>(10, run.losses.size());
  const double final_loss =
      tail == 0 ? 0.0 : std::accumulate(run.losses.end() - static_cast<std::ptrdiff_t>(tail), run.losses.end(), 0.0) / static_cast<double>(tail);
  dod.extra = {{"iterations", cfg.iterations}, {"final_trajectory_loss", final_loss}, {"syn_lr", run.syn_lr}};
  return run;
}

}  // namespace osmosis::distill
