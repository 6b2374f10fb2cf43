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

#include "osmosis/distiller/patches.hpp"

#include <cmath>
#include <queue>

#include "osmosis/core/error.hpp"
#include "osmosis/core/image.hpp"

namespace osmosis::distill {

std::vector<Patch> crop_patches(const torch::Tensor& image, std::int64_t rows, std::int64_t cols,
                                std::int64_t parent_id, std::int64_t class_id) {
  require(image.dim() == 3, "crop_patches expects a (C,H,W) image");
  require(rows >= 1 && cols >= 1, "crop grid must be positive");
  const auto h = image.size(1);
  const auto w = image.size(2);
  if (h % rows != 0 || w % cols != 0) {
    throw ConfigError("image " + std::to_string(h) + "x" + std::to_string(w) + " is not divisible by grid " +
                      std::to_string(rows) + "x" + std::to_string(cols));
  }
  const auto ph = h / rows;
  const auto pw = w / cols;
  std::vector<Patch> out;
  for (std::int64_t r = 0; r < rows; ++r) {
    for (std::int64_t c = 0; c < cols; ++c) {
      Patch p;
      p.pixels = image.narrow(1, r * ph, ph).narrow(2, c * pw, pw).clone();
      p.parent_id = parent_id;
      p.grid_pos = {r, c};
      p.class_id = class_id;
      out.push_back(std::move(p));
    }
  }
  return out;
}

torch::Tensor crop_grid(const torch::Tensor& images, std::int64_t rows, std::int64_t cols) {
  require(images.dim() == 4, "crop_grid expects (N,C,H,W)");
  const auto n = images.size(0);
  const auto c = images.size(1);
  const auto h = images.size(2);
  const auto w = images.size(3);
  require(rows >= 1 && cols >= 1 && h % rows == 0 && w % cols == 0, "image size not divisible by crop grid");
  const auto ph = h / rows;
  const auto pw = w / cols;
  return images.reshape({n, c, rows, ph, cols, pw}).permute({0, 2, 4, 1, 3, 5}).reshape({n, rows * cols, c, ph, pw});
}

torch::Tensor reassemble_patches(const std::vector<Patch>& patches, std::int64_t rows, std::int64_t cols) {
  require(static_cast<std::int64_t>(patches.size()) == rows * cols, "patch count does not match grid");
  std::vector<torch::Tensor> row_tensors;
  for (std::int64_t r = 0; r < rows; ++r) {
    std::vector<torch::Tensor> row;
    for (std::int64_t c = 0; c < cols; ++c) row.push_back(patches[static_cast<std::size_t>(r * cols + c)].pixels);
    row_tensors.push_back(torch::cat(row, 2));
  }
  return torch::cat(row_tensors, 1);
}

HumanObserverProxy::HumanObserverProxy(const std::vector<std::int64_t>& ids, const torch::Tensor& labels) {
  require(static_cast<std::int64_t>(ids.size()) == labels.size(0), "human proxy: ids and labels differ in length");
  const auto l = labels.to(torch::kInt64).contiguous();
  const auto* p = l.data_ptr<std::int64_t>();
  for (std::size_t i = 0; i < ids.size(); ++i) lookup_[ids[i]] = p[i];
}

std::int64_t HumanObserverProxy::label(std::int64_t sample_id) const {
  const auto it = lookup_.find(sample_id);
  if (it == lookup_.end()) throw ConfigError("human proxy has no label for sample " + std::to_string(sample_id));
  return it->second;
}

ObserverModel::ObserverModel(models::ClassifierPtr classifier, std::int64_t num_classes, std::int64_t resolution)
    : classifier_(std::move(classifier)), num_classes_(num_classes), resolution_(resolution) {
  require(classifier_ != nullptr, "observer needs a classifier");
  require(num_classes_ >= 2, "observer needs at least two classes");
}

torch::Tensor ObserverModel::logits(const torch::Tensor& images) const {
  auto x = images.dim() == 3 ? images.unsqueeze(0) : images;
  x = resize_bilinear(x, resolution_, resolution_);
  auto out = models::predict_logits(*classifier_, x);
  require(out.size(1) == num_classes_, "observer output width does not match its class count");
  require(torch::isfinite(out).all().item<bool>(), "observer produced non-finite logits");
  return out;
}

torch::Tensor ObserverModel::log_probabilities(const torch::Tensor& images) const {
  return torch::log_softmax(logits(images).to(torch::kFloat64), 1);
}

torch::Tensor realism_scores(const ObserverModel& observer, const torch::Tensor& patches,
                             const torch::Tensor& human_labels, const torch::Tensor& targets) {
  const auto k = observer.num_classes();
  const auto check = [k](const torch::Tensor& t, const char* what) {
    if (t.numel() > 0 && (t.min().item<std::int64_t>() < 0 || t.max().item<std::int64_t>() >= k)) {
      throw ConfigError(std::string("realism score: ") + what + " class index outside the observer label space");
    }
  };
  check(human_labels, "human");
  check(targets, "target");
  const auto lp = observer.log_probabilities(patches);
  return lp.gather(1, human_labels.view({-1, 1})).squeeze(1) + lp.gather(1, targets.view({-1, 1})).squeeze(1);
}

double realism_score(const ObserverModel& observer, const HumanObserverProxy& human, const Patch& patch,
                     std::int64_t y) {
  const auto h = torch::tensor({human.label(patch.parent_id)}, torch::kInt64);
  const auto t = torch::tensor({y}, torch::kInt64);
  return realism_scores(observer, patch.pixels.unsqueeze(0), h, t).item<double>();
}

bool ranks_before(const Patch& a, const Patch& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.parent_id != b.parent_id) return a.parent_id < b.parent_id;
  return a.grid_pos < b.grid_pos;
}

std::vector<Patch> select_key_patches(const std::vector<Patch>& scored, std::int64_t class_id, std::int64_t count) {
  require(count >= 1, "key patch count must be >= 1");
  // Bounded heap whose top is the worst patch kept so far.
  std::priority_queue<const Patch*, std::vector<const Patch*>, decltype([](const Patch* a, const Patch* b) {
                        return ranks_before(*a, *b);
                      })>
      heap;
  std::int64_t available = 0;
  for (const auto& p : scored) {
    if (p.class_id != class_id) continue;
    ++available;
    if (static_cast<std::int64_t>(heap.size()) < count) {
      heap.push(&p);
    } else if (ranks_before(p, *heap.top())) {
      heap.pop();
      heap.push(&p);
    }
  }
  if (available < count) {
    throw ConfigError("class " + std::to_string(class_id) + " has " + std::to_string(available) +
                      " scored patches, " + std::to_string(count) + " requested");
  }
  std::vector<Patch> out(static_cast<std::size_t>(count));
  for (auto i = count - 1; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = *heap.top();
    heap.pop();
  }
  return out;
}

Mosaic assemble_mosaic(const std::vector<Patch>& patches, std::int64_t target_resolution) {
  const auto n = static_cast<std::int64_t>(patches.size());
  const auto side = static_cast<std::int64_t>(std::llround(std::sqrt(static_cast<double>(n))));
  if (n == 0 || side * side != n) throw ConfigError("mosaic needs a perfect-square patch count, got " + std::to_string(n));
  require(target_resolution % side == 0, "mosaic resolution must be divisible by sqrt(N)");
  const auto cell = target_resolution / side;
  Mosaic m;
  std::vector<torch::Tensor> rows;
  for (std::int64_t r = 0; r < side; ++r) {
    std::vector<torch::Tensor> row;
    for (std::int64_t c = 0; c < side; ++c) {
      const auto& p = patches[static_cast<std::size_t>(r * side + c)];
      row.push_back(resize_bilinear(p.pixels, cell, cell));
      m.provenance.emplace_back(p.parent_id, p.grid_pos);
    }
    rows.push_back(torch::cat(row, 2));
  }
  m.pixels = torch::cat(rows, 1).contiguous();
  return m;
}

torch::Tensor soft_relabel(const ObserverModel& observer, const torch::Tensor& images, double temperature) {
  require(temperature > 0.0, "relabel temperature must be positive");
  return torch::softmax(observer.logits(images) / temperature, 1);
}

}  // namespace osmosis::distill
