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

#include "osmosis/datasets/dataset.hpp"

#include <zlib.h>

#include <algorithm>
#include <fstream>
#include <map>
#include <set>

#include "osmosis/core/error.hpp"
#include "osmosis/core/hash.hpp"
#include "osmosis/core/image.hpp"
#include "osmosis/core/log.hpp"
#include "osmosis/core/seed.hpp"
#include "osmosis/core/tensor_io.hpp"

namespace osmosis::datasets {

namespace {

FetchHook& fetch_hook() {
  static FetchHook hook;
  return hook;
}

std::string data_dir() { return OSMOSIS_DATA_DIR; }

std::pair<std::string, fs::path> parse_uri(const std::string& uri) {
  const auto colon = uri.find(':');
  if (colon == std::string::npos) throw ConfigError("dataset source_uri needs a scheme: '" + uri + "'");
  const auto scheme = uri.substr(0, colon);
  if (scheme != "idx" && scheme != "cache") throw ConfigError("unknown dataset scheme '" + scheme + "'");
  return {scheme, fs::path(uri.substr(colon + 1))};
}

std::uint32_t be32(const unsigned char* p) {
  return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) | p[3];
}

std::vector<unsigned char> read_maybe_gz(const fs::path& path) {
  gzFile f = gzopen(path.c_str(), "rb");
  if (!f) throw ArtifactError("cannot open " + path.string(), path.filename().string());
  std::vector<unsigned char> out;
  std::array<unsigned char, 1 << 16> buf{};
  int n = 0;
  while ((n = gzread(f, buf.data(), static_cast<unsigned>(buf.size()))) > 0) out.insert(out.end(), buf.begin(), buf.begin() + n);
  const bool failed = n < 0;
  gzclose(f);
  if (failed) throw ArtifactError("corrupt gzip stream " + path.string(), path.filename().string());
  return out;
}

fs::path idx_file(const fs::path& dir, const std::string& stem) {
  for (const auto& candidate : {dir / (stem + ".gz"), dir / stem}) {
    if (fs::exists(candidate)) return candidate;
  }
  throw ArtifactError("missing IDX file " + (dir / stem).string(), stem);
}

struct RawRecord {
  std::int64_t id;
  std::int64_t raw_label;
};

struct RawSource {
  std::vector<RawRecord> records;
  std::function<torch::Tensor(std::int64_t id)> decode;
  std::int64_t skipped = 0;
};

RawSource open_idx(const fs::path& dir, Split split) {
  const std::string prefix = split == Split::train ? "train" : "t10k";
  auto images = std::make_shared<std::vector<unsigned char>>(read_maybe_gz(idx_file(dir, prefix + "-images-idx3-ubyte")));
  const auto labels = read_maybe_gz(idx_file(dir, prefix + "-labels-idx1-ubyte"));
  if (images->size() < 16 || be32(images->data()) != 0x803) throw ArtifactError("bad IDX image header in " + dir.string(), "magic");
  if (labels.size() < 8 || be32(labels.data()) != 0x801) throw ArtifactError("bad IDX label header in " + dir.string(), "magic");
  const std::int64_t declared = be32(images->data() + 4);
  const std::int64_t rows = be32(images->data() + 8);
  const std::int64_t cols = be32(images->data() + 12);
  const std::int64_t per = rows * cols;
  const std::int64_t have_images = (static_cast<std::int64_t>(images->size()) - 16) / per;
  const std::int64_t have_labels = static_cast<std::int64_t>(labels.size()) - 8;
  const std::int64_t usable = std::min({declared, have_images, have_labels, static_cast<std::int64_t>(be32(labels.data() + 4))});
  RawSource src;
  src.skipped = declared - usable;
  for (std::int64_t i = 0; i < usable; ++i) src.records.push_back({i, labels[static_cast<std::size_t>(8 + i)]});
  src.decode = [images, rows, cols, per](std::int64_t id) {
    auto t = torch::from_blob(images->data() + 16 + id * per, {1, rows, cols}, torch::kUInt8);
    return t.to(torch::kFloat32).div_(255.0);
  };
  return src;
}

RawSource open_cache(const fs::path& dir) {
  const auto manifest = read_json(dir / "manifest.json");
  RawSource src;
  std::int64_t id = 0;
  for (const auto& rec : manifest.at("records")) {
    src.records.push_back({id++, rec.at("label").get<std::int64_t>()});
  }
  auto files = std::make_shared<std::vector<fs::path>>();
  for (const auto& rec : manifest.at("records")) files->push_back(dir / rec.at("file").get<std::string>());
  src.decode = [files](std::int64_t i) { return read_png((*files)[static_cast<std::size_t>(i)]); };
  return src;
}

}  // namespace

std::string to_string(Role role) { return role == Role::original ? "original" : "hijacking"; }
std::string to_string(Split split) { return split == Split::train ? "train" : "test"; }

std::vector<std::int64_t> DatasetSpec::class_ids() const {
  if (!classes.empty()) return classes;
  std::vector<std::int64_t> ids(static_cast<std::size_t>(num_classes));
  for (std::int64_t i = 0; i < num_classes; ++i) ids[static_cast<std::size_t>(i)] = i;
  return ids;
}

void DatasetSpec::validate() const {
  require(num_classes >= 2, "dataset '" + name + "': num_classes must be >= 2");
  require(resolution[2] == 1 || resolution[2] == 3, "dataset '" + name + "': channels must be 1 or 3");
  require(resolution[0] > 0 && resolution[1] > 0, "dataset '" + name + "': resolution must be positive");
  require(split_sizes[0] >= 0 && split_sizes[1] >= 0, "dataset '" + name + "': split sizes must be >= 0");
  require(classes.empty() || static_cast<std::int64_t>(classes.size()) == num_classes,
          "dataset '" + name + "': classes list does not match num_classes");
  const std::set<std::int64_t> unique(classes.begin(), classes.end());
  require(unique.size() == classes.size(), "dataset '" + name + "': duplicate class ids");
}

LabeledImages LabeledImages::select(const torch::Tensor& index) const {
  LabeledImages out;
  out.images = images.index_select(0, index);
  out.labels = labels.index_select(0, index);
  const auto acc = index.accessor<std::int64_t, 1>();
  for (std::int64_t i = 0; i < index.size(0); ++i) out.ids.push_back(ids[static_cast<std::size_t>(acc[i])]);
  return out;
}

LabeledImages LabeledImages::of_class(std::int64_t label) const {
  return select(torch::nonzero(labels == label).flatten());
}

DatasetSpec dataset_spec(const std::string& name) {
  const auto root = data_dir();
  DatasetSpec s;
  s.name = name;
  if (name == "mnist5k") {
    s.resolution = {32, 32, 1};
    s.split_sizes = {4000, 1000};
    s.source_uri = "idx:" + root + "/mnist5k";
  } else if (name == "mnist") {
    s.resolution = {32, 32, 1};
    s.split_sizes = {60000, 10000};
    s.source_uri = "idx:" + root + "/mnist";
  } else if (name == "svhn") {
    s.resolution = {32, 32, 3};
    s.split_sizes = {73257, 26032};
    s.source_uri = "cache:" + root;
  } else if (name == "cifar10") {
    s.resolution = {32, 32, 3};
    s.split_sizes = {50000, 10000};
    s.source_uri = "cache:" + root;
  } else if (name == "cifar100") {
    s.num_classes = 100;
    s.resolution = {32, 32, 3};
    s.split_sizes = {50000, 10000};
    s.source_uri = "cache:" + root;
  } else if (name == "tiny_imagenet") {
    s.num_classes = 200;
    s.resolution = {64, 64, 3};
    s.split_sizes = {100000, 10000};
    s.source_uri = "cache:" + root;
  } else {
    throw ConfigError("unknown dataset '" + name + "'");
  }
  return s;
}

std::vector<std::string> registered_datasets() {
  return {"mnist5k", "mnist", "svhn", "cifar10", "cifar100", "tiny_imagenet"};
}

DatasetSpec with_classes(DatasetSpec spec, std::vector<std::int64_t> classes, Role role) {
  spec.num_classes = static_cast<std::int64_t>(classes.size());
  spec.classes = std::move(classes);
  spec.role = role;
  if (!spec.class_names.empty()) {
    std::vector<std::string> names;
    for (auto c : spec.classes) names.push_back(spec.class_names.at(static_cast<std::size_t>(c)));
    spec.class_names = std::move(names);
  }
  spec.validate();
  return spec;
}

void set_fetch_hook(FetchHook hook) { fetch_hook() = std::move(hook); }

LabeledImages load_dataset(const DatasetSpec& spec, Split split, std::uint64_t seed) {
  spec.validate();
  const auto h = spec.resolution[0];
  const auto w = spec.resolution[1];
  const auto limit = spec.split_sizes[split == Split::train ? 0 : 1];
  LabeledImages out;
  if (limit == 0) {
    out.images = torch::empty({0, 3, h, w});
    out.labels = torch::empty({0}, torch::kInt64);
    return out;
  }
  auto [scheme, base] = parse_uri(spec.source_uri);
  fs::path dir = scheme == "idx" ? base : base / spec.name / to_string(split);
  if (!fs::exists(dir)) {
    if (!fetch_hook()) throw ArtifactError("dataset source missing: " + dir.string(), spec.name);
    dir = fetch_hook()(spec, split);
    if (!fs::exists(dir)) throw ArtifactError("fetch hook did not provide " + dir.string(), spec.name);
  }
  RawSource src = scheme == "idx" ? open_idx(dir, split) : open_cache(dir);

  std::map<std::int64_t, std::int64_t> task_label;
  const auto ids = spec.class_ids();
  for (std::size_t i = 0; i < ids.size(); ++i) task_label[ids[i]] = static_cast<std::int64_t>(i);
  std::vector<RawRecord> kept;
  for (const auto& r : src.records) {
    if (task_label.count(r.raw_label)) kept.push_back(r);
  }

  const auto order = seeded_permutation(static_cast<std::int64_t>(kept.size()), seed);
  std::vector<torch::Tensor> images;
  std::vector<std::int64_t> labels;
  out.skipped = src.skipped;
  for (const auto pos : order) {
    if (static_cast<std::int64_t>(images.size()) >= limit) break;
    const auto& r = kept[static_cast<std::size_t>(pos)];
    torch::Tensor img;
    try {
      img = src.decode(r.id);
    } catch (const ArtifactError& e) {
      ++out.skipped;
      log::debug(e.what());
      continue;
    }
    if (img.dim() != 3 || !torch::isfinite(img).all().item<bool>()) {
      ++out.skipped;
      continue;
    }
    images.push_back(resize_bilinear(to_three_channels(img), h, w).clamp(0.0, 1.0));
    labels.push_back(task_label[r.raw_label]);
    out.ids.push_back(r.id);
  }
  if (out.skipped > 0) {
    log::warn("dataset " + spec.name + "/" + to_string(split) + ": skipped " + std::to_string(out.skipped) +
              " corrupt records");
  }
  out.images = images.empty() ? torch::empty({0, 3, h, w}) : torch::stack(images);
  out.labels = torch::tensor(labels, torch::kInt64);
  return out;
}

void write_cache_split(const fs::path& root, const DatasetSpec& spec, Split split,
                       const std::vector<std::pair<torch::Tensor, std::int64_t>>& samples) {
  const auto dir = root / spec.name / to_string(split);
  fs::create_directories(dir);
  Json records = Json::array();
  Sha256 content;
  std::set<std::int64_t> classes;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "%08zu.png", i);
    write_png(dir / name, samples[i].first);
    content.update(std::string_view(name));
    content.update(sha256_file(dir / name));
    records.push_back({{"file", name}, {"label", samples[i].second}});
    classes.insert(samples[i].second);
  }
  Json manifest = {{"name", spec.name},
                   {"split", to_string(split)},
                   {"classes", std::vector<std::int64_t>(classes.begin(), classes.end())},
                   {"resolution", spec.resolution},
                   {"counts", samples.size()},
                   {"content_hash", content.hex()},
                   {"records", records}};
  write_json(dir / "manifest.json", manifest);
}

std::vector<std::string> read_class_index(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ArtifactError("cannot open class index " + path.string(), path.filename().string());
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    const auto end = line.find_first_of(" \t\r");
    if (end != std::string::npos) line.resize(end);
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

std::pair<DatasetSpec, DatasetSpec> build_imagenet_subset(const std::vector<std::string>& index, std::uint64_t seed,
                                                          std::int64_t classes_total, std::int64_t resolution) {
  require(classes_total >= 4 && classes_total % 2 == 0, "classes_total must be an even number >= 4");
  const std::set<std::string> unique(index.begin(), index.end());
  require(unique.size() == index.size(), "class index has duplicate entries");
  if (static_cast<std::int64_t>(index.size()) < classes_total) {
    throw ConfigError("class index has " + std::to_string(index.size()) + " classes, need " +
                      std::to_string(classes_total));
  }
  const auto perm = seeded_permutation(static_cast<std::int64_t>(index.size()), seed);
  DatasetSpec base;
  base.name = "imagenet";
  base.resolution = {resolution, resolution, 3};
  base.source_uri = "cache:" + data_dir();
  base.class_names = index;
  const auto half = classes_total / 2;
  std::vector<std::int64_t> a(perm.begin(), perm.begin() + half);
  std::vector<std::int64_t> b(perm.begin() + half, perm.begin() + classes_total);
  base.split_sizes = {half * 1300, half * 50};
  return {with_classes(base, a, Role::original), with_classes(base, b, Role::hijacking)};
}

}  // namespace osmosis::datasets
