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

#include "zoo.hpp"

#include <array>
#include <tuple>

namespace osmosis::models::zoo {

namespace nn = torch::nn;
namespace F = torch::nn::functional;
using torch::Tensor;

namespace {

nn::Conv2d conv(std::int64_t in, std::int64_t out, std::int64_t k, std::int64_t stride = 1,
                std::int64_t groups = 1, bool bias = false) {
  return nn::Conv2d(nn::Conv2dOptions(in, out, k).stride(stride).padding(k / 2).groups(groups).bias(bias));
}

nn::BatchNorm2d bn(std::int64_t c) { return nn::BatchNorm2d(c); }

std::int64_t make_divisible(double v, std::int64_t divisor = 8) {
  auto n = std::max<std::int64_t>(divisor, static_cast<std::int64_t>(v + divisor / 2.0) / divisor * divisor);
  if (static_cast<double>(n) < 0.9 * v) n += divisor;
  return n;
}

struct StackImpl : nn::SequentialImpl {
  Tensor forward(const Tensor& x) { return nn::SequentialImpl::forward(x); }
};
TORCH_MODULE(Stack);

Tensor global_pool(const Tensor& x) { return F::adaptive_avg_pool2d(x, F::AdaptiveAvgPool2dFuncOptions(1)).flatten(1); }

// ---------------------------------------------------------------- toy_resnet

struct ResidualUnitImpl : nn::Module {
  nn::Conv2d conv1{nullptr}, conv2{nullptr}, shortcut{nullptr};
  nn::BatchNorm2d bn1{nullptr}, bn2{nullptr};

  ResidualUnitImpl(std::int64_t in, std::int64_t out, std::int64_t stride) {
    conv1 = register_module("conv1", conv(in, out, 3, stride));
    bn1 = register_module("bn1", bn(out));
    conv2 = register_module("conv2", conv(out, out, 3));
    bn2 = register_module("bn2", bn(out));
    if (stride != 1 || in != out) shortcut = register_module("shortcut", conv(in, out, 1, stride));
  }

  Tensor forward(const Tensor& x) {
    auto h = torch::relu(bn1(conv1(x)));
    h = bn2(conv2(h));
    return torch::relu(h + (shortcut ? shortcut(x) : x));
  }
};
TORCH_MODULE(ResidualUnit);

class ToyResNet : public Classifier {
 public:
  explicit ToyResNet(const ArchSpec& s) : width_(s.width) {
    stem_ = register_module("stem", conv(3, width_, 3));
    stem_bn_ = register_module("stem_bn", bn(width_));
    blocks_ = register_module("blocks", nn::Sequential(ResidualUnit(width_, width_, 1),
                                                       ResidualUnit(width_, 2 * width_, 2),
                                                       ResidualUnit(2 * width_, 4 * width_, 2)));
    fc_ = register_module("fc", nn::Linear(4 * width_, s.num_classes));
  }
  Tensor features(const Tensor& x) override {
    return global_pool(blocks_->forward(torch::relu(stem_bn_(stem_(x)))));
  }
  Tensor head(const Tensor& f) override { return fc_(f); }
  std::string head_prefix() const override { return "fc."; }
  std::int64_t feature_dim() const override { return 4 * width_; }

 private:
  std::int64_t width_;
  nn::Conv2d stem_{nullptr};
  nn::BatchNorm2d stem_bn_{nullptr};
  nn::Sequential blocks_{nullptr};
  nn::Linear fc_{nullptr};
};

// ---------------------------------------------------------------- resnet18

struct BasicBlockImpl : nn::Module {
  nn::Conv2d conv1{nullptr}, conv2{nullptr};
  nn::BatchNorm2d bn1{nullptr}, bn2{nullptr};
  nn::Sequential downsample{nullptr};

  BasicBlockImpl(std::int64_t in, std::int64_t out, std::int64_t stride) {
    conv1 = register_module("conv1", conv(in, out, 3, stride));
    bn1 = register_module("bn1", bn(out));
    conv2 = register_module("conv2", conv(out, out, 3));
    bn2 = register_module("bn2", bn(out));
    if (stride != 1 || in != out) {
      downsample = register_module("downsample", nn::Sequential(conv(in, out, 1, stride), bn(out)));
    }
  }

  Tensor forward(const Tensor& x) {
    auto h = torch::relu(bn1(conv1(x)));
    h = bn2(conv2(h));
    return torch::relu(h + (downsample ? downsample->forward(x) : x));
  }
};
TORCH_MODULE(BasicBlock);

class ResNet18 : public Classifier {
 public:
  explicit ResNet18(const ArchSpec& s) : small_(s.resolution <= 64) {
    conv1_ = register_module("conv1", small_ ? conv(3, 64, 3) : conv(3, 64, 7, 2));
    bn1_ = register_module("bn1", bn(64));
    const std::array<std::int64_t, 4> widths{64, 128, 256, 512};
    std::int64_t in = 64;
    for (std::size_t i = 0; i < widths.size(); ++i) {
      const std::int64_t stride = i == 0 ? 1 : 2;
      layers_[i] = register_module("layer" + std::to_string(i + 1),
                                   nn::Sequential(BasicBlock(in, widths[i], stride), BasicBlock(widths[i], widths[i], 1)));
      in = widths[i];
    }
    fc_ = register_module("fc", nn::Linear(512, s.num_classes));
  }
  Tensor features(const Tensor& x) override {
    auto h = torch::relu(bn1_(conv1_(x)));
    if (!small_) h = F::max_pool2d(h, F::MaxPool2dFuncOptions(3).stride(2).padding(1));
    for (auto& l : layers_) h = l->forward(h);
    return global_pool(h);
  }
  Tensor head(const Tensor& f) override { return fc_(f); }
  std::string head_prefix() const override { return "fc."; }
  std::int64_t feature_dim() const override { return 512; }

 private:
  bool small_;
  nn::Conv2d conv1_{nullptr};
  nn::BatchNorm2d bn1_{nullptr};
  std::array<nn::Sequential, 4> layers_{nullptr, nullptr, nullptr, nullptr};
  nn::Linear fc_{nullptr};
};

// ---------------------------------------------------------------- vgg16

class Vgg16 : public Classifier {
 public:
  explicit Vgg16(const ArchSpec& s) : small_(s.resolution <= 64) {
    features_ = register_module("features", nn::Sequential());
    std::int64_t in = 3;
    for (const int v : {64, 64, 0, 128, 128, 0, 256, 256, 256, 0, 512, 512, 512, 0, 512, 512, 512, 0}) {
      if (v == 0) {
        features_->push_back(nn::MaxPool2d(nn::MaxPool2dOptions(2)));
      } else {
        features_->push_back(conv(3 == in ? 3 : in, v, 3, 1, 1, true));
        features_->push_back(nn::ReLU(nn::ReLUOptions(true)));
        in = v;
      }
    }
    const std::int64_t pooled = small_ ? 1 : 7;
    hidden_ = small_ ? 512 : 4096;
    pool_ = pooled;
    classifier_ = register_module(
        "classifier",
        nn::Sequential(nn::Linear(512 * pooled * pooled, hidden_), nn::ReLU(nn::ReLUOptions(true)),
                       nn::Dropout(0.5), nn::Linear(hidden_, hidden_), nn::ReLU(nn::ReLUOptions(true)),
                       nn::Dropout(0.5), nn::Linear(hidden_, s.num_classes)));
  }
  Tensor features(const Tensor& x) override {
    auto h = F::adaptive_avg_pool2d(features_->forward(x), F::AdaptiveAvgPool2dFuncOptions(pool_)).flatten(1);
    std::size_t i = 0;
    for (auto& m : *classifier_) {
      if (i++ == 6) break;
      h = m.forward(h);
    }
    return h;
  }
  Tensor head(const Tensor& f) override { return classifier_[6]->as<nn::Linear>()->forward(f); }
  std::string head_prefix() const override { return "classifier.6."; }
  std::int64_t feature_dim() const override { return hidden_; }

 private:
  bool small_;
  std::int64_t hidden_ = 0;
  std::int64_t pool_ = 1;
  nn::Sequential features_{nullptr};
  nn::Sequential classifier_{nullptr};
};

// ---------------------------------------------------------------- densenet121

struct DenseLayerImpl : nn::Module {
  nn::BatchNorm2d norm1{nullptr}, norm2{nullptr};
  nn::Conv2d conv1{nullptr}, conv2{nullptr};

  DenseLayerImpl(std::int64_t in, std::int64_t growth, std::int64_t bn_size) {
    norm1 = register_module("norm1", bn(in));
    conv1 = register_module("conv1", conv(in, bn_size * growth, 1));
    norm2 = register_module("norm2", bn(bn_size * growth));
    conv2 = register_module("conv2", conv(bn_size * growth, growth, 3));
  }
  Tensor forward(const Tensor& x) {
    auto h = conv1(torch::relu(norm1(x)));
    h = conv2(torch::relu(norm2(h)));
    return torch::cat({x, h}, 1);
  }
};
TORCH_MODULE(DenseLayer);

struct TransitionImpl : nn::Module {
  nn::BatchNorm2d norm{nullptr};
  nn::Conv2d conv_{nullptr};
  TransitionImpl(std::int64_t in, std::int64_t out) {
    norm = register_module("norm", bn(in));
    conv_ = register_module("conv", conv(in, out, 1));
  }
  Tensor forward(const Tensor& x) { return F::avg_pool2d(conv_(torch::relu(norm(x))), F::AvgPool2dFuncOptions(2)); }
};
TORCH_MODULE(Transition);

class DenseNet121 : public Classifier {
 public:
  explicit DenseNet121(const ArchSpec& s) {
    const bool small = s.resolution <= 64;
    constexpr std::int64_t growth = 32;
    constexpr std::int64_t bn_size = 4;
    std::int64_t c = 64;
    features_ = register_module("features", nn::Sequential());
    features_->push_back("conv0", small ? conv(3, c, 3) : conv(3, c, 7, 2));
    features_->push_back("norm0", bn(c));
    features_->push_back("relu0", nn::ReLU(nn::ReLUOptions(true)));
    if (!small) features_->push_back("pool0", nn::MaxPool2d(nn::MaxPool2dOptions(3).stride(2).padding(1)));
    const std::array<int, 4> layers{6, 12, 24, 16};
    for (std::size_t b = 0; b < layers.size(); ++b) {
      Stack block;
      for (int l = 0; l < layers[b]; ++l) {
        block->push_back("denselayer" + std::to_string(l + 1), DenseLayer(c, growth, bn_size));
        c += growth;
      }
      features_->push_back("denseblock" + std::to_string(b + 1), block);
      if (b + 1 < layers.size()) {
        features_->push_back("transition" + std::to_string(b + 1), Transition(c, c / 2));
        c /= 2;
      }
    }
    features_->push_back("norm5", bn(c));
    dim_ = c;
    classifier_ = register_module("classifier", nn::Linear(c, s.num_classes));
  }
  Tensor features(const Tensor& x) override { return global_pool(torch::relu(features_->forward(x))); }
  Tensor head(const Tensor& f) override { return classifier_(f); }
  std::string head_prefix() const override { return "classifier."; }
  std::int64_t feature_dim() const override { return dim_; }

 private:
  std::int64_t dim_ = 0;
  nn::Sequential features_{nullptr};
  nn::Linear classifier_{nullptr};
};

// ---------------------------------------------------------------- mobilenetv2 / mnasnet

enum class Act { relu, relu6, hardswish };

Tensor activate(const Tensor& x, Act a) {
  switch (a) {
    case Act::relu: return torch::relu(x);
    case Act::relu6: return torch::clamp(x, 0, 6);
    case Act::hardswish: return torch::hardswish(x);
  }
  return x;
}

struct ConvNormActImpl : nn::Module {
  nn::Conv2d conv_{nullptr};
  nn::BatchNorm2d norm{nullptr};
  Act act;
  bool use_act;
  ConvNormActImpl(std::int64_t in, std::int64_t out, std::int64_t k, std::int64_t stride, std::int64_t groups,
                  Act a, bool with_act = true)
      : act(a), use_act(with_act) {
    conv_ = register_module("conv", conv(in, out, k, stride, groups));
    norm = register_module("norm", bn(out));
  }
  Tensor forward(const Tensor& x) {
    auto h = norm(conv_(x));
    return use_act ? activate(h, act) : h;
  }
};
TORCH_MODULE(ConvNormAct);

struct SqueezeExcitationImpl : nn::Module {
  nn::Conv2d fc1{nullptr}, fc2{nullptr};
  SqueezeExcitationImpl(std::int64_t c, std::int64_t squeeze) {
    fc1 = register_module("fc1", conv(c, squeeze, 1, 1, 1, true));
    fc2 = register_module("fc2", conv(squeeze, c, 1, 1, 1, true));
  }
  Tensor forward(const Tensor& x) {
    auto s = F::adaptive_avg_pool2d(x, F::AdaptiveAvgPool2dFuncOptions(1));
    s = torch::hardsigmoid(fc2(torch::relu(fc1(s))));
    return x * s;
  }
};
TORCH_MODULE(SqueezeExcitation);

struct InvertedResidualImpl : nn::Module {
  nn::Sequential block{nullptr};
  bool residual;
  InvertedResidualImpl(std::int64_t in, std::int64_t expanded, std::int64_t out, std::int64_t k,
                       std::int64_t stride, Act act, bool se)
      : residual(stride == 1 && in == out) {
    block = register_module("block", nn::Sequential());
    if (expanded != in) block->push_back("expand", ConvNormAct(in, expanded, 1, 1, 1, act));
    block->push_back("depthwise", ConvNormAct(expanded, expanded, k, stride, expanded, act));
    if (se) block->push_back("se", SqueezeExcitation(expanded, make_divisible(expanded / 4.0)));
    block->push_back("project", ConvNormAct(expanded, out, 1, 1, 1, act, false));
  }
  Tensor forward(const Tensor& x) {
    auto h = block->forward(x);
    return residual ? x + h : h;
  }
};
TORCH_MODULE(InvertedResidual);

class SequentialBackbone : public Classifier {
 public:
  SequentialBackbone(nn::Sequential features, std::int64_t dim, std::int64_t num_classes, double dropout)
      : dim_(dim) {
    features_ = register_module("features", std::move(features));
    dropout_ = register_module("dropout", nn::Dropout(dropout));
    classifier_ = register_module("classifier", nn::Linear(dim, num_classes));
  }
  Tensor features(const Tensor& x) override { return global_pool(features_->forward(x)); }
  Tensor head(const Tensor& f) override { return classifier_(dropout_(f)); }
  std::string head_prefix() const override { return "classifier."; }
  std::int64_t feature_dim() const override { return dim_; }

 private:
  std::int64_t dim_;
  nn::Sequential features_{nullptr};
  nn::Dropout dropout_{nullptr};
  nn::Linear classifier_{nullptr};
};

// ---------------------------------------------------------------- mobilenetv3 (large)

class MobileNetV3 : public Classifier {
 public:
  explicit MobileNetV3(const ArchSpec& s) {
    const bool small = s.resolution <= 64;
    features_ = register_module("features", nn::Sequential());
    features_->push_back(ConvNormAct(3, 16, 3, small ? 1 : 2, 1, Act::hardswish));
    // kernel, expanded, out, squeeze-excite, activation, stride
    const std::vector<std::tuple<int, int, int, bool, Act, int>> cfg{
        {3, 16, 16, false, Act::relu, 1},       {3, 64, 24, false, Act::relu, 2},
        {3, 72, 24, false, Act::relu, 1},       {5, 72, 40, true, Act::relu, 2},
        {5, 120, 40, true, Act::relu, 1},       {5, 120, 40, true, Act::relu, 1},
        {3, 240, 80, false, Act::hardswish, 2}, {3, 200, 80, false, Act::hardswish, 1},
        {3, 184, 80, false, Act::hardswish, 1}, {3, 184, 80, false, Act::hardswish, 1},
        {3, 480, 112, true, Act::hardswish, 1}, {3, 672, 112, true, Act::hardswish, 1},
        {5, 672, 160, true, Act::hardswish, 2}, {5, 960, 160, true, Act::hardswish, 1},
        {5, 960, 160, true, Act::hardswish, 1}};
    std::int64_t in = 16;
    for (const auto& [k, e, o, se, act, st] : cfg) {
      features_->push_back(InvertedResidual(in, e, o, k, st, act, se));
      in = o;
    }
    features_->push_back(ConvNormAct(in, 960, 1, 1, 1, Act::hardswish));
    pre_ = register_module("pre_classifier", nn::Linear(960, 1280));
    dropout_ = register_module("dropout", nn::Dropout(0.2));
    classifier_ = register_module("classifier", nn::Linear(1280, s.num_classes));
  }
  Tensor features(const Tensor& x) override {
    return torch::hardswish(pre_(global_pool(features_->forward(x))));
  }
  Tensor head(const Tensor& f) override { return classifier_(dropout_(f)); }
  std::string head_prefix() const override { return "classifier."; }
  std::int64_t feature_dim() const override { return 1280; }

 private:
  nn::Sequential features_{nullptr};
  nn::Linear pre_{nullptr};
  nn::Dropout dropout_{nullptr};
  nn::Linear classifier_{nullptr};
};

// ---------------------------------------------------------------- convnext_t

struct LayerNorm2dImpl : nn::Module {
  nn::LayerNorm norm{nullptr};
  explicit LayerNorm2dImpl(std::int64_t c) {
    norm = register_module("norm", nn::LayerNorm(nn::LayerNormOptions({c}).eps(1e-6)));
  }
  Tensor forward(const Tensor& x) { return norm(x.permute({0, 2, 3, 1})).permute({0, 3, 1, 2}); }
};
TORCH_MODULE(LayerNorm2d);

struct ConvNeXtBlockImpl : nn::Module {
  nn::Conv2d dwconv{nullptr};
  nn::LayerNorm norm{nullptr};
  nn::Linear pw1{nullptr}, pw2{nullptr};
  Tensor gamma;
  explicit ConvNeXtBlockImpl(std::int64_t d) {
    dwconv = register_module("dwconv", conv(d, d, 7, 1, d, true));
    norm = register_module("norm", nn::LayerNorm(nn::LayerNormOptions({d}).eps(1e-6)));
    pw1 = register_module("pwconv1", nn::Linear(d, 4 * d));
    pw2 = register_module("pwconv2", nn::Linear(4 * d, d));
    gamma = register_parameter("gamma", torch::full({d}, 1e-6));
  }
  Tensor forward(const Tensor& x) {
    auto h = dwconv(x).permute({0, 2, 3, 1});
    h = pw2(F::gelu(pw1(norm(h)))) * gamma;
    return x + h.permute({0, 3, 1, 2});
  }
};
TORCH_MODULE(ConvNeXtBlock);

class ConvNeXtTiny : public Classifier {
 public:
  explicit ConvNeXtTiny(const ArchSpec& s) {
    const bool small = s.resolution <= 64;
    const std::array<std::int64_t, 4> dims{96, 192, 384, 768};
    const std::array<int, 4> depths{3, 3, 9, 3};
    features_ = register_module("features", nn::Sequential());
    const std::int64_t stem_k = small ? 2 : 4;
    features_->push_back("stem", nn::Conv2d(nn::Conv2dOptions(3, dims[0], stem_k).stride(stem_k)));
    features_->push_back("stem_norm", LayerNorm2d(dims[0]));
    for (std::size_t i = 0; i < dims.size(); ++i) {
      if (i > 0) {
        features_->push_back("down" + std::to_string(i) + "_norm", LayerNorm2d(dims[i - 1]));
        features_->push_back("down" + std::to_string(i),
                             nn::Conv2d(nn::Conv2dOptions(dims[i - 1], dims[i], 2).stride(2)));
      }
      for (int b = 0; b < depths[i]; ++b) {
        features_->push_back("stage" + std::to_string(i) + "_" + std::to_string(b), ConvNeXtBlock(dims[i]));
      }
    }
    norm_ = register_module("norm", nn::LayerNorm(nn::LayerNormOptions({dims[3]}).eps(1e-6)));
    head_ = register_module("head", nn::Linear(dims[3], s.num_classes));
  }
  Tensor features(const Tensor& x) override { return norm_(global_pool(features_->forward(x))); }
  Tensor head(const Tensor& f) override { return head_(f); }
  std::string head_prefix() const override { return "head."; }
  std::int64_t feature_dim() const override { return 768; }

 private:
  nn::Sequential features_{nullptr};
  nn::LayerNorm norm_{nullptr};
  nn::Linear head_{nullptr};
};

}  // namespace

ClassifierPtr toy_resnet(const ArchSpec& spec) { return std::make_shared<ToyResNet>(spec); }
ClassifierPtr resnet18(const ArchSpec& spec) { return std::make_shared<ResNet18>(spec); }
ClassifierPtr vgg16(const ArchSpec& spec) { return std::make_shared<Vgg16>(spec); }
ClassifierPtr densenet121(const ArchSpec& spec) { return std::make_shared<DenseNet121>(spec); }

ClassifierPtr mobilenetv2(const ArchSpec& spec) {
  const bool small = spec.resolution <= 64;
  nn::Sequential f;
  f->push_back(ConvNormAct(3, 32, 3, small ? 1 : 2, 1, Act::relu6));
  // expansion, out, repeats, stride
  const std::array<std::array<int, 4>, 7> cfg{{{1, 16, 1, 1},
                                               {6, 24, 2, small ? 1 : 2},
                                               {6, 32, 3, 2},
                                               {6, 64, 4, 2},
                                               {6, 96, 3, 1},
                                               {6, 160, 3, 2},
                                               {6, 320, 1, 1}}};
  std::int64_t in = 32;
  for (const auto& [t, c, n, s] : cfg) {
    for (int i = 0; i < n; ++i) {
      f->push_back(InvertedResidual(in, in * t, c, 3, i == 0 ? s : 1, Act::relu6, false));
      in = c;
    }
  }
  f->push_back(ConvNormAct(in, 1280, 1, 1, 1, Act::relu6));
  return std::make_shared<SequentialBackbone>(f, 1280, spec.num_classes, 0.2);
}

ClassifierPtr mobilenetv3(const ArchSpec& spec) { return std::make_shared<MobileNetV3>(spec); }

ClassifierPtr mnasnet(const ArchSpec& spec) {
  const bool small = spec.resolution <= 64;
  nn::Sequential f;
  f->push_back(ConvNormAct(3, 32, 3, small ? 1 : 2, 1, Act::relu));
  f->push_back(ConvNormAct(32, 32, 3, 1, 32, Act::relu));
  f->push_back(ConvNormAct(32, 16, 1, 1, 1, Act::relu, false));
  // in, out, kernel, stride, expansion, repeats
  const std::array<std::array<int, 6>, 6> cfg{{{16, 24, 3, 2, 3, 3},
                                               {24, 40, 5, 2, 3, 3},
                                               {40, 80, 5, 2, 6, 3},
                                               {80, 96, 3, 1, 6, 2},
                                               {96, 192, 5, 2, 6, 4},
                                               {192, 320, 3, 1, 6, 1}}};
  for (const auto& [in, out, k, s, e, r] : cfg) {
    for (int i = 0; i < r; ++i) {
      const std::int64_t cin = i == 0 ? in : out;
      f->push_back(InvertedResidual(cin, cin * e, out, k, i == 0 ? s : 1, Act::relu, false));
    }
  }
  f->push_back(ConvNormAct(320, 1280, 1, 1, 1, Act::relu));
  return std::make_shared<SequentialBackbone>(f, 1280, spec.num_classes, 0.2);
}

ClassifierPtr convnext_t(const ArchSpec& spec) { return std::make_shared<ConvNeXtTiny>(spec); }

}  // namespace osmosis::models::zoo
