#pragma once

#include <memory>
#include <string>
#include <vector>

#include "crdnd/layers.hpp"

namespace crdnd {

// Two 3x3 conv-bn stages with an identity or 1x1-conv shortcut.
template <class T>
class BasicBlock : public Layer<T> {
 public:
  BasicBlock(std::size_t in_ch, std::size_t out_ch, std::size_t stride)
      : conv1_(in_ch, out_ch, 3, stride, 1, false),
        bn1_(out_ch),
        relu1_(),
        conv2_(out_ch, out_ch, 3, 1, 1, false),
        bn2_(out_ch),
        relu_out_(),
        has_shortcut_(stride != 1 || in_ch != out_ch) {
    if (has_shortcut_) {
      sc_conv_ = std::make_unique<Conv2d<T>>(in_ch, out_ch, 1, stride, 0, false);
      sc_bn_ = std::make_unique<BatchNorm2d<T>>(out_ch);
    }
  }

  Tensor<T> forward(const Tensor<T>& x, bool train) override {
    Tensor<T> main = relu1_.forward(bn1_.forward(conv1_.forward(x, train), train), train);
    main = bn2_.forward(conv2_.forward(main, train), train);
    Tensor<T> sc = has_shortcut_ ? sc_bn_->forward(sc_conv_->forward(x, train), train) : x;
    for (std::size_t i = 0; i < main.size(); ++i) main[i] += sc[i];
    return relu_out_.forward(main, train);
  }

  Tensor<T> backward(const Tensor<T>& gout, bool pg) override {
    Tensor<T> g = relu_out_.backward(gout, pg);
    Tensor<T> gmain = conv1_.backward(
        bn1_.backward(relu1_.backward(conv2_.backward(bn2_.backward(g, pg), pg), pg), pg), pg);
    if (has_shortcut_) {
      Tensor<T> gsc = sc_conv_->backward(sc_bn_->backward(g, pg), pg);
      for (std::size_t i = 0; i < gmain.size(); ++i) gmain[i] += gsc[i];
    } else {
      for (std::size_t i = 0; i < gmain.size(); ++i) gmain[i] += g[i];
    }
    return gmain;
  }

  void collect_params(const std::string& p, std::vector<ParamRef<T>>& out) override {
    conv1_.collect_params(p + ".conv1", out);
    bn1_.collect_params(p + ".bn1", out);
    conv2_.collect_params(p + ".conv2", out);
    bn2_.collect_params(p + ".bn2", out);
    if (has_shortcut_) {
      sc_conv_->collect_params(p + ".shortcut.conv", out);
      sc_bn_->collect_params(p + ".shortcut.bn", out);
    }
  }

  void init_params(RngStream& rng) override {
    conv1_.init_params(rng);
    conv2_.init_params(rng);
    if (has_shortcut_) sc_conv_->init_params(rng);
  }

 private:
  Conv2d<T> conv1_;
  BatchNorm2d<T> bn1_;
  ReLU<T> relu1_;
  Conv2d<T> conv2_;
  BatchNorm2d<T> bn2_;
  ReLU<T> relu_out_;
  bool has_shortcut_;
  std::unique_ptr<Conv2d<T>> sc_conv_;
  std::unique_ptr<BatchNorm2d<T>> sc_bn_;
};

// Expand (1x1) -> depthwise (3x3) -> project (1x1), residual when the
// spatial and channel dims are preserved.
template <class T>
class InvertedResidual : public Layer<T> {
 public:
  InvertedResidual(std::size_t in_ch, std::size_t out_ch, std::size_t stride, std::size_t expand)
      : use_res_(stride == 1 && in_ch == out_ch), expand_(expand != 1) {
    const std::size_t hidden = in_ch * expand;
    if (expand_) {
      exp_conv_ = std::make_unique<Conv2d<T>>(in_ch, hidden, 1, 1, 0, false);
      exp_bn_ = std::make_unique<BatchNorm2d<T>>(hidden);
      exp_relu_ = std::make_unique<ReLU<T>>(6.0);
    }
    dw_ = std::make_unique<DepthwiseConv2d<T>>(hidden, 3, stride, 1);
    dw_bn_ = std::make_unique<BatchNorm2d<T>>(hidden);
    dw_relu_ = std::make_unique<ReLU<T>>(6.0);
    proj_ = std::make_unique<Conv2d<T>>(hidden, out_ch, 1, 1, 0, false);
    proj_bn_ = std::make_unique<BatchNorm2d<T>>(out_ch);
  }

  Tensor<T> forward(const Tensor<T>& x, bool train) override {
    Tensor<T> h = x;
    if (expand_) h = exp_relu_->forward(exp_bn_->forward(exp_conv_->forward(h, train), train), train);
    h = dw_relu_->forward(dw_bn_->forward(dw_->forward(h, train), train), train);
    h = proj_bn_->forward(proj_->forward(h, train), train);
    if (use_res_)
      for (std::size_t i = 0; i < h.size(); ++i) h[i] += x[i];
    return h;
  }

  Tensor<T> backward(const Tensor<T>& gout, bool pg) override {
    Tensor<T> g = proj_->backward(proj_bn_->backward(gout, pg), pg);
    g = dw_->backward(dw_bn_->backward(dw_relu_->backward(g, pg), pg), pg);
    if (expand_) g = exp_conv_->backward(exp_bn_->backward(exp_relu_->backward(g, pg), pg), pg);
    if (use_res_)
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += gout[i];
    return g;
  }

  void collect_params(const std::string& p, std::vector<ParamRef<T>>& out) override {
    if (expand_) {
      exp_conv_->collect_params(p + ".expand.conv", out);
      exp_bn_->collect_params(p + ".expand.bn", out);
    }
    dw_->collect_params(p + ".depthwise.conv", out);
    dw_bn_->collect_params(p + ".depthwise.bn", out);
    proj_->collect_params(p + ".project.conv", out);
    proj_bn_->collect_params(p + ".project.bn", out);
  }

  void init_params(RngStream& rng) override {
    if (expand_) exp_conv_->init_params(rng);
    dw_->init_params(rng);
    dw_bn_->init_params(rng);
    proj_->init_params(rng);
  }

 private:
  bool use_res_, expand_;
  std::unique_ptr<Conv2d<T>> exp_conv_;
  std::unique_ptr<BatchNorm2d<T>> exp_bn_;
  std::unique_ptr<ReLU<T>> exp_relu_;
  std::unique_ptr<DepthwiseConv2d<T>> dw_;
  std::unique_ptr<BatchNorm2d<T>> dw_bn_;
  std::unique_ptr<ReLU<T>> dw_relu_;
  std::unique_ptr<Conv2d<T>> proj_;
  std::unique_ptr<BatchNorm2d<T>> proj_bn_;
};

// Small 4-conv network sized so that full training runs complete in minutes
// on a CPU. No batch norm, so train/eval forward passes agree exactly.
template <class T>
std::unique_ptr<Sequential<T>> build_tiny_cnn(std::size_t num_classes) {
  auto net = std::make_unique<Sequential<T>>();
  net->add("conv1", std::make_unique<Conv2d<T>>(3, 8, 3, 1, 1));
  net->add("relu1", std::make_unique<ReLU<T>>());
  net->add("pool1", std::make_unique<MaxPool2<T>>());
  net->add("conv2", std::make_unique<Conv2d<T>>(8, 16, 3, 1, 1));
  net->add("relu2", std::make_unique<ReLU<T>>());
  net->add("pool2", std::make_unique<MaxPool2<T>>());
  net->add("conv3", std::make_unique<Conv2d<T>>(16, 16, 3, 1, 1));
  net->add("relu3", std::make_unique<ReLU<T>>());
  net->add("conv4", std::make_unique<Conv2d<T>>(16, 32, 3, 1, 1));
  net->add("relu4", std::make_unique<ReLU<T>>());
  net->add("gap", std::make_unique<GlobalAvgPool<T>>());
  net->add("fc", std::make_unique<Linear<T>>(32, num_classes));
  return net;
}

// ResNet-18 in its 32x32 form: 3x3 stem, stages 64/128/256/512 with two
// basic blocks each, strides 1/2/2/2.
template <class T>
std::unique_ptr<Sequential<T>> build_resnet18(std::size_t num_classes) {
  auto net = std::make_unique<Sequential<T>>();
  net->add("stem.conv", std::make_unique<Conv2d<T>>(3, 64, 3, 1, 1, false));
  net->add("stem.bn", std::make_unique<BatchNorm2d<T>>(64));
  net->add("stem.relu", std::make_unique<ReLU<T>>());
  const std::size_t chans[4] = {64, 128, 256, 512};
  std::size_t in_ch = 64;
  for (int stage = 0; stage < 4; ++stage) {
    const std::size_t out_ch = chans[stage];
    const std::size_t stride = stage == 0 ? 1 : 2;
    net->add("layer" + std::to_string(stage + 1) + ".0",
             std::make_unique<BasicBlock<T>>(in_ch, out_ch, stride));
    net->add("layer" + std::to_string(stage + 1) + ".1",
             std::make_unique<BasicBlock<T>>(out_ch, out_ch, 1));
    in_ch = out_ch;
  }
  net->add("gap", std::make_unique<GlobalAvgPool<T>>());
  net->add("fc", std::make_unique<Linear<T>>(512, num_classes));
  return net;
}

// MobileNetV2 in its 32x32 form: stride-1 stem, the standard inverted
// residual stack with the first two downsamples removed.
template <class T>
std::unique_ptr<Sequential<T>> build_mobilenet_v2(std::size_t num_classes) {
  auto net = std::make_unique<Sequential<T>>();
  net->add("stem.conv", std::make_unique<Conv2d<T>>(3, 32, 3, 1, 1, false));
  net->add("stem.bn", std::make_unique<BatchNorm2d<T>>(32));
  net->add("stem.relu", std::make_unique<ReLU<T>>(6.0));
  struct Row {
    std::size_t expand, out_ch, repeat, stride;
  };
  const Row rows[] = {{1, 16, 1, 1}, {6, 24, 2, 1}, {6, 32, 3, 2}, {6, 64, 4, 2},
                      {6, 96, 3, 1}, {6, 160, 3, 2}, {6, 320, 1, 1}};
  std::size_t in_ch = 32;
  int idx = 0;
  for (const Row& r : rows)
    for (std::size_t i = 0; i < r.repeat; ++i, ++idx) {
      const std::size_t stride = i == 0 ? r.stride : 1;
      net->add("block" + std::to_string(idx),
               std::make_unique<InvertedResidual<T>>(in_ch, r.out_ch, stride, r.expand));
      in_ch = r.out_ch;
    }
  net->add("head.conv", std::make_unique<Conv2d<T>>(in_ch, 1280, 1, 1, 0, false));
  net->add("head.bn", std::make_unique<BatchNorm2d<T>>(1280));
  net->add("head.relu", std::make_unique<ReLU<T>>(6.0));
  net->add("gap", std::make_unique<GlobalAvgPool<T>>());
  net->add("fc", std::make_unique<Linear<T>>(1280, num_classes));
  return net;
}

}  // namespace crdnd
