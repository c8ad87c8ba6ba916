#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "crdnd/rng.hpp"
#include "crdnd/tensor.hpp"

namespace crdnd {

template <class T>
struct ParamRef {
  std::string name;
  Tensor<T>* value;
  Tensor<T>* grad;
};

// Forward caches whatever backward needs. backward() consumes the gradient
// with respect to the layer output and returns the gradient with respect to
// the layer input; parameter gradients are accumulated only when
// `param_grads` is set (attacks only need input gradients).
template <class T>
class Layer {
 public:
  virtual ~Layer() = default;
  virtual Tensor<T> forward(const Tensor<T>& x, bool train) = 0;
  virtual Tensor<T> backward(const Tensor<T>& grad_out, bool param_grads) = 0;
  virtual void collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) {}
  virtual void init_params(RngStream& rng) {}
};

template <class T>
using EigenMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <class T>
using MapRowMajor =
    Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <class T>
using ConstMapRowMajor =
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

template <class T>
class Linear : public Layer<T> {
 public:
  Linear(std::size_t in_features, std::size_t out_features)
      : in_(in_features),
        out_(out_features),
        weight_({out_features, in_features}),
        bias_({out_features}),
        weight_grad_({out_features, in_features}),
        bias_grad_({out_features}) {}

  Tensor<T> forward(const Tensor<T>& x, bool) override {
    if (x.rank() != 2 || x.dim(1) != in_)
      throw InvalidInputError("linear: expected (N," + std::to_string(in_) + "), got " + x.shape_str());
    input_ = x;
    const std::size_t n = x.dim(0);
    Tensor<T> y({n, out_});
    ConstMapRowMajor<T> xm(x.data(), n, in_);
    ConstMapRowMajor<T> wm(weight_.data(), out_, in_);
    MapRowMajor<T> ym(y.data(), n, out_);
    ym.noalias() = xm * wm.transpose();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < out_; ++j) y.at2(i, j) += bias_[j];
    return y;
  }

  Tensor<T> backward(const Tensor<T>& gout, bool param_grads) override {
    const std::size_t n = input_.dim(0);
    ConstMapRowMajor<T> gm(gout.data(), n, out_);
    ConstMapRowMajor<T> xm(input_.data(), n, in_);
    ConstMapRowMajor<T> wm(weight_.data(), out_, in_);
    if (param_grads) {
      MapRowMajor<T> gwm(weight_grad_.data(), out_, in_);
      gwm.noalias() += gm.transpose() * xm;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < out_; ++j) bias_grad_[j] += gout.at2(i, j);
    }
    Tensor<T> gin({n, in_});
    MapRowMajor<T> gim(gin.data(), n, in_);
    gim.noalias() = gm * wm;
    return gin;
  }

  void collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) override {
    out.push_back({prefix + ".weight", &weight_, &weight_grad_});
    out.push_back({prefix + ".bias", &bias_, &bias_grad_});
  }

  void init_params(RngStream& rng) override {
    const double std = std::sqrt(2.0 / static_cast<double>(in_));
    for (auto& v : weight_.vec()) v = static_cast<T>(rng.normal() * std);
    bias_.fill(T(0));
  }

  Tensor<T>& weight() { return weight_; }
  Tensor<T>& bias() { return bias_; }

 private:
  std::size_t in_, out_;
  Tensor<T> weight_, bias_, weight_grad_, bias_grad_;
  Tensor<T> input_;
};

template <class T>
class Conv2d : public Layer<T> {
 public:
  Conv2d(std::size_t in_ch, std::size_t out_ch, std::size_t ksize, std::size_t stride = 1,
         std::size_t pad = 0, bool bias = true)
      : cin_(in_ch),
        cout_(out_ch),
        k_(ksize),
        stride_(stride),
        pad_(pad),
        has_bias_(bias),
        weight_({out_ch, in_ch, ksize, ksize}),
        weight_grad_({out_ch, in_ch, ksize, ksize}),
        bias_({bias ? out_ch : 1}),
        bias_grad_({bias ? out_ch : 1}) {}

  Tensor<T> forward(const Tensor<T>& x, bool) override {
    if (x.rank() != 4 || x.dim(1) != cin_)
      throw InvalidInputError("conv2d: expected (N," + std::to_string(cin_) + ",H,W), got " + x.shape_str());
    n_ = x.dim(0);
    h_ = x.dim(2);
    w_ = x.dim(3);
    hout_ = (h_ + 2 * pad_ - k_) / stride_ + 1;
    wout_ = (w_ + 2 * pad_ - k_) / stride_ + 1;
    const std::size_t kk = cin_ * k_ * k_;
    const std::size_t m = n_ * hout_ * wout_;
    col_.resize(kk, m);
    im2col(x);
    ConstMapRowMajor<T> wm(weight_.data(), cout_, kk);
    EigenMat<T> y = wm * col_;  // (cout, m)
    Tensor<T> out({n_, cout_, hout_, wout_});
    for (std::size_t c = 0; c < cout_; ++c) {
      const T b = has_bias_ ? bias_[c] : T(0);
      for (std::size_t i = 0; i < m; ++i) {
        const std::size_t n = i / (hout_ * wout_);
        const std::size_t r = i % (hout_ * wout_);
        out.at4(n, c, r / wout_, r % wout_) = y(c, i) + b;
      }
    }
    return out;
  }

  Tensor<T> backward(const Tensor<T>& gout, bool param_grads) override {
    const std::size_t kk = cin_ * k_ * k_;
    const std::size_t m = n_ * hout_ * wout_;
    EigenMat<T> gy(cout_, m);
    for (std::size_t c = 0; c < cout_; ++c)
      for (std::size_t i = 0; i < m; ++i) {
        const std::size_t n = i / (hout_ * wout_);
        const std::size_t r = i % (hout_ * wout_);
        gy(c, i) = gout.at4(n, c, r / wout_, r % wout_);
      }
    if (param_grads) {
      MapRowMajor<T> gwm(weight_grad_.data(), cout_, kk);
      gwm.noalias() += gy * col_.transpose();
      if (has_bias_)
        for (std::size_t c = 0; c < cout_; ++c) bias_grad_[c] += gy.row(c).sum();
    }
    ConstMapRowMajor<T> wm(weight_.data(), cout_, kk);
    EigenMat<T> gcol = wm.transpose() * gy;  // (kk, m)
    return col2im(gcol);
  }

  void collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) override {
    out.push_back({prefix + ".weight", &weight_, &weight_grad_});
    if (has_bias_) out.push_back({prefix + ".bias", &bias_, &bias_grad_});
  }

  void init_params(RngStream& rng) override {
    const double fan_in = static_cast<double>(cin_ * k_ * k_);
    const double std = std::sqrt(2.0 / fan_in);
    for (auto& v : weight_.vec()) v = static_cast<T>(rng.normal() * std);
    bias_.fill(T(0));
  }

  Tensor<T>& weight() { return weight_; }

 private:
  void im2col(const Tensor<T>& x) {
    const std::size_t hw = hout_ * wout_;
    for (std::size_t n = 0; n < n_; ++n)
      for (std::size_t c = 0; c < cin_; ++c)
        for (std::size_t ki = 0; ki < k_; ++ki)
          for (std::size_t kj = 0; kj < k_; ++kj) {
            const std::size_t row = (c * k_ + ki) * k_ + kj;
            for (std::size_t oh = 0; oh < hout_; ++oh) {
              const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh * stride_ + ki) -
                                        static_cast<std::ptrdiff_t>(pad_);
              const bool hv = ih >= 0 && ih < static_cast<std::ptrdiff_t>(h_);
              for (std::size_t ow = 0; ow < wout_; ++ow) {
                const std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(ow * stride_ + kj) -
                                          static_cast<std::ptrdiff_t>(pad_);
                const std::size_t colidx = n * hw + oh * wout_ + ow;
                col_(row, colidx) =
                    (hv && iw >= 0 && iw < static_cast<std::ptrdiff_t>(w_))
                        ? x.at4(n, c, static_cast<std::size_t>(ih), static_cast<std::size_t>(iw))
                        : T(0);
              }
            }
          }
  }

  Tensor<T> col2im(const EigenMat<T>& gcol) {
    Tensor<T> gx({n_, cin_, h_, w_});
    const std::size_t hw = hout_ * wout_;
    for (std::size_t n = 0; n < n_; ++n)
      for (std::size_t c = 0; c < cin_; ++c)
        for (std::size_t ki = 0; ki < k_; ++ki)
          for (std::size_t kj = 0; kj < k_; ++kj) {
            const std::size_t row = (c * k_ + ki) * k_ + kj;
            for (std::size_t oh = 0; oh < hout_; ++oh) {
              const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh * stride_ + ki) -
                                        static_cast<std::ptrdiff_t>(pad_);
              if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(h_)) continue;
              for (std::size_t ow = 0; ow < wout_; ++ow) {
                const std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(ow * stride_ + kj) -
                                          static_cast<std::ptrdiff_t>(pad_);
                if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(w_)) continue;
                gx.at4(n, c, static_cast<std::size_t>(ih), static_cast<std::size_t>(iw)) +=
                    gcol(row, n * hw + oh * wout_ + ow);
              }
            }
          }
    return gx;
  }

  std::size_t cin_, cout_, k_, stride_, pad_;
  bool has_bias_;
  Tensor<T> weight_, weight_grad_, bias_, bias_grad_;
  std::size_t n_ = 0, h_ = 0, w_ = 0, hout_ = 0, wout_ = 0;
  EigenMat<T> col_;
};

// Per-channel 3x3 convolution (groups == channels).
template <class T>
class DepthwiseConv2d : public Layer<T> {
 public:
  DepthwiseConv2d(std::size_t channels, std::size_t ksize, std::size_t stride, std::size_t pad)
      : ch_(channels),
        k_(ksize),
        stride_(stride),
        pad_(pad),
        weight_({channels, 1, ksize, ksize}),
        weight_grad_({channels, 1, ksize, ksize}) {}

  Tensor<T> forward(const Tensor<T>& x, bool) override {
    if (x.rank() != 4 || x.dim(1) != ch_)
      throw InvalidInputError("depthwise conv: channel mismatch, got " + x.shape_str());
    input_ = x;
    const std::size_t n = x.dim(0), h = x.dim(2), w = x.dim(3);
    hout_ = (h + 2 * pad_ - k_) / stride_ + 1;
    wout_ = (w + 2 * pad_ - k_) / stride_ + 1;
    Tensor<T> out({n, ch_, hout_, wout_});
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < ch_; ++c)
        for (std::size_t oh = 0; oh < hout_; ++oh)
          for (std::size_t ow = 0; ow < wout_; ++ow) {
            T acc = 0;
            for (std::size_t ki = 0; ki < k_; ++ki)
              for (std::size_t kj = 0; kj < k_; ++kj) {
                const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh * stride_ + ki) -
                                          static_cast<std::ptrdiff_t>(pad_);
                const std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(ow * stride_ + kj) -
                                          static_cast<std::ptrdiff_t>(pad_);
                if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(h) || iw < 0 ||
                    iw >= static_cast<std::ptrdiff_t>(w))
                  continue;
                acc += x.at4(i, c, ih, iw) * weight_.at4(c, 0, ki, kj);
              }
            out.at4(i, c, oh, ow) = acc;
          }
    return out;
  }

  Tensor<T> backward(const Tensor<T>& gout, bool param_grads) override {
    const std::size_t n = input_.dim(0), h = input_.dim(2), w = input_.dim(3);
    Tensor<T> gx({n, ch_, h, w});
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < ch_; ++c)
        for (std::size_t oh = 0; oh < hout_; ++oh)
          for (std::size_t ow = 0; ow < wout_; ++ow) {
            const T g = gout.at4(i, c, oh, ow);
            for (std::size_t ki = 0; ki < k_; ++ki)
              for (std::size_t kj = 0; kj < k_; ++kj) {
                const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh * stride_ + ki) -
                                          static_cast<std::ptrdiff_t>(pad_);
                const std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(ow * stride_ + kj) -
                                          static_cast<std::ptrdiff_t>(pad_);
                if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(h) || iw < 0 ||
                    iw >= static_cast<std::ptrdiff_t>(w))
                  continue;
                gx.at4(i, c, ih, iw) += g * weight_.at4(c, 0, ki, kj);
                if (param_grads) weight_grad_.at4(c, 0, ki, kj) += g * input_.at4(i, c, ih, iw);
              }
          }
    return gx;
  }

  void collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) override {
    out.push_back({prefix + ".weight", &weight_, &weight_grad_});
  }

  void init_params(RngStream& rng) override {
    const double std = std::sqrt(2.0 / static_cast<double>(k_ * k_));
    for (auto& v : weight_.vec()) v = static_cast<T>(rng.normal() * std);
  }

 private:
  std::size_t ch_, k_, stride_, pad_;
  Tensor<T> weight_, weight_grad_;
  Tensor<T> input_;
  std::size_t hout_ = 0, wout_ = 0;
};

template <class T>
class BatchNorm2d : public Layer<T> {
 public:
  explicit BatchNorm2d(std::size_t channels, double eps = 1e-5, double momentum = 0.1)
      : ch_(channels),
        eps_(eps),
        momentum_(momentum),
        gamma_({channels}),
        beta_({channels}),
        gamma_grad_({channels}),
        beta_grad_({channels}),
        running_mean_({channels}),
        running_var_({channels}) {
    gamma_.fill(T(1));
    running_var_.fill(T(1));
  }

  Tensor<T> forward(const Tensor<T>& x, bool train) override {
    if (x.rank() != 4 || x.dim(1) != ch_)
      throw InvalidInputError("batchnorm: channel mismatch, got " + x.shape_str());
    train_mode_ = train;
    const std::size_t n = x.dim(0), h = x.dim(2), w = x.dim(3);
    const double m = static_cast<double>(n * h * w);
    Tensor<T> out(x.shape());
    xhat_ = Tensor<T>(x.shape());
    invstd_.assign(ch_, 0.0);
    for (std::size_t c = 0; c < ch_; ++c) {
      double mean, var;
      if (train) {
        double s = 0, s2 = 0;
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t ph = 0; ph < h; ++ph)
            for (std::size_t pw = 0; pw < w; ++pw) {
              const double v = x.at4(i, c, ph, pw);
              s += v;
              s2 += v * v;
            }
        mean = s / m;
        var = s2 / m - mean * mean;
        if (var < 0) var = 0;
        const double unbiased = m > 1 ? var * m / (m - 1) : var;
        running_mean_[c] = static_cast<T>((1 - momentum_) * running_mean_[c] + momentum_ * mean);
        running_var_[c] = static_cast<T>((1 - momentum_) * running_var_[c] + momentum_ * unbiased);
      } else {
        mean = running_mean_[c];
        var = running_var_[c];
      }
      const double inv = 1.0 / std::sqrt(var + eps_);
      invstd_[c] = inv;
      mean_cache_.resize(ch_);
      mean_cache_[c] = mean;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t ph = 0; ph < h; ++ph)
          for (std::size_t pw = 0; pw < w; ++pw) {
            const T xh = static_cast<T>((x.at4(i, c, ph, pw) - mean) * inv);
            xhat_.at4(i, c, ph, pw) = xh;
            out.at4(i, c, ph, pw) = gamma_[c] * xh + beta_[c];
          }
    }
    return out;
  }

  Tensor<T> backward(const Tensor<T>& gout, bool param_grads) override {
    const std::size_t n = gout.dim(0), h = gout.dim(2), w = gout.dim(3);
    const double m = static_cast<double>(n * h * w);
    Tensor<T> gx(gout.shape());
    for (std::size_t c = 0; c < ch_; ++c) {
      double sum_g = 0, sum_gx = 0;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t ph = 0; ph < h; ++ph)
          for (std::size_t pw = 0; pw < w; ++pw) {
            const double g = gout.at4(i, c, ph, pw);
            sum_g += g;
            sum_gx += g * xhat_.at4(i, c, ph, pw);
          }
      if (param_grads) {
        gamma_grad_[c] += static_cast<T>(sum_gx);
        beta_grad_[c] += static_cast<T>(sum_g);
      }
      const double gamma = gamma_[c];
      const double inv = invstd_[c];
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t ph = 0; ph < h; ++ph)
          for (std::size_t pw = 0; pw < w; ++pw) {
            const double g = gout.at4(i, c, ph, pw);
            if (train_mode_) {
              const double xh = xhat_.at4(i, c, ph, pw);
              gx.at4(i, c, ph, pw) =
                  static_cast<T>(gamma * inv * (g - sum_g / m - xh * sum_gx / m));
            } else {
              gx.at4(i, c, ph, pw) = static_cast<T>(gamma * inv * g);
            }
          }
    }
    return gx;
  }

  void collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) override {
    out.push_back({prefix + ".gamma", &gamma_, &gamma_grad_});
    out.push_back({prefix + ".beta", &beta_, &beta_grad_});
    // Running statistics carry no gradient but must persist in checkpoints.
    out.push_back({prefix + ".running_mean", &running_mean_, nullptr});
    out.push_back({prefix + ".running_var", &running_var_, nullptr});
  }

 private:
  std::size_t ch_;
  double eps_, momentum_;
  Tensor<T> gamma_, beta_, gamma_grad_, beta_grad_;
  Tensor<T> running_mean_, running_var_;
  Tensor<T> xhat_;
  std::vector<double> invstd_, mean_cache_;
  bool train_mode_ = false;
};

template <class T>
class ReLU : public Layer<T> {
 public:
  // cap < 0 means no upper clamp; cap = 6 gives ReLU6.
  explicit ReLU(double cap = -1.0) : cap_(cap) {}

  Tensor<T> forward(const Tensor<T>& x, bool) override {
    mask_.assign(x.size(), 0);
    Tensor<T> out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) {
      T v = x[i] > T(0) ? x[i] : T(0);
      if (cap_ >= 0 && v > T(cap_)) v = T(cap_);
      out[i] = v;
      mask_[i] = (x[i] > T(0) && (cap_ < 0 || x[i] < T(cap_))) ? 1 : 0;
    }
    return out;
  }

  Tensor<T> backward(const Tensor<T>& gout, bool) override {
    Tensor<T> gin(gout.shape());
    for (std::size_t i = 0; i < gout.size(); ++i) gin[i] = mask_[i] ? gout[i] : T(0);
    return gin;
  }

 private:
  double cap_;
  std::vector<unsigned char> mask_;
};

template <class T>
class MaxPool2 : public Layer<T> {
 public:
  Tensor<T> forward(const Tensor<T>& x, bool) override {
    const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    in_shape_ = x.shape();
    const std::size_t ho = h / 2, wo = w / 2;
    Tensor<T> out({n, c, ho, wo});
    argmax_.assign(out.size(), 0);
    std::size_t oi = 0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t oh = 0; oh < ho; ++oh)
          for (std::size_t ow = 0; ow < wo; ++ow, ++oi) {
            T best = x.at4(i, ch, oh * 2, ow * 2);
            std::size_t besth = oh * 2, bestw = ow * 2;
            for (std::size_t dh = 0; dh < 2; ++dh)
              for (std::size_t dw = 0; dw < 2; ++dw) {
                const T v = x.at4(i, ch, oh * 2 + dh, ow * 2 + dw);
                if (v > best) {
                  best = v;
                  besth = oh * 2 + dh;
                  bestw = ow * 2 + dw;
                }
              }
            out[oi] = best;
            argmax_[oi] = ((i * c + ch) * h + besth) * w + bestw;
          }
    return out;
  }

  Tensor<T> backward(const Tensor<T>& gout, bool) override {
    Tensor<T> gin(in_shape_);
    for (std::size_t i = 0; i < gout.size(); ++i) gin[argmax_[i]] += gout[i];
    return gin;
  }

 private:
  std::vector<std::size_t> in_shape_;
  std::vector<std::size_t> argmax_;
};

template <class T>
class GlobalAvgPool : public Layer<T> {
 public:
  Tensor<T> forward(const Tensor<T>& x, bool) override {
    in_shape_ = x.shape();
    const std::size_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
    Tensor<T> out({n, c});
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t ch = 0; ch < c; ++ch) {
        T s = 0;
        for (std::size_t p = 0; p < hw; ++p) s += x[(i * c + ch) * hw + p];
        out.at2(i, ch) = s / static_cast<T>(hw);
      }
    return out;
  }

  Tensor<T> backward(const Tensor<T>& gout, bool) override {
    Tensor<T> gin(in_shape_);
    const std::size_t n = in_shape_[0], c = in_shape_[1], hw = in_shape_[2] * in_shape_[3];
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t ch = 0; ch < c; ++ch) {
        const T g = gout.at2(i, ch) / static_cast<T>(hw);
        for (std::size_t p = 0; p < hw; ++p) gin[(i * c + ch) * hw + p] = g;
      }
    return gin;
  }

 private:
  std::vector<std::size_t> in_shape_;
};

template <class T>
class Flatten : public Layer<T> {
 public:
  Tensor<T> forward(const Tensor<T>& x, bool) override {
    in_shape_ = x.shape();
    return Tensor<T>({x.dim(0), x.size() / x.dim(0)}, x.vec());
  }
  Tensor<T> backward(const Tensor<T>& gout, bool) override {
    return Tensor<T>(in_shape_, gout.vec());
  }

 private:
  std::vector<std::size_t> in_shape_;
};

template <class T>
class Sequential : public Layer<T> {
 public:
  Sequential() = default;

  Sequential* add(const std::string& name, std::unique_ptr<Layer<T>> layer) {
    names_.push_back(name);
    children_.push_back(std::move(layer));
    return this;
  }

  Tensor<T> forward(const Tensor<T>& x, bool train) override {
    Tensor<T> cur = x;
    for (auto& l : children_) cur = l->forward(cur, train);
    return cur;
  }

  Tensor<T> backward(const Tensor<T>& gout, bool param_grads) override {
    Tensor<T> cur = gout;
    for (auto it = children_.rbegin(); it != children_.rend(); ++it)
      cur = (*it)->backward(cur, param_grads);
    return cur;
  }

  void collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) override {
    for (std::size_t i = 0; i < children_.size(); ++i)
      children_[i]->collect_params(prefix.empty() ? names_[i] : prefix + "." + names_[i], out);
  }

  void init_params(RngStream& rng) override {
    for (auto& l : children_) l->init_params(rng);
  }

 private:
  std::vector<std::string> names_;
  std::vector<std::unique_ptr<Layer<T>>> children_;
};

}  // namespace crdnd
