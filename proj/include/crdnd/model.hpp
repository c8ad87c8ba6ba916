#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "crdnd/backbones.hpp"

namespace crdnd {

enum class Architecture { tiny_cnn, resnet18, mobilenet_v2, custom };

inline std::string to_string(Architecture a) {
  switch (a) {
    case Architecture::tiny_cnn: return "tiny-cnn";
    case Architecture::resnet18: return "resnet18";
    case Architecture::mobilenet_v2: return "mobilenetv2";
    case Architecture::custom: return "custom";
  }
  return "?";
}

inline Architecture parse_architecture(const std::string& s) {
  if (s == "tiny-cnn") return Architecture::tiny_cnn;
  if (s == "resnet18") return Architecture::resnet18;
  if (s == "mobilenetv2") return Architecture::mobilenet_v2;
  if (s == "custom") return Architecture::custom;
  throw InvalidInputError("unknown architecture '" + s + "'");
}

struct ModelSpec {
  Architecture architecture = Architecture::tiny_cnn;
  std::size_t num_classes = 10;
  std::size_t channels = 3, height = 32, width = 32;

  void validate() const {
    if (num_classes < 2) throw InvalidInputError("num_classes must be >= 2");
  }
  bool operator==(const ModelSpec&) const = default;
};

// A network plus its spec. Teacher instances are constructed with
// trainable=false and the optimizer refuses to touch them.
template <class T>
class Model {
 public:
  Model(ModelSpec spec, std::unique_ptr<Layer<T>> net, bool trainable = true)
      : spec_(spec), net_(std::move(net)), trainable_(trainable) {
    spec_.validate();
  }

  const ModelSpec& spec() const { return spec_; }
  bool trainable() const { return trainable_; }
  void set_trainable(bool t) { trainable_ = t; }

  // images: (N, C, H, W) -> logits (N, k)
  Tensor<T> forward(const Tensor<T>& images, bool train = false) {
    if (images.rank() != 4 || images.dim(1) != spec_.channels || images.dim(2) != spec_.height ||
        images.dim(3) != spec_.width)
      throw InvalidInputError("forward: expected (N," + std::to_string(spec_.channels) + "," +
                              std::to_string(spec_.height) + "," + std::to_string(spec_.width) +
                              "), got " + images.shape_str());
    Tensor<T> logits = net_->forward(images, train);
    if (logits.rank() != 2 || logits.dim(1) != spec_.num_classes)
      throw NumericError("forward produced wrong output dim " + logits.shape_str());
    return logits;
  }

  Tensor<T> backward(const Tensor<T>& grad_logits, bool param_grads) {
    return net_->backward(grad_logits, param_grads);
  }

  std::vector<ParamRef<T>> params() {
    std::vector<ParamRef<T>> out;
    net_->collect_params("", out);
    return out;
  }

  void zero_grad() {
    for (auto& p : params())
      if (p.grad) p.grad->fill(T(0));
  }

  void init(std::uint64_t master_seed, const std::string& role) {
    RngStream rng = RngStream::derive(master_seed, "init:" + role);
    net_->init_params(rng);
  }

  std::size_t num_params() {
    std::size_t n = 0;
    for (auto& p : params()) n += p.value->size();
    return n;
  }

  // FNV-1a over raw parameter bytes, in declaration order. Used to prove the
  // teacher is untouched by training and attacks.
  std::uint64_t param_digest() {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (auto& p : params()) h = fnv1a(p.value->data(), p.value->size() * sizeof(T), h);
    return h;
  }

 private:
  ModelSpec spec_;
  std::unique_ptr<Layer<T>> net_;
  bool trainable_;
};

template <class T>
Model<T> make_model(const ModelSpec& spec, bool trainable = true) {
  spec.validate();
  std::unique_ptr<Layer<T>> net;
  switch (spec.architecture) {
    case Architecture::tiny_cnn: net = build_tiny_cnn<T>(spec.num_classes); break;
    case Architecture::resnet18: net = build_resnet18<T>(spec.num_classes); break;
    case Architecture::mobilenet_v2: net = build_mobilenet_v2<T>(spec.num_classes); break;
    case Architecture::custom:
      throw InvalidInputError("custom architectures cannot be built from a spec");
  }
  return Model<T>(spec, std::move(net), trainable);
}

// Numerically stabilized softmax over one length-k score vector.
template <class T>
void softmax(const T* logits, std::size_t k, T* out) {
  T mx = logits[0];
  for (std::size_t i = 0; i < k; ++i) {
    if (!std::isfinite(static_cast<double>(logits[i])))
      throw NumericError("softmax: non-finite logit");
    if (logits[i] > mx) mx = logits[i];
  }
  T sum = 0;
  for (std::size_t i = 0; i < k; ++i) {
    out[i] = std::exp(logits[i] - mx);
    sum += out[i];
  }
  for (std::size_t i = 0; i < k; ++i) out[i] /= sum;
}

template <class T>
std::vector<T> softmax(const std::vector<T>& logits) {
  std::vector<T> out(logits.size());
  softmax(logits.data(), logits.size(), out.data());
  return out;
}

// Row-wise softmax of a (N, k) logit batch.
template <class T>
Tensor<T> softmax_rows(const Tensor<T>& logits) {
  Tensor<T> out(logits.shape());
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  for (std::size_t i = 0; i < n; ++i) softmax(logits.data() + i * k, k, out.data() + i * k);
  return out;
}

// Ties broken toward the lowest index.
template <class T>
std::size_t argmax(const T* v, std::size_t k) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < k; ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

}  // namespace crdnd
