#pragma once

#include <optional>
#include <string>
#include <vector>

#include "crdnd/losses.hpp"
#include "crdnd/model.hpp"
#include "crdnd/rng.hpp"

namespace crdnd {

enum class AttackObjective { cross_entropy_vs_label, kl_vs_teacher };

inline std::string to_string(AttackObjective o) {
  return o == AttackObjective::cross_entropy_vs_label ? "cross-entropy" : "kl-vs-teacher";
}

struct AttackSpec {
  std::string name = "pgd";
  double epsilon = 8.0 / 255.0;  // pixel-scale l-inf budget
  int steps = 1;
  double step_size = 8.0 / 255.0;  // pixel scale
  AttackObjective objective = AttackObjective::cross_entropy_vs_label;
  bool random_start = false;

  void validate() const {
    if (!(epsilon >= 0.0 && epsilon <= 1.0))
      throw InvalidInputError("attack epsilon must lie in [0,1]");
    if (steps < 1) throw InvalidInputError("attack steps must be >= 1");
    if (!(step_size > 0.0)) throw InvalidInputError("attack step_size must be > 0");
  }
};

// Evaluation presets; only epsilon is adjustable, the step schedules follow
// the usual SAT/TRADES parameterizations.
inline AttackSpec fgsm_spec(double eps = 8.0 / 255.0) {
  return {"fgsm", eps, 1, eps > 0 ? eps : 1.0, AttackObjective::cross_entropy_vs_label, false};
}
inline AttackSpec pgd_s_spec(double eps = 8.0 / 255.0) {
  return {"pgd_s", eps, 20, 2.0 / 255.0, AttackObjective::cross_entropy_vs_label, true};
}
inline AttackSpec pgd_t_spec(double eps = 8.0 / 255.0) {
  return {"pgd_t", eps, 20, 0.003, AttackObjective::cross_entropy_vs_label, true};
}
// Training-time inner maximization: PGD-10 against the KL between the
// student on x' and the teacher on x.
inline AttackSpec train_attack_spec(double eps = 8.0 / 255.0) {
  return {"train_pgd", eps, 10, 2.0 / 255.0, AttackObjective::kl_vs_teacher, true};
}

namespace detail {

// sign with sign(0) = 0
template <class T>
inline T sgn(T v) {
  return (v > T(0)) - (v < T(0));
}

// Gradient of the attack objective with respect to the logits, one row per
// example, computed in double.
template <class T>
std::vector<std::vector<double>> objective_logit_grad(const Tensor<T>& logits,
                                                      const std::vector<int>& labels,
                                                      const ProbBatch* teacher_probs,
                                                      AttackObjective objective) {
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  std::vector<std::vector<double>> g(n, std::vector<double>(k));
  std::vector<double> z(k), s(k);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < k; ++j) z[j] = static_cast<double>(logits.at2(i, j));
    softmax(z.data(), k, s.data());
    if (objective == AttackObjective::cross_entropy_vs_label) {
      const int y = labels[i];
      if (y < 0 || static_cast<std::size_t>(y) >= k)
        throw InvalidInputError("attack: label out of range");
      for (std::size_t j = 0; j < k; ++j) g[i][j] = s[j] - (j == static_cast<std::size_t>(y));
    } else {
      // d/dz KL(softmax(z) || t) = s .* (log(s/t) - sum(s .* log(s/t)))
      const std::vector<double>& t = (*teacher_probs)[i];
      double mean = 0;
      std::vector<double> lr(k);
      for (std::size_t j = 0; j < k; ++j) {
        lr[j] = std::log(std::max(s[j], 1e-12) / std::max(t[j], 1e-12));
        mean += s[j] * lr[j];
      }
      for (std::size_t j = 0; j < k; ++j) g[i][j] = s[j] * (lr[j] - mean);
    }
  }
  return g;
}

// Project a candidate value into the eps-ball around the source pixel and
// the [0,1] box. The clamp is computed in double and the cast result is
// nudged back inside the ball, so the l-inf bound holds in the storage type
// as well, not just up to float rounding.
template <class T>
T project_pixel(double v, T src, double eps) {
  const double lo = static_cast<double>(src) - eps;
  const double hi = static_cast<double>(src) + eps;
  if (v < lo) v = lo;
  if (v > hi) v = hi;
  if (v < 0.0) v = 0.0;
  if (v > 1.0) v = 1.0;
  T out = static_cast<T>(v);
  while (static_cast<double>(out) > hi || static_cast<double>(out) < lo)
    out = std::nextafter(out, src);
  return out;
}

template <class T>
void ascend_and_project(Tensor<T>& xadv, const Tensor<T>& x, const Tensor<T>& grad, double alpha,
                        double eps) {
  if (!grad.all_finite()) throw NumericError("attack: non-finite input gradient");
  for (std::size_t i = 0; i < xadv.size(); ++i) {
    const double v = static_cast<double>(xadv[i]) + alpha * static_cast<double>(sgn(grad[i]));
    xadv[i] = project_pixel(v, x[i], eps);
  }
}

}  // namespace detail

// Projected gradient descent in the l-inf ball. `labels` drives the
// cross-entropy objective, `teacher_probs` the KL objective; the unused one
// may be empty/null. The model is evaluated read-only.
template <class T>
Tensor<T> pgd(Model<T>& model, const Tensor<T>& x, const std::vector<int>& labels,
              const ProbBatch* teacher_probs, const AttackSpec& spec, RngStream* rng = nullptr) {
  spec.validate();
  if (spec.objective == AttackObjective::cross_entropy_vs_label && labels.size() != x.dim(0))
    throw InvalidInputError("pgd: one label per image required");
  if (spec.objective == AttackObjective::kl_vs_teacher &&
      (!teacher_probs || teacher_probs->size() != x.dim(0)))
    throw InvalidInputError("pgd: teacher probabilities required for the KL objective");

  Tensor<T> xadv = x;
  if (spec.random_start && rng) {
    for (std::size_t i = 0; i < xadv.size(); ++i) {
      const double v =
          static_cast<double>(x[i]) + rng->uniform(-spec.epsilon, spec.epsilon);
      xadv[i] = detail::project_pixel(v, x[i], spec.epsilon);
    }
  }
  for (int step = 0; step < spec.steps; ++step) {
    Tensor<T> logits = model.forward(xadv, false);
    auto g = detail::objective_logit_grad(logits, labels, teacher_probs, spec.objective);
    Tensor<T> dlogits(logits.shape());
    for (std::size_t i = 0; i < logits.dim(0); ++i)
      for (std::size_t j = 0; j < logits.dim(1); ++j)
        dlogits.at2(i, j) = static_cast<T>(g[i][j]);
    Tensor<T> gin = model.backward(dlogits, false);
    detail::ascend_and_project(xadv, x, gin, spec.step_size, spec.epsilon);
  }
  return xadv;
}

// Single-step sign attack on the cross-entropy; identical arithmetic to
// 1-step PGD with step size eps and no random start.
template <class T>
Tensor<T> fgsm(Model<T>& model, const Tensor<T>& x, const std::vector<int>& labels, double eps) {
  if (labels.size() != x.dim(0)) throw InvalidInputError("fgsm: one label per image required");
  if (!(eps >= 0.0 && eps <= 1.0)) throw InvalidInputError("fgsm: epsilon must lie in [0,1]");
  Tensor<T> xadv = x;
  Tensor<T> logits = model.forward(xadv, false);
  auto g = detail::objective_logit_grad(logits, labels, nullptr,
                                        AttackObjective::cross_entropy_vs_label);
  Tensor<T> dlogits(logits.shape());
  for (std::size_t i = 0; i < logits.dim(0); ++i)
    for (std::size_t j = 0; j < logits.dim(1); ++j) dlogits.at2(i, j) = static_cast<T>(g[i][j]);
  Tensor<T> gin = model.backward(dlogits, false);
  detail::ascend_and_project(xadv, x, gin, eps, eps);
  return xadv;
}

// Training-time adversary: maximize KL(student(x') || teacher(x)) with PGD.
// The teacher sees the natural batch only and is never written to.
template <class T>
Tensor<T> training_adversary(Model<T>& student, Model<T>& teacher, const Tensor<T>& x,
                             const AttackSpec& spec, RngStream* rng = nullptr) {
  Tensor<T> tlogits = teacher.forward(x, false);
  ProbBatch tprobs(x.dim(0));
  const std::size_t k = tlogits.dim(1);
  for (std::size_t i = 0; i < x.dim(0); ++i) {
    std::vector<double> z(k);
    for (std::size_t j = 0; j < k; ++j) z[j] = static_cast<double>(tlogits.at2(i, j));
    tprobs[i] = softmax(z);
  }
  AttackSpec kl_spec = spec;
  kl_spec.objective = AttackObjective::kl_vs_teacher;
  return pgd(student, x, {}, &tprobs, kl_spec, rng);
}

}  // namespace crdnd
