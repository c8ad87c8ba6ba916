#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "crdnd/model.hpp"
#include "crdnd/noise.hpp"

namespace crdnd {

using ProbBatch = std::vector<std::vector<double>>;

// Whether the contrastive similarities act on probabilities (default; the
// noise matrices are column-stochastic and only map the simplex to itself)
// or on raw logits. Logit mode is exposed for experimentation only.
enum class LossSpace { probability, logit };

struct LossConfig {
  double lambda = 0.2;
  double tau1 = 0.5;
  double tau2 = 0.5;
  double cosine_epsilon = 1e-8;
  // The contrastive denominator as written excludes the positive pair; the
  // InfoNCE-style variant that includes it sits behind this switch.
  bool include_positive = false;
  LossSpace space = LossSpace::probability;

  void validate() const {
    if (!(lambda >= 0.0 && lambda <= 1.0))
      throw InvalidInputError("lambda must lie in [0,1]");
    if (!(tau1 > 0.0) || !(tau2 > 0.0)) throw InvalidInputError("temperatures must be > 0");
  }
};

// Per-batch prediction blocks. Student blocks hold raw (pre-compensation)
// probability vectors; each loss denoises the full 2N pool with its own
// scenario matrix, so compensation is applied inside the loss.
struct BatchPredictions {
  ProbBatch teacher_nat;   // f_T(x)
  ProbBatch teacher_adv;   // f_T(x')
  ProbBatch student_nat;   // f_S(x)  (probability space)
  ProbBatch student_adv;   // f_S(x') (probability space)

  std::size_t batch_size() const { return teacher_nat.size(); }
  std::size_t num_classes() const { return teacher_nat.empty() ? 0 : teacher_nat[0].size(); }

  void validate() const {
    const std::size_t n = teacher_nat.size();
    if (n == 0) throw InvalidInputError("empty batch");
    if (teacher_adv.size() != n || student_nat.size() != n || student_adv.size() != n)
      throw InvalidInputError("prediction blocks have unequal lengths");
    const std::size_t k = teacher_nat[0].size();
    for (const ProbBatch* b : {&teacher_nat, &teacher_adv, &student_nat, &student_adv})
      for (const auto& v : *b)
        if (v.size() != k) throw InvalidInputError("prediction vector has wrong length");
  }
};

// Norm-floored cosine: the eps floor only engages for degenerate norms, so
// self-similarity of any probability vector is exactly 1.
inline double cosine_similarity(const std::vector<double>& u, const std::vector<double>& v,
                                double eps = 1e-8) {
  if (u.size() != v.size()) throw InvalidInputError("cosine: dimension mismatch");
  double dot = 0, nu = 0, nv = 0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  nu = std::sqrt(nu);
  nv = std::sqrt(nv);
  if (nu == 0.0 || nv == 0.0) throw NumericError("cosine: zero vector");
  return dot / std::max(nu * nv, eps);
}

namespace detail {

// Plain M * w without the simplex clamp; the loss path must stay exactly
// linear in w for its gradient to be correct, and logit-space vectors may
// legitimately go negative.
inline std::vector<double> matvec(const NoiseMatrix& m, const std::vector<double>& w) {
  const std::size_t k = m.dim();
  std::vector<double> out(k, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    double acc = 0;
    for (std::size_t j = 0; j < k; ++j) acc += m(i, j) * w[j];
    out[i] = acc;
  }
  return out;
}

// Shared machinery for Eq. 4-7: anchors are one teacher block, the pool is
// the M-compensated concatenation [student_nat; student_adv], and anchor i's
// positive sits at pool index i (natural) or N+i (adversarial).
struct ContrastiveCore {
  // pool[m]: compensated pool vectors, m in [0, 2N)
  std::vector<std::vector<double>> pool;
  // cos[m][j], exp[m][j] for anchor j in [0, N)
  std::vector<std::vector<double>> cos, ex;
  std::vector<double> den;  // denominator per anchor
  std::size_t n = 0, k = 0;
  Scenario scenario = Scenario::natural;

  std::size_t pos_index(std::size_t j) const {
    return scenario == Scenario::natural ? j : n + j;
  }
};

inline ContrastiveCore contrastive_forward(const BatchPredictions& preds, Scenario scenario,
                                           const NoiseMatrix& m, double tau,
                                           const LossConfig& cfg) {
  preds.validate();
  ContrastiveCore core;
  core.n = preds.batch_size();
  core.k = preds.num_classes();
  core.scenario = scenario;
  if (m.dim() != core.k) throw InvalidInputError("noise matrix dimension mismatch");

  const ProbBatch& anchors =
      scenario == Scenario::natural ? preds.teacher_nat : preds.teacher_adv;

  core.pool.resize(2 * core.n);
  for (std::size_t i = 0; i < core.n; ++i) {
    core.pool[i] = matvec(m, preds.student_nat[i]);
    core.pool[core.n + i] = matvec(m, preds.student_adv[i]);
  }

  core.cos.assign(2 * core.n, std::vector<double>(core.n));
  core.ex.assign(2 * core.n, std::vector<double>(core.n));
  core.den.assign(core.n, 0.0);
  for (std::size_t j = 0; j < core.n; ++j) {
    const std::size_t pos = core.pos_index(j);
    for (std::size_t mm = 0; mm < 2 * core.n; ++mm) {
      core.cos[mm][j] = cosine_similarity(core.pool[mm], anchors[j], cfg.cosine_epsilon);
      core.ex[mm][j] = std::exp(core.cos[mm][j] / tau);
      if (mm != pos || cfg.include_positive) core.den[j] += core.ex[mm][j];
    }
  }
  return core;
}

inline double contrastive_loss_from_core(const ContrastiveCore& core, double tau) {
  double loss = 0;
  for (std::size_t j = 0; j < core.n; ++j)
    loss += std::log(core.den[j]) - core.cos[core.pos_index(j)][j] / tau;
  return loss / static_cast<double>(core.n);
}

// d cos(u, t) / du for the norm-floored quotient. Below the floor the
// denominator is a constant and only the dot term contributes.
inline void add_cos_grad(const std::vector<double>& u, const std::vector<double>& t,
                         double cos_ut, double eps, double coeff, std::vector<double>& acc) {
  double nu = 0, nt = 0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    nu += u[i] * u[i];
    nt += t[i] * t[i];
  }
  nu = std::sqrt(nu);
  nt = std::sqrt(nt);
  if (nu * nt <= eps) {
    for (std::size_t i = 0; i < u.size(); ++i) acc[i] += coeff * t[i] / eps;
    return;
  }
  const double d = nu * nt;
  for (std::size_t i = 0; i < u.size(); ++i)
    acc[i] += coeff * (t[i] / d - cos_ut * nt / (d * nu) * u[i]);
}

// Gradient of the scenario loss with respect to the *raw* pool vectors
// (through M^T). grads has 2N rows of length k, added in place scaled by
// `weight`.
inline void contrastive_grad_from_core(const ContrastiveCore& core, const BatchPredictions& preds,
                                       Scenario scenario, const NoiseMatrix& m, double tau,
                                       const LossConfig& cfg, double weight,
                                       std::vector<std::vector<double>>& grads) {
  const ProbBatch& anchors =
      scenario == Scenario::natural ? preds.teacher_nat : preds.teacher_adv;
  const double invn = 1.0 / static_cast<double>(core.n);
  std::vector<double> gu(core.k);
  for (std::size_t mm = 0; mm < 2 * core.n; ++mm) {
    std::fill(gu.begin(), gu.end(), 0.0);
    for (std::size_t j = 0; j < core.n; ++j) {
      const std::size_t pos = core.pos_index(j);
      double coeff = 0;
      if (mm == pos) {
        coeff = -invn / tau;
        if (cfg.include_positive) coeff += invn / tau * core.ex[mm][j] / core.den[j];
      } else {
        coeff = invn / tau * core.ex[mm][j] / core.den[j];
      }
      add_cos_grad(core.pool[mm], anchors[j], core.cos[mm][j], cfg.cosine_epsilon, coeff, gu);
    }
    // back through u = M w
    for (std::size_t i = 0; i < core.k; ++i) {
      double acc = 0;
      for (std::size_t r = 0; r < core.k; ++r) acc += m(r, i) * gu[r];
      grads[mm][i] += weight * acc;
    }
  }
}

}  // namespace detail

// Eq. 4 / Eq. 6 ratio for one anchor.
inline double contrastive_ratio(std::size_t anchor, Scenario scenario,
                                const BatchPredictions& preds, const NoiseMatrix& m, double tau,
                                const LossConfig& cfg = {}) {
  auto core = detail::contrastive_forward(preds, scenario, m, tau, cfg);
  if (anchor >= core.n) throw InvalidInputError("anchor index out of range");
  return core.ex[core.pos_index(anchor)][anchor] / core.den[anchor];
}

inline double loss_nat(const BatchPredictions& preds, const NoiseMatrix& m1, double tau1,
                       const LossConfig& cfg = {}) {
  auto core = detail::contrastive_forward(preds, Scenario::natural, m1, tau1, cfg);
  return detail::contrastive_loss_from_core(core, tau1);
}

inline double loss_adv(const BatchPredictions& preds, const NoiseMatrix& m2, double tau2,
                       const LossConfig& cfg = {}) {
  auto core = detail::contrastive_forward(preds, Scenario::adversarial, m2, tau2, cfg);
  return detail::contrastive_loss_from_core(core, tau2);
}

struct TotalLossParts {
  double total = 0, nat = 0, adv = 0;
};

inline TotalLossParts total_loss(const BatchPredictions& preds, const NoiseMatrix& m1,
                                 const NoiseMatrix& m2, const LossConfig& cfg,
                                 double weight_nat, double weight_adv) {
  cfg.validate();
  TotalLossParts parts;
  parts.nat = loss_nat(preds, m1, cfg.tau1, cfg);
  parts.adv = loss_adv(preds, m2, cfg.tau2, cfg);
  parts.total = weight_nat * parts.nat + weight_adv * parts.adv;
  return parts;
}

inline TotalLossParts total_loss(const BatchPredictions& preds, const NoiseMatrix& m1,
                                 const NoiseMatrix& m2, const LossConfig& cfg) {
  return total_loss(preds, m1, m2, cfg, cfg.lambda, 1.0 - cfg.lambda);
}

struct LossAndGrad {
  TotalLossParts parts;
  // gradients with respect to the student logit rows
  std::vector<std::vector<double>> grad_logits_nat, grad_logits_adv;
};

// Full training-path objective: student logits -> probabilities ->
// compensation -> contrastive losses, with the analytic gradient back to the
// logits. Ablation weights replace (lambda, 1-lambda) when given.
inline LossAndGrad total_loss_with_grad(const ProbBatch& teacher_nat, const ProbBatch& teacher_adv,
                                        const std::vector<std::vector<double>>& logits_nat,
                                        const std::vector<std::vector<double>>& logits_adv,
                                        const NoiseMatrix& m1, const NoiseMatrix& m2,
                                        const LossConfig& cfg, double weight_nat,
                                        double weight_adv) {
  cfg.validate();
  const std::size_t n = logits_nat.size();
  BatchPredictions preds;
  preds.teacher_nat = teacher_nat;
  preds.teacher_adv = teacher_adv;
  if (cfg.space == LossSpace::probability) {
    preds.student_nat.resize(n);
    preds.student_adv.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      preds.student_nat[i] = softmax(logits_nat[i]);
      preds.student_adv[i] = softmax(logits_adv[i]);
    }
  } else {
    preds.student_nat = logits_nat;
    preds.student_adv = logits_adv;
  }
  preds.validate();
  const std::size_t k = preds.num_classes();

  auto core_nat = detail::contrastive_forward(preds, Scenario::natural, m1, cfg.tau1, cfg);
  auto core_adv = detail::contrastive_forward(preds, Scenario::adversarial, m2, cfg.tau2, cfg);

  LossAndGrad out;
  out.parts.nat = detail::contrastive_loss_from_core(core_nat, cfg.tau1);
  out.parts.adv = detail::contrastive_loss_from_core(core_adv, cfg.tau2);
  out.parts.total = weight_nat * out.parts.nat + weight_adv * out.parts.adv;

  std::vector<std::vector<double>> pool_grads(2 * n, std::vector<double>(k, 0.0));
  detail::contrastive_grad_from_core(core_nat, preds, Scenario::natural, m1, cfg.tau1, cfg,
                                     weight_nat, pool_grads);
  detail::contrastive_grad_from_core(core_adv, preds, Scenario::adversarial, m2, cfg.tau2, cfg,
                                     weight_adv, pool_grads);

  out.grad_logits_nat.assign(n, std::vector<double>(k, 0.0));
  out.grad_logits_adv.assign(n, std::vector<double>(k, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t block = 0; block < 2; ++block) {
      const std::vector<double>& gs = pool_grads[block == 0 ? i : n + i];
      const std::vector<double>& s = block == 0 ? preds.student_nat[i] : preds.student_adv[i];
      std::vector<double>& gz = block == 0 ? out.grad_logits_nat[i] : out.grad_logits_adv[i];
      if (cfg.space == LossSpace::probability) {
        double dot = 0;
        for (std::size_t j = 0; j < k; ++j) dot += gs[j] * s[j];
        for (std::size_t j = 0; j < k; ++j) gz[j] = s[j] * (gs[j] - dot);
      } else {
        gz = gs;
      }
    }
  }
  return out;
}

inline LossAndGrad total_loss_with_grad(const ProbBatch& teacher_nat, const ProbBatch& teacher_adv,
                                        const std::vector<std::vector<double>>& logits_nat,
                                        const std::vector<std::vector<double>>& logits_adv,
                                        const NoiseMatrix& m1, const NoiseMatrix& m2,
                                        const LossConfig& cfg) {
  return total_loss_with_grad(teacher_nat, teacher_adv, logits_nat, logits_adv, m1, m2, cfg,
                              cfg.lambda, 1.0 - cfg.lambda);
}

// Mean KL(teacher || compensated student) over a batch; the pointwise
// distillation distance the contrastive losses replace. Kept as a baseline
// and for ablations. Zero student mass under positive teacher mass is
// clamped at 1e-12; clamp events are counted for the caller to log.
inline double denoised_kd_loss(const ProbBatch& teacher, const ProbBatch& denoised_student,
                               long* clamp_count = nullptr) {
  if (teacher.empty()) throw InvalidInputError("empty batch");
  if (teacher.size() != denoised_student.size())
    throw InvalidInputError("batch length mismatch");
  double total = 0;
  long clamps = 0;
  for (std::size_t i = 0; i < teacher.size(); ++i) {
    if (teacher[i].size() != denoised_student[i].size())
      throw InvalidInputError("vector length mismatch");
    double kl = 0;
    for (std::size_t j = 0; j < teacher[i].size(); ++j) {
      const double t = teacher[i][j];
      if (t <= 0.0) continue;
      double q = denoised_student[i][j];
      if (q < 1e-12) {
        q = 1e-12;
        ++clamps;
      }
      kl += t * std::log(t / q);
    }
    total += kl;
  }
  if (clamp_count) *clamp_count += clamps;
  return total / static_cast<double>(teacher.size());
}

}  // namespace crdnd
