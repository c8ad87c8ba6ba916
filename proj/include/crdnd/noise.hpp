#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "crdnd/common.hpp"

namespace crdnd {

enum class Scenario { natural, adversarial };

inline std::string to_string(Scenario s) {
  return s == Scenario::natural ? "natural" : "adversarial";
}

// Running per-class correct/total counts for the teacher within one epoch.
// Classes with no observations fall back to a carried-forward accuracy
// (1.0 at the start of training, the previous epoch's estimate afterwards).
class AccuracyTally {
 public:
  AccuracyTally(std::size_t num_classes, Scenario scenario);

  // One prediction per example; correct iff argmax(probs) == label, ties to
  // the lowest index. Labels outside [0, k) are rejected.
  void update(const std::vector<std::vector<double>>& teacher_probs,
              const std::vector<int>& labels);
  void update_one(const double* probs, std::size_t k, int label);

  // Reset counts for a new epoch, carrying the current estimate forward as
  // the fallback for still-unseen classes.
  void start_epoch();

  double accuracy(std::size_t cls) const;
  std::vector<double> accuracy_vector() const;
  // Pooled accuracy over all classes seen this epoch (scalar ACM mode).
  double overall_accuracy() const;

  std::size_t num_classes() const { return k_; }
  Scenario scenario() const { return scenario_; }
  const std::vector<long long>& correct() const { return correct_; }
  const std::vector<long long>& total() const { return total_; }
  const std::vector<double>& carried() const { return carry_; }
  void set_carried(const std::vector<double>& carry);
  // checkpoint resume
  void restore(const std::vector<long long>& correct, const std::vector<long long>& total,
               const std::vector<double>& carry);

 private:
  std::size_t k_;
  Scenario scenario_;
  std::vector<long long> correct_, total_;
  std::vector<double> carry_;
};

// Column-stochastic k x k teacher-reliability matrix: diagonal holds the
// per-class accuracy, the rest of each column is the residual mass split
// evenly over the other k-1 classes.
class NoiseMatrix {
 public:
  NoiseMatrix() = default;
  NoiseMatrix(std::size_t k, Scenario scenario);

  static NoiseMatrix identity(std::size_t k, Scenario scenario);

  double operator()(std::size_t i, std::size_t j) const { return m_[i * k_ + j]; }
  double& at(std::size_t i, std::size_t j) { return m_[i * k_ + j]; }
  std::size_t dim() const { return k_; }
  Scenario scenario() const { return scenario_; }
  const std::vector<double>& flat() const { return m_; }
  std::vector<double>& flat() { return m_; }

  std::vector<double> diagonal() const;
  // max_i |M[i][i] - 1| joined with max off-diagonal magnitude; this is
  // ||M - I||_inf for a column-stochastic M restricted per entry.
  double max_deviation_from_identity() const;
  bool is_identity(double tol = 0.0) const;

 private:
  std::size_t k_ = 0;
  Scenario scenario_ = Scenario::natural;
  std::vector<double> m_;
};

NoiseMatrix build_noise_matrix(const std::vector<double>& accuracies, Scenario scenario);

// M * p. Column-stochastic M maps the simplex to itself; tiny negative
// rounding residue is clamped to zero.
std::vector<double> apply_noise(const NoiseMatrix& m, const std::vector<double>& p);

// In-place batched form over row-major (n, k) probability data.
template <class T>
void apply_noise_rows(const NoiseMatrix& m, T* probs, std::size_t n) {
  const std::size_t k = m.dim();
  std::vector<double> tmp(k);
  for (std::size_t r = 0; r < n; ++r) {
    T* row = probs + r * k;
    for (std::size_t i = 0; i < k; ++i) {
      double acc = 0;
      for (std::size_t j = 0; j < k; ++j) acc += m(i, j) * static_cast<double>(row[j]);
      tmp[i] = acc < 0 ? 0 : acc;
    }
    for (std::size_t i = 0; i < k; ++i) row[i] = static_cast<T>(tmp[i]);
  }
}

}  // namespace crdnd
