#include "crdnd/noise.hpp"

#include <cmath>

#include "crdnd/model.hpp"

namespace crdnd {

AccuracyTally::AccuracyTally(std::size_t num_classes, Scenario scenario)
    : k_(num_classes),
      scenario_(scenario),
      correct_(num_classes, 0),
      total_(num_classes, 0),
      carry_(num_classes, 1.0) {
  if (k_ < 2) throw InvalidInputError("tally needs at least 2 classes");
}

void AccuracyTally::update_one(const double* probs, std::size_t k, int label) {
  if (k != k_) throw InvalidInputError("tally: probability vector has wrong length");
  if (label < 0 || static_cast<std::size_t>(label) >= k_)
    throw InvalidInputError("tally: label " + std::to_string(label) + " out of range [0," +
                            std::to_string(k_) + ")");
  total_[label] += 1;
  if (argmax(probs, k) == static_cast<std::size_t>(label)) correct_[label] += 1;
}

void AccuracyTally::update(const std::vector<std::vector<double>>& teacher_probs,
                           const std::vector<int>& labels) {
  if (teacher_probs.size() != labels.size())
    throw InvalidInputError("tally: probs/labels length mismatch");
  for (std::size_t i = 0; i < labels.size(); ++i)
    update_one(teacher_probs[i].data(), teacher_probs[i].size(), labels[i]);
}

void AccuracyTally::start_epoch() {
  carry_ = accuracy_vector();
  std::fill(correct_.begin(), correct_.end(), 0);
  std::fill(total_.begin(), total_.end(), 0);
}

double AccuracyTally::accuracy(std::size_t cls) const {
  if (cls >= k_) throw InvalidInputError("tally: class index out of range");
  if (total_[cls] == 0) return carry_[cls];
  return static_cast<double>(correct_[cls]) / static_cast<double>(total_[cls]);
}

std::vector<double> AccuracyTally::accuracy_vector() const {
  std::vector<double> a(k_);
  for (std::size_t i = 0; i < k_; ++i) a[i] = accuracy(i);
  return a;
}

double AccuracyTally::overall_accuracy() const {
  long long c = 0, t = 0;
  for (std::size_t i = 0; i < k_; ++i) {
    c += correct_[i];
    t += total_[i];
  }
  if (t == 0) {
    double s = 0;
    for (double v : carry_) s += v;
    return s / static_cast<double>(k_);
  }
  return static_cast<double>(c) / static_cast<double>(t);
}

void AccuracyTally::set_carried(const std::vector<double>& carry) {
  if (carry.size() != k_) throw InvalidInputError("tally: carried vector has wrong length");
  carry_ = carry;
}

void AccuracyTally::restore(const std::vector<long long>& correct,
                            const std::vector<long long>& total,
                            const std::vector<double>& carry) {
  if (correct.size() != k_ || total.size() != k_ || carry.size() != k_)
    throw InvalidInputError("tally: restore vectors have wrong length");
  for (std::size_t i = 0; i < k_; ++i)
    if (correct[i] < 0 || total[i] < correct[i])
      throw InvalidInputError("tally: inconsistent restored counts");
  correct_ = correct;
  total_ = total;
  carry_ = carry;
}

NoiseMatrix::NoiseMatrix(std::size_t k, Scenario scenario)
    : k_(k), scenario_(scenario), m_(k * k, 0.0) {
  if (k < 2) throw InvalidInputError("noise matrix needs dimension >= 2");
}

NoiseMatrix NoiseMatrix::identity(std::size_t k, Scenario scenario) {
  NoiseMatrix m(k, scenario);
  for (std::size_t i = 0; i < k; ++i) m.at(i, i) = 1.0;
  return m;
}

std::vector<double> NoiseMatrix::diagonal() const {
  std::vector<double> d(k_);
  for (std::size_t i = 0; i < k_; ++i) d[i] = (*this)(i, i);
  return d;
}

double NoiseMatrix::max_deviation_from_identity() const {
  double dev = 0;
  for (std::size_t i = 0; i < k_; ++i)
    for (std::size_t j = 0; j < k_; ++j) {
      const double target = i == j ? 1.0 : 0.0;
      dev = std::max(dev, std::abs((*this)(i, j) - target));
    }
  return dev;
}

bool NoiseMatrix::is_identity(double tol) const { return max_deviation_from_identity() <= tol; }

NoiseMatrix build_noise_matrix(const std::vector<double>& accuracies, Scenario scenario) {
  const std::size_t k = accuracies.size();
  if (k < 2) throw InvalidInputError("build_noise_matrix: need k >= 2 classes");
  for (double a : accuracies)
    if (!(a >= 0.0 && a <= 1.0))
      throw InvalidInputError("build_noise_matrix: accuracy outside [0,1]");
  NoiseMatrix m(k, scenario);
  for (std::size_t j = 0; j < k; ++j) {
    const double off = (1.0 - accuracies[j]) / static_cast<double>(k - 1);
    for (std::size_t i = 0; i < k; ++i) m.at(i, j) = i == j ? accuracies[j] : off;
  }
  return m;
}

std::vector<double> apply_noise(const NoiseMatrix& m, const std::vector<double>& p) {
  if (p.size() != m.dim()) throw InvalidInputError("apply_noise: dimension mismatch");
  std::vector<double> out(p);
  apply_noise_rows(m, out.data(), 1);
  return out;
}

}  // namespace crdnd
