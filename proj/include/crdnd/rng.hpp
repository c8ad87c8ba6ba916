#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>

#include "crdnd/common.hpp"

namespace crdnd {

// All randomness in a run is drawn from streams derived from one master
// seed and a stream label, so that any stage (init, augmentation, attack
// random starts, subset selection) can be re-derived independently of how
// much randomness earlier stages consumed. Stream labels in use:
//   "init"          — parameter initialization (per model role)
//   "shuffle"       — per-epoch example order      (index a = epoch)
//   "augment"       — crop/flip decisions          (a = epoch, b = batch)
//   "attack"        — PGD random starts            (a = epoch, b = batch)
//   "toy-template"  — toy dataset class templates  (a = class)
//   "toy-noise"     — toy dataset pixel noise      (a = split, b = example)
//   "subset"        — subset selection
class RngStream {
 public:
  RngStream() : gen_(0) {}

  static RngStream derive(std::uint64_t master_seed, const std::string& label,
                          std::uint64_t a = 0, std::uint64_t b = 0) {
    const std::uint64_t h = fnv1a(label);
    std::seed_seq seq{static_cast<std::uint32_t>(master_seed), static_cast<std::uint32_t>(master_seed >> 32),
                      static_cast<std::uint32_t>(h),           static_cast<std::uint32_t>(h >> 32),
                      static_cast<std::uint32_t>(a),           static_cast<std::uint32_t>(a >> 32),
                      static_cast<std::uint32_t>(b),           static_cast<std::uint32_t>(b >> 32)};
    RngStream s;
    s.gen_.seed(seq);
    return s;
  }

  std::uint32_t next_u32() { return gen_(); }

  // Uniform in [0,1). Hand-rolled from raw bits so values do not depend on
  // the standard library's distribution implementations.
  double uniform01() { return static_cast<double>(gen_()) * (1.0 / 4294967296.0); }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Uniform integer in [0, n).
  std::uint32_t uniform_int(std::uint32_t n) {
    return static_cast<std::uint32_t>(uniform01() * static_cast<double>(n)) % n;
  }

  bool bernoulli(double p) { return uniform01() < p; }

  // Standard normal via Box-Muller.
  double normal() {
    double u1 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  std::mt19937& engine() { return gen_; }
  const std::mt19937& engine() const { return gen_; }

 private:
  std::mt19937 gen_;
};

}  // namespace crdnd
