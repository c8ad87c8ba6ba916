#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "crdnd/model.hpp"
#include "crdnd/noise.hpp"

namespace crdnd {

struct NamedTensorF {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<float> data;
};

struct TallySnapshot {
  std::vector<long long> correct, total;
  std::vector<double> carry;
};

// Everything a training run needs to resume: parameters stored as
// little-endian float32, the optimizer momentum buffers, epoch/step
// counters, the RNG seed plus engine state, both noise matrices with their
// tallies, and the best-so-far selection record.
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  ModelSpec spec;
  std::vector<NamedTensorF> params;

  bool has_train_state = false;
  std::vector<NamedTensorF> momentum;
  std::uint64_t epoch = 0;
  std::uint64_t global_step = 0;
  std::uint64_t master_seed = 0;
  std::string rng_state;
  NoiseMatrix m1, m2;
  TallySnapshot tally_nat, tally_adv;
  double best_robust_acc = -1.0;
  std::uint64_t best_epoch = 0;
};

// Capture the model's spec and parameter tensors (including batch-norm
// running statistics).
Checkpoint snapshot_model(Model<float>& model);

// Copy checkpoint parameters into an already-built model; names and shapes
// must match exactly.
void restore_params(Model<float>& model, const Checkpoint& ck);

// Rebuild the model recorded in the checkpoint. `expected_classes` guards
// against loading a checkpoint into a pipeline with a different label space.
Model<float> model_from_checkpoint(const Checkpoint& ck, bool trainable,
                                   std::optional<std::size_t> expected_classes = {});

void save_checkpoint(const Checkpoint& ck, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace crdnd
