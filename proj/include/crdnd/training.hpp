#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "crdnd/attacks.hpp"
#include "crdnd/checkpoint.hpp"
#include "crdnd/data.hpp"
#include "crdnd/evaluation.hpp"
#include "crdnd/losses.hpp"
#include "crdnd/model.hpp"
#include "crdnd/noise.hpp"

namespace crdnd {

enum class Ablation { none, no_acm, no_nat, no_adv };

inline std::string to_string(Ablation a) {
  switch (a) {
    case Ablation::none: return "none";
    case Ablation::no_acm: return "no_acm";
    case Ablation::no_nat: return "no_nat";
    case Ablation::no_adv: return "no_adv";
  }
  return "?";
}

inline Ablation parse_ablation(const std::string& s) {
  if (s == "none") return Ablation::none;
  if (s == "no_acm") return Ablation::no_acm;
  if (s == "no_nat") return Ablation::no_nat;
  if (s == "no_adv") return Ablation::no_adv;
  throw InvalidInputError("unknown ablation mode '" + s + "'");
}

struct TrainConfig {
  Architecture student_arch = Architecture::tiny_cnn;
  std::size_t epochs = 300;
  std::size_t batch_size = 128;
  double lr0 = 0.1;
  double momentum = 0.9;
  double weight_decay = 2e-4;
  LossConfig loss;                             // lambda=0.2, tau1=tau2=0.5
  AttackSpec train_attack = train_attack_spec();
  AttackSpec eval_attack = pgd_t_spec();       // best-checkpoint selection
  std::uint64_t seed = 0;
  Ablation ablation = Ablation::none;
  bool shuffle = true;
  bool augment = false;
  // measure one pooled teacher accuracy instead of per-class values
  bool acm_scalar = false;
  std::size_t eval_every = 1;
  std::size_t eval_subset = 0;  // 0 = whole held-out set

  void validate() const {
    if (epochs < 1) throw InvalidInputError("epochs must be >= 1");
    if (batch_size < 1) throw InvalidInputError("batch_size must be >= 1");
    if (!(lr0 > 0)) throw InvalidInputError("lr0 must be > 0");
    loss.validate();
    train_attack.validate();
    eval_attack.validate();
  }
};

// Cosine-annealed learning rate over T total steps.
double lr_at(std::size_t step, std::size_t total_steps, double lr0);

// SGD with classical momentum and decoupled-in-name-only weight decay
// (decay is added to the gradient, the usual convention).
class SgdMomentum {
 public:
  SgdMomentum(double momentum, double weight_decay) : mu_(momentum), wd_(weight_decay) {}

  void step(std::vector<ParamRef<float>>& params, double lr);

  std::vector<NamedTensorF> snapshot(const std::vector<ParamRef<float>>& params) const;
  void restore(const std::vector<ParamRef<float>>& params,
               const std::vector<NamedTensorF>& buffers);

 private:
  double mu_, wd_;
  std::vector<Tensor<float>> buffers_;
};

struct TrainState {
  Model<float> student;
  SgdMomentum opt;
  std::size_t epoch = 0;
  std::size_t global_step = 0;
  std::uint64_t master_seed = 0;
  AccuracyTally tally_nat;
  AccuracyTally tally_adv;
  NoiseMatrix m1, m2;
  RngStream rng;
  double best_robust_acc = -1.0;
  std::size_t best_epoch = 0;

  TrainState(Model<float> student_model, const TrainConfig& cfg);
};

// Effective matrices and loss weights for one training step under the given
// ablation mode.
struct AblationEffect {
  NoiseMatrix m1, m2;
  double weight_nat = 0.2, weight_adv = 0.8;
};
AblationEffect apply_ablation(Ablation mode, const NoiseMatrix& m1, const NoiseMatrix& m2,
                              const LossConfig& loss);

struct StepMetrics {
  double lr = 0;
  double loss_total = 0, loss_nat = 0, loss_adv = 0;
  double teacher_acc_nat = 0, teacher_acc_adv = 0;
  double m1_dev = 0, m2_dev = 0;  // ||M - I||_inf of the effective matrices
};

// One CRDND step: generate x', tally the teacher on x and x', rebuild
// M1/M2 from the running tallies, compute the contrastive objective on the
// compensated student predictions and apply one SGD update.
StepMetrics train_step(TrainState& state, Model<float>& teacher, const ImageBatch& batch,
                       const TrainConfig& cfg, std::size_t total_steps,
                       std::size_t batch_index);

struct EpochLogRow {
  std::size_t epoch = 0;
  double lr = 0;
  double loss_total = 0, loss_nat = 0, loss_adv = 0;
  double teacher_acc_nat = 0, teacher_acc_adv = 0;
  double m1_dev = 0, m2_dev = 0;
  double eval_clean = -1, eval_robust = -1;
  std::vector<double> acc_nat, acc_adv;  // per-class teacher accuracy
};

std::string epoch_csv_header(std::size_t num_classes);
std::string epoch_csv_row(const EpochLogRow& row);

struct TrainResult {
  std::string best_checkpoint_path;
  std::string last_checkpoint_path;
  double best_robust_acc = 0;
  std::size_t best_epoch = 0;
  std::vector<EpochLogRow> log;
};

// Full CRDND run: per-epoch training, PGD_T selection on the held-out set,
// last/best checkpoints and a per-epoch CSV under out_dir. Resuming from a
// checkpoint continues the schedule and metrics exactly.
TrainResult run_training(const TrainConfig& cfg, const Dataset& train_data,
                         const Dataset& heldout, Model<float>& teacher,
                         const std::string& out_dir,
                         const std::optional<std::string>& resume_from = {});

// Baselines used as comparison points: plain cross-entropy training and
// single-model PGD adversarial training (the bundled desk-scale teacher
// recipe).
struct BaselineConfig {
  std::size_t epochs = 10;
  std::size_t batch_size = 128;
  double lr0 = 0.1;
  double momentum = 0.9;
  double weight_decay = 2e-4;
  std::uint64_t seed = 0;
  bool shuffle = true;
  bool augment = false;
  std::optional<AttackSpec> attack;  // set = adversarial training
};

Model<float> train_baseline(const BaselineConfig& cfg, const Dataset& train_data,
                            const ModelSpec& spec, const std::string& role);

}  // namespace crdnd
