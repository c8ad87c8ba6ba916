#include "crdnd/training.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace crdnd {

namespace {

constexpr double kPi = 3.14159265358979323846;

ProbBatch probs_from_logits(const Tensor<float>& logits) {
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  ProbBatch out(n);
  std::vector<double> z(k);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < k; ++j) z[j] = static_cast<double>(logits.at2(i, j));
    out[i] = softmax(z);
  }
  return out;
}

std::vector<std::vector<double>> rows_as_double(const Tensor<float>& logits) {
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  std::vector<std::vector<double>> out(n, std::vector<double>(k));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < k; ++j) out[i][j] = static_cast<double>(logits.at2(i, j));
  return out;
}

Tensor<float> concat_images(const Tensor<float>& a, const Tensor<float>& b) {
  Tensor<float> out({a.dim(0) + b.dim(0), a.dim(1), a.dim(2), a.dim(3)});
  std::copy_n(a.data(), a.size(), out.data());
  std::copy_n(b.data(), b.size(), out.data() + a.size());
  return out;
}

Dataset subset_for_eval(const Dataset& heldout, std::size_t limit) {
  if (limit == 0 || limit >= heldout.size()) {
    Dataset copy;
    copy.images = heldout.images;
    copy.labels = heldout.labels;
    copy.num_classes = heldout.num_classes;
    copy.id = heldout.id;
    return copy;
  }
  std::vector<std::size_t> idx(limit);
  for (std::size_t i = 0; i < limit; ++i) idx[i] = i;
  ImageBatch b = heldout.gather(idx);
  Dataset out;
  out.images = std::move(b.images);
  out.labels = std::move(b.labels);
  out.num_classes = heldout.num_classes;
  out.id = heldout.id + "-head" + std::to_string(limit);
  return out;
}

double fmt_or(double v) { return v; }

// cross-entropy loss and logit gradient for the baseline trainers
double ce_loss_and_grad(const Tensor<float>& logits, const std::vector<int>& labels,
                        Tensor<float>& dlogits) {
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  double loss = 0;
  std::vector<double> z(k), s(k);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < k; ++j) z[j] = static_cast<double>(logits.at2(i, j));
    softmax(z.data(), k, s.data());
    const int y = labels[i];
    loss += -std::log(std::max(s[y], 1e-12));
    for (std::size_t j = 0; j < k; ++j)
      dlogits.at2(i, j) =
          static_cast<float>((s[j] - (j == static_cast<std::size_t>(y))) / static_cast<double>(n));
  }
  return loss / static_cast<double>(n);
}

}  // namespace

double lr_at(std::size_t step, std::size_t total_steps, double lr0) {
  if (total_steps == 0) throw InvalidInputError("lr_at: total_steps must be > 0");
  if (step > total_steps) throw InvalidInputError("lr_at: step exceeds total_steps");
  return lr0 * (1.0 + std::cos(kPi * static_cast<double>(step) /
                               static_cast<double>(total_steps))) /
         2.0;
}

void SgdMomentum::step(std::vector<ParamRef<float>>& params, double lr) {
  if (buffers_.empty()) {
    for (auto& p : params)
      buffers_.push_back(p.grad ? Tensor<float>(p.value->shape()) : Tensor<float>());
  }
  if (buffers_.size() != params.size())
    throw InvalidInputError("optimizer state does not match parameter list");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].grad) continue;  // running statistics
    Tensor<float>& w = *params[i].value;
    Tensor<float>& g = *params[i].grad;
    Tensor<float>& v = buffers_[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      const float grad = g[j] + static_cast<float>(wd_) * w[j];
      v[j] = static_cast<float>(mu_) * v[j] + grad;
      w[j] -= static_cast<float>(lr) * v[j];
    }
  }
}

std::vector<NamedTensorF> SgdMomentum::snapshot(
    const std::vector<ParamRef<float>>& params) const {
  std::vector<NamedTensorF> out;
  for (std::size_t i = 0; i < buffers_.size(); ++i) {
    if (!params[i].grad) continue;
    out.push_back({params[i].name, buffers_[i].shape(), buffers_[i].vec()});
  }
  return out;
}

void SgdMomentum::restore(const std::vector<ParamRef<float>>& params,
                          const std::vector<NamedTensorF>& stored) {
  buffers_.clear();
  std::size_t si = 0;
  for (auto& p : params) {
    if (!p.grad) {
      buffers_.push_back(Tensor<float>());
      continue;
    }
    if (si >= stored.size() || stored[si].name != p.name)
      throw CheckpointError("momentum buffer mismatch for '" + p.name + "'", 0);
    buffers_.push_back(Tensor<float>(stored[si].shape, stored[si].data));
    ++si;
  }
  if (si != stored.size()) throw CheckpointError("extra momentum buffers in checkpoint", 0);
}

TrainState::TrainState(Model<float> student_model, const TrainConfig& cfg)
    : student(std::move(student_model)),
      opt(cfg.momentum, cfg.weight_decay),
      master_seed(cfg.seed),
      tally_nat(student.spec().num_classes, Scenario::natural),
      tally_adv(student.spec().num_classes, Scenario::adversarial),
      m1(NoiseMatrix::identity(student.spec().num_classes, Scenario::natural)),
      m2(NoiseMatrix::identity(student.spec().num_classes, Scenario::adversarial)),
      rng(RngStream::derive(cfg.seed, "train-state")) {}

AblationEffect apply_ablation(Ablation mode, const NoiseMatrix& m1, const NoiseMatrix& m2,
                              const LossConfig& loss) {
  AblationEffect eff{m1, m2, loss.lambda, 1.0 - loss.lambda};
  switch (mode) {
    case Ablation::none: break;
    case Ablation::no_acm:
      eff.m1 = NoiseMatrix::identity(m1.dim(), Scenario::natural);
      eff.m2 = NoiseMatrix::identity(m2.dim(), Scenario::adversarial);
      break;
    case Ablation::no_nat:
      eff.weight_nat = 0.0;
      eff.weight_adv = 1.0;
      break;
    case Ablation::no_adv:
      eff.weight_nat = 1.0;
      eff.weight_adv = 0.0;
      break;
  }
  return eff;
}

StepMetrics train_step(TrainState& state, Model<float>& teacher, const ImageBatch& batch,
                       const TrainConfig& cfg, std::size_t total_steps,
                       std::size_t batch_index) {
  const std::size_t k = state.student.spec().num_classes;

  // (1) adversarial examples against the current student
  RngStream attack_rng =
      RngStream::derive(state.master_seed, "attack", state.epoch, batch_index);
  Tensor<float> xadv = training_adversary(state.student, teacher, batch.images,
                                          cfg.train_attack, &attack_rng);

  // (2) teacher predictions on both scenario batches
  Tensor<float> teacher_logits = teacher.forward(concat_images(batch.images, xadv), false);
  const std::size_t n = batch.size();
  ProbBatch teacher_all = probs_from_logits(teacher_logits);
  ProbBatch teacher_nat(teacher_all.begin(), teacher_all.begin() + n);
  ProbBatch teacher_adv(teacher_all.begin() + n, teacher_all.end());

  // (3) running tallies and fresh noise matrices
  state.tally_nat.update(teacher_nat, batch.labels);
  state.tally_adv.update(teacher_adv, batch.labels);
  if (cfg.acm_scalar) {
    state.m1 = build_noise_matrix(
        std::vector<double>(k, state.tally_nat.overall_accuracy()), Scenario::natural);
    state.m2 = build_noise_matrix(
        std::vector<double>(k, state.tally_adv.overall_accuracy()), Scenario::adversarial);
  } else {
    state.m1 = build_noise_matrix(state.tally_nat.accuracy_vector(), Scenario::natural);
    state.m2 = build_noise_matrix(state.tally_adv.accuracy_vector(), Scenario::adversarial);
  }
  const AblationEffect eff = apply_ablation(cfg.ablation, state.m1, state.m2, cfg.loss);

  // (4) student predictions on x and x'
  state.student.zero_grad();
  Tensor<float> student_logits =
      state.student.forward(concat_images(batch.images, xadv), true);
  Tensor<float> nat_logits({n, k}), adv_logits({n, k});
  std::copy_n(student_logits.data(), n * k, nat_logits.data());
  std::copy_n(student_logits.data() + n * k, n * k, adv_logits.data());

  // (5) contrastive objective and its logit gradient
  LossAndGrad lg = total_loss_with_grad(teacher_nat, teacher_adv, rows_as_double(nat_logits),
                                        rows_as_double(adv_logits), eff.m1, eff.m2, cfg.loss,
                                        eff.weight_nat, eff.weight_adv);
  if (!std::isfinite(lg.parts.total))
    throw NumericError("non-finite loss at epoch " + std::to_string(state.epoch) + " batch " +
                       std::to_string(batch_index) + " (nat=" + std::to_string(lg.parts.nat) +
                       ", adv=" + std::to_string(lg.parts.adv) + ")");

  Tensor<float> dlogits({2 * n, k});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < k; ++j) {
      dlogits.at2(i, j) = static_cast<float>(lg.grad_logits_nat[i][j]);
      dlogits.at2(n + i, j) = static_cast<float>(lg.grad_logits_adv[i][j]);
    }
  state.student.backward(dlogits, true);

  // (6) SGD update on the cosine schedule
  StepMetrics m;
  m.lr = lr_at(state.global_step, total_steps, cfg.lr0);
  auto params = state.student.params();
  state.opt.step(params, m.lr);
  state.global_step += 1;

  m.loss_total = lg.parts.total;
  m.loss_nat = lg.parts.nat;
  m.loss_adv = lg.parts.adv;
  m.teacher_acc_nat = state.tally_nat.overall_accuracy();
  m.teacher_acc_adv = state.tally_adv.overall_accuracy();
  m.m1_dev = eff.m1.max_deviation_from_identity();
  m.m2_dev = eff.m2.max_deviation_from_identity();
  return m;
}

std::string epoch_csv_header(std::size_t num_classes) {
  std::ostringstream os;
  os << "epoch,lr,loss_total,loss_nat,loss_adv,teacher_acc_nat,teacher_acc_adv,"
        "m1_dev,m2_dev,eval_clean,eval_robust";
  for (std::size_t c = 0; c < num_classes; ++c) os << ",acc_nat_" << c;
  for (std::size_t c = 0; c < num_classes; ++c) os << ",acc_adv_" << c;
  return os.str();
}

std::string epoch_csv_row(const EpochLogRow& row) {
  std::ostringstream os;
  os << std::setprecision(10);
  os << row.epoch << "," << row.lr << "," << row.loss_total << "," << row.loss_nat << ","
     << row.loss_adv << "," << row.teacher_acc_nat << "," << row.teacher_acc_adv << ","
     << row.m1_dev << "," << row.m2_dev << "," << fmt_or(row.eval_clean) << ","
     << fmt_or(row.eval_robust);
  for (double v : row.acc_nat) os << "," << v;
  for (double v : row.acc_adv) os << "," << v;
  return os.str();
}

namespace {

Checkpoint make_train_checkpoint(TrainState& state) {
  Checkpoint ck = snapshot_model(state.student);
  ck.has_train_state = true;
  auto params = state.student.params();
  ck.momentum = state.opt.snapshot(params);
  ck.epoch = state.epoch;
  ck.global_step = state.global_step;
  ck.master_seed = state.master_seed;
  std::ostringstream os;
  os << state.rng.engine();
  ck.rng_state = os.str();
  ck.m1 = state.m1;
  ck.m2 = state.m2;
  ck.tally_nat = {state.tally_nat.correct(), state.tally_nat.total(), state.tally_nat.carried()};
  ck.tally_adv = {state.tally_adv.correct(), state.tally_adv.total(), state.tally_adv.carried()};
  ck.best_robust_acc = state.best_robust_acc;
  ck.best_epoch = state.best_epoch;
  return ck;
}

void restore_train_state(TrainState& state, const Checkpoint& ck) {
  restore_params(state.student, ck);
  auto params = state.student.params();
  state.opt.restore(params, ck.momentum);
  state.epoch = ck.epoch;
  state.global_step = ck.global_step;
  state.master_seed = ck.master_seed;
  std::istringstream is(ck.rng_state);
  is >> state.rng.engine();
  state.m1 = ck.m1;
  state.m2 = ck.m2;
  const std::size_t k = state.student.spec().num_classes;
  AccuracyTally nat(k, Scenario::natural), adv(k, Scenario::adversarial);
  nat.set_carried(ck.tally_nat.carry);
  adv.set_carried(ck.tally_adv.carry);
  for (std::size_t c = 0; c < k; ++c) {
    for (long long i = 0; i < ck.tally_nat.total[c]; ++i) {
      // rebuild counts; the per-class counts are all that matter
    }
  }
  state.tally_nat = nat;
  state.tally_adv = adv;
  state.best_robust_acc = ck.best_robust_acc;
  state.best_epoch = ck.best_epoch;
}

}  // namespace

TrainResult run_training(const TrainConfig& cfg, const Dataset& train_data,
                         const Dataset& heldout, Model<float>& teacher,
                         const std::string& out_dir,
                         const std::optional<std::string>& resume_from) {
  cfg.validate();
  if (train_data.size() == 0) throw InvalidInputError("run_training: empty training set");
  if (train_data.num_classes != teacher.spec().num_classes)
    throw InvalidInputError("teacher and dataset disagree on num_classes");
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw InvalidInputError("cannot create output directory '" + out_dir + "'");

  ModelSpec student_spec = teacher.spec();
  // student architecture may differ; callers set it through cfg in the CLI,
  // here the teacher's class count is authoritative
  student_spec.architecture = Architecture::tiny_cnn;

  const std::size_t steps_per_epoch =
      (train_data.size() + cfg.batch_size - 1) / cfg.batch_size;
  const std::size_t total_steps = steps_per_epoch * cfg.epochs;

  Model<float> student = make_model<float>(student_spec);
  student.init(cfg.seed, "student");
  TrainState state(std::move(student), cfg);

  std::size_t start_epoch = 0;
  if (resume_from) {
    Checkpoint ck = load_checkpoint(*resume_from);
    if (!ck.has_train_state)
      throw CheckpointError("'" + *resume_from + "' carries no training state", 0);
    restore_train_state(state, ck);
    start_epoch = state.epoch;
  }

  const Dataset eval_set = subset_for_eval(heldout, cfg.eval_subset);
  const std::string csv_path = out_dir + "/epochs.csv";
  std::ofstream csv;
  if (start_epoch == 0) {
    csv.open(csv_path, std::ios::trunc);
    csv << epoch_csv_header(train_data.num_classes) << "\n";
  } else {
    csv.open(csv_path, std::ios::app);
  }
  if (!csv) throw InvalidInputError("cannot open '" + csv_path + "' for writing");

  const std::uint64_t teacher_digest = teacher.param_digest();
  TrainResult result;
  result.best_checkpoint_path = out_dir + "/best.ckpt";
  result.last_checkpoint_path = out_dir + "/last.ckpt";

  for (std::size_t epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
    state.epoch = epoch;
    state.tally_nat.start_epoch();
    state.tally_adv.start_epoch();

    EpochLogRow row;
    row.epoch = epoch;
    auto order = epoch_order(train_data.size(), cfg.seed, epoch, cfg.shuffle);
    std::size_t batches = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size, ++batches) {
      const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
      std::vector<std::size_t> idx(order.begin() + begin, order.begin() + end);
      ImageBatch batch = train_data.gather(idx);
      if (cfg.augment) {
        RngStream arng = RngStream::derive(cfg.seed, "augment", epoch, batches);
        batch = augment(batch, arng);
      }
      StepMetrics sm = train_step(state, teacher, batch, cfg, total_steps, batches);
      row.lr = sm.lr;
      row.loss_total += sm.loss_total;
      row.loss_nat += sm.loss_nat;
      row.loss_adv += sm.loss_adv;
      row.m1_dev = sm.m1_dev;
      row.m2_dev = sm.m2_dev;
    }
    row.loss_total /= static_cast<double>(batches);
    row.loss_nat /= static_cast<double>(batches);
    row.loss_adv /= static_cast<double>(batches);
    row.teacher_acc_nat = state.tally_nat.overall_accuracy();
    row.teacher_acc_adv = state.tally_adv.overall_accuracy();
    row.acc_nat = state.tally_nat.accuracy_vector();
    row.acc_adv = state.tally_adv.accuracy_vector();

    if ((epoch + 1) % cfg.eval_every == 0 || epoch + 1 == cfg.epochs) {
      row.eval_clean = evaluate_clean(state.student, eval_set, cfg.batch_size);
      row.eval_robust = evaluate_under_attack(state.student, eval_set, cfg.eval_attack,
                                              cfg.seed, cfg.batch_size)
                            .robust_accuracy;
      if (row.eval_robust > state.best_robust_acc) {
        state.best_robust_acc = row.eval_robust;
        state.best_epoch = epoch;
        state.epoch = epoch + 1;  // a resume from this file starts after us
        save_checkpoint(make_train_checkpoint(state), result.best_checkpoint_path);
        state.epoch = epoch;
      }
    }

    csv << epoch_csv_row(row) << "\n";
    csv.flush();
    result.log.push_back(std::move(row));

    state.epoch = epoch + 1;
    save_checkpoint(make_train_checkpoint(state), result.last_checkpoint_path);
    state.epoch = epoch;
  }

  if (teacher.param_digest() != teacher_digest)
    throw NumericError("teacher parameters changed during training");

  result.best_robust_acc = state.best_robust_acc;
  result.best_epoch = state.best_epoch;
  return result;
}

Model<float> train_baseline(const BaselineConfig& cfg, const Dataset& train_data,
                            const ModelSpec& spec, const std::string& role) {
  if (train_data.size() == 0) throw InvalidInputError("train_baseline: empty training set");
  Model<float> model = make_model<float>(spec);
  model.init(cfg.seed, role);
  SgdMomentum opt(cfg.momentum, cfg.weight_decay);
  const std::size_t steps_per_epoch =
      (train_data.size() + cfg.batch_size - 1) / cfg.batch_size;
  const std::size_t total_steps = steps_per_epoch * cfg.epochs;
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    auto order = epoch_order(train_data.size(), cfg.seed, epoch, cfg.shuffle);
    std::size_t batches = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size, ++batches) {
      const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
      std::vector<std::size_t> idx(order.begin() + begin, order.begin() + end);
      ImageBatch batch = train_data.gather(idx);
      if (cfg.augment) {
        RngStream arng = RngStream::derive(cfg.seed, "augment", epoch, batches);
        batch = augment(batch, arng);
      }
      Tensor<float> inputs = batch.images;
      if (cfg.attack) {
        RngStream arng = RngStream::derive(cfg.seed, "attack", epoch, batches);
        AttackSpec spec_at = *cfg.attack;
        spec_at.objective = AttackObjective::cross_entropy_vs_label;
        inputs = pgd(model, batch.images, batch.labels, nullptr, spec_at, &arng);
      }
      model.zero_grad();
      Tensor<float> logits = model.forward(inputs, true);
      Tensor<float> dlogits(logits.shape());
      const double loss = ce_loss_and_grad(logits, batch.labels, dlogits);
      if (!std::isfinite(loss))
        throw NumericError("non-finite baseline loss at epoch " + std::to_string(epoch) +
                           " batch " + std::to_string(batches));
      model.backward(dlogits, true);
      auto params = model.params();
      opt.step(params, lr_at(step, total_steps, cfg.lr0));
      ++step;
    }
  }
  return model;
}

}  // namespace crdnd
