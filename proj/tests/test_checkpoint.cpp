#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "crdnd/checkpoint.hpp"
#include "test_util.hpp"

using namespace crdnd;
namespace fs = std::filesystem;

namespace {

fs::path tmp(const std::string& name) {
  auto d = fs::temp_directory_path() / "crdnd_ckpt_test";
  fs::create_directories(d);
  return d / name;
}

}  // namespace

TEST_CASE("model round trip is bit exact") {
  ModelSpec spec{Architecture::tiny_cnn, 10, 3, 32, 32};
  auto model = make_model<float>(spec);
  model.init(99, "teacher");
  const auto digest = model.param_digest();

  auto ck = snapshot_model(model);
  const auto path = tmp("model.ckpt").string();
  save_checkpoint(ck, path);

  auto loaded = load_checkpoint(path);
  CHECK(loaded.spec == spec);
  CHECK_FALSE(loaded.has_train_state);
  auto restored = model_from_checkpoint(loaded, false);
  CHECK(restored.param_digest() == digest);
  CHECK_FALSE(restored.trainable());
}

TEST_CASE("train state round trip preserves every numeric payload") {
  ModelSpec spec{Architecture::tiny_cnn, 4, 3, 32, 32};
  auto model = make_model<float>(spec);
  model.init(5, "student");

  Checkpoint ck = snapshot_model(model);
  ck.has_train_state = true;
  ck.momentum.push_back({"fc.weight", {4, 32}, std::vector<float>(128, 0.125f)});
  ck.epoch = 7;
  ck.global_step = 112;
  ck.master_seed = 424242;
  RngStream rng = RngStream::derive(1, "x");
  rng.next_u32();
  std::ostringstream os;
  os << rng.engine();
  ck.rng_state = os.str();
  ck.m1 = build_noise_matrix({0.9, 0.8, 0.7, 0.6}, Scenario::natural);
  ck.m2 = build_noise_matrix({0.5, 0.4, 0.3, 0.2}, Scenario::adversarial);
  ck.tally_nat = {{1, 2, 3, 4}, {5, 6, 7, 8}, {0.1, 0.2, 0.3, 0.4}};
  ck.tally_adv = {{0, 0, 1, 1}, {2, 2, 2, 2}, {1.0, 1.0, 0.5, 0.5}};
  ck.best_robust_acc = 61.25;
  ck.best_epoch = 3;

  const auto path = tmp("train.ckpt").string();
  save_checkpoint(ck, path);
  auto back = load_checkpoint(path);

  CHECK(back.has_train_state);
  CHECK(back.epoch == 7);
  CHECK(back.global_step == 112);
  CHECK(back.master_seed == 424242);
  CHECK(back.rng_state == ck.rng_state);
  CHECK(back.momentum.size() == 1);
  CHECK(back.momentum[0].name == "fc.weight");
  CHECK(back.momentum[0].data == ck.momentum[0].data);
  CHECK(back.m1.flat() == ck.m1.flat());
  CHECK(back.m2.flat() == ck.m2.flat());
  CHECK(back.m2.scenario() == Scenario::adversarial);
  CHECK(back.tally_nat.correct == ck.tally_nat.correct);
  CHECK(back.tally_adv.carry == ck.tally_adv.carry);
  CHECK(back.best_robust_acc == 61.25);
  CHECK(back.best_epoch == 3);

  // the restored engine continues the stream identically
  std::istringstream is(back.rng_state);
  RngStream other;
  is >> other.engine();
  CHECK(other.next_u32() == rng.next_u32());
}

TEST_CASE("mismatched num_classes is rejected") {
  ModelSpec spec{Architecture::tiny_cnn, 10, 3, 32, 32};
  auto model = make_model<float>(spec);
  model.init(3, "student");
  const auto path = tmp("k10.ckpt").string();
  save_checkpoint(snapshot_model(model), path);
  auto ck = load_checkpoint(path);
  CHECK_THROWS_AS(model_from_checkpoint(ck, true, 100), CheckpointError);
  CHECK_NOTHROW(model_from_checkpoint(ck, true, 10));
}

TEST_CASE("corrupt and truncated files fail with offsets") {
  ModelSpec spec{Architecture::tiny_cnn, 4, 3, 32, 32};
  auto model = make_model<float>(spec);
  model.init(8, "student");
  const auto path = tmp("whole.ckpt").string();
  save_checkpoint(snapshot_model(model), path);

  std::ifstream in(path, std::ios::binary);
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();

  // truncation
  const auto trunc = tmp("trunc.ckpt").string();
  std::ofstream(trunc, std::ios::binary).write(bytes.data(), bytes.size() / 2);
  try {
    load_checkpoint(trunc);
    FAIL("expected CheckpointError");
  } catch (const CheckpointError& e) {
    CHECK(e.offset() > 0);
    CHECK(e.offset() <= bytes.size() / 2);
  }

  // bad magic
  auto corrupt = bytes;
  corrupt[0] = 'X';
  const auto bad = tmp("bad.ckpt").string();
  std::ofstream(bad, std::ios::binary).write(corrupt.data(), corrupt.size());
  CHECK_THROWS_AS(load_checkpoint(bad), CheckpointError);

  // trailing garbage
  auto extended = bytes;
  extended.push_back('z');
  const auto extra = tmp("extra.ckpt").string();
  std::ofstream(extra, std::ios::binary).write(extended.data(), extended.size());
  CHECK_THROWS_AS(load_checkpoint(extra), CheckpointError);

  CHECK_THROWS_AS(load_checkpoint(tmp("missing.ckpt").string()), CheckpointError);
}
