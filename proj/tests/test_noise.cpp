#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "crdnd/noise.hpp"
#include "test_util.hpp"

using namespace crdnd;

TEST_CASE("build_noise_matrix hand values") {
  // perfect teacher -> identity
  auto id = build_noise_matrix({1.0, 1.0, 1.0}, Scenario::natural);
  CHECK(id.is_identity());

  // k=2, a=[0.8, 0.6]
  auto m = build_noise_matrix({0.8, 0.6}, Scenario::natural);
  CHECK(m(0, 0) == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(m(0, 1) == doctest::Approx(0.4).epsilon(1e-15));
  CHECK(m(1, 0) == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(m(1, 1) == doctest::Approx(0.6).epsilon(1e-15));

  // k=3, a=0.5 everywhere -> diagonal 0.5, off-diagonal 0.25
  auto h = build_noise_matrix({0.5, 0.5, 0.5}, Scenario::adversarial);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      CHECK(h(i, j) == doctest::Approx(i == j ? 0.5 : 0.25).epsilon(1e-15));
}

TEST_CASE("build_noise_matrix rejects degenerate input") {
  CHECK_THROWS_AS(build_noise_matrix({0.5}, Scenario::natural), InvalidInputError);
  CHECK_THROWS_AS(build_noise_matrix({0.5, 1.2}, Scenario::natural), InvalidInputError);
  CHECK_THROWS_AS(build_noise_matrix({-0.1, 0.2}, Scenario::natural), InvalidInputError);
}

TEST_CASE("noise matrix columns sum to 1 for random accuracies") {
  RngStream rng = RngStream::derive(17, "acc");
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t k = 2 + rng.uniform_int(9);
    std::vector<double> a(k);
    for (auto& v : a) v = rng.uniform01();
    auto m = build_noise_matrix(a, Scenario::natural);
    for (std::size_t j = 0; j < k; ++j) {
      double col = 0;
      for (std::size_t i = 0; i < k; ++i) {
        col += m(i, j);
        CHECK(m(i, j) >= 0.0);
        CHECK(m(i, j) <= 1.0);
      }
      CHECK(std::abs(col - 1.0) < 1e-9);
    }
  }
}

TEST_CASE("apply_noise identity and hand product") {
  auto id = NoiseMatrix::identity(4, Scenario::natural);
  std::vector<double> p = {0.1, 0.2, 0.3, 0.4};
  auto out = apply_noise(id, p);
  for (int i = 0; i < 4; ++i) CHECK(out[i] == doctest::Approx(p[i]).epsilon(1e-15));

  auto m = build_noise_matrix({0.8, 0.6}, Scenario::natural);
  auto q = apply_noise(m, {1.0, 0.0});
  CHECK(q[0] == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(q[1] == doctest::Approx(0.2).epsilon(1e-15));

  CHECK_THROWS_AS(apply_noise(m, {0.2, 0.3, 0.5}), InvalidInputError);
}

TEST_CASE("apply_noise preserves the simplex") {
  RngStream rng = RngStream::derive(31, "p");
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t k = 2 + rng.uniform_int(7);
    std::vector<double> a(k);
    for (auto& v : a) v = rng.uniform01();
    auto m = build_noise_matrix(a, Scenario::adversarial);
    auto p = test::random_simplex(rng, k);
    auto out = apply_noise(m, p);
    double s = 0;
    for (double v : out) {
      CHECK(v >= 0.0);
      s += v;
    }
    CHECK(std::abs(s - 1.0) < 1e-6);
  }
}

TEST_CASE("tally counts and fallback") {
  AccuracyTally tally(2, Scenario::natural);

  // three correct class-0 predictions
  std::vector<std::vector<double>> probs = {{0.9, 0.1}, {0.8, 0.2}, {0.6, 0.4}};
  tally.update(probs, {0, 0, 0});
  CHECK(tally.correct()[0] == 3);
  CHECK(tally.total()[0] == 3);
  CHECK(tally.accuracy(0) == doctest::Approx(1.0));

  // class 1 example misclassified as class 0
  tally.update({{0.6, 0.4}}, {1});
  CHECK(tally.correct()[1] == 0);
  CHECK(tally.total()[1] == 1);
  CHECK(tally.accuracy(1) == doctest::Approx(0.0));

  // unseen class carries forward: fresh tally -> 1.0
  AccuracyTally fresh(3, Scenario::adversarial);
  CHECK(fresh.accuracy(2) == doctest::Approx(1.0));

  CHECK_THROWS_AS(tally.update({{0.5, 0.5}}, {2}), InvalidInputError);
  CHECK_THROWS_AS(tally.update({{0.5, 0.5}}, {-1}), InvalidInputError);
}

TEST_CASE("argmax ties break to the lowest index") {
  AccuracyTally tally(3, Scenario::natural);
  tally.update({{0.4, 0.4, 0.2}}, {0});
  CHECK(tally.correct()[0] == 1);  // tie between 0 and 1 resolves to 0
  tally.update({{0.4, 0.4, 0.2}}, {1});
  CHECK(tally.correct()[1] == 0);
}

TEST_CASE("tally equals a brute-force recount on a mixed batch") {
  RngStream rng = RngStream::derive(47, "batch");
  const std::size_t k = 5;
  std::vector<std::vector<double>> probs;
  std::vector<int> labels;
  for (int i = 0; i < 10; ++i) {
    probs.push_back(test::random_simplex(rng, k));
    labels.push_back(static_cast<int>(rng.uniform_int(k)));
  }
  AccuracyTally tally(k, Scenario::natural);
  tally.update(probs, labels);

  // independent per-example loop
  std::vector<long long> correct(k, 0), total(k, 0);
  for (std::size_t i = 0; i < probs.size(); ++i) {
    total[labels[i]]++;
    std::size_t best = 0;
    for (std::size_t j = 1; j < k; ++j)
      if (probs[i][j] > probs[i][best]) best = j;
    if (best == static_cast<std::size_t>(labels[i])) correct[labels[i]]++;
  }
  for (std::size_t c = 0; c < k; ++c) {
    CHECK(tally.correct()[c] == correct[c]);
    CHECK(tally.total()[c] == total[c]);
  }
}

TEST_CASE("epoch carryover") {
  AccuracyTally tally(2, Scenario::natural);
  tally.update({{0.9, 0.1}, {0.2, 0.8}, {0.7, 0.3}}, {0, 0, 1});  // a0=0.5, a1=0
  CHECK(tally.accuracy(0) == doctest::Approx(0.5));
  CHECK(tally.accuracy(1) == doctest::Approx(0.0));
  tally.start_epoch();
  CHECK(tally.total()[0] == 0);
  // unseen classes now report last epoch's estimate
  CHECK(tally.accuracy(0) == doctest::Approx(0.5));
  CHECK(tally.accuracy(1) == doctest::Approx(0.0));
  tally.update({{0.1, 0.9}}, {1});
  CHECK(tally.accuracy(1) == doctest::Approx(1.0));
  CHECK(tally.accuracy(0) == doctest::Approx(0.5));
}
