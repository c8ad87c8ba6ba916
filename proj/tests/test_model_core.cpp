#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "crdnd/model.hpp"
#include "test_util.hpp"

using namespace crdnd;

TEST_CASE("softmax basics") {
  auto u = softmax(std::vector<double>{0, 0, 0});
  CHECK(u[0] == doctest::Approx(1.0 / 3).epsilon(1e-12));
  CHECK(u[1] == doctest::Approx(1.0 / 3).epsilon(1e-12));

  auto v = softmax(std::vector<double>{std::log(2.0), 0.0});
  CHECK(v[0] == doctest::Approx(2.0 / 3).epsilon(1e-12));
  CHECK(v[1] == doctest::Approx(1.0 / 3).epsilon(1e-12));

  // shift invariance
  auto a = softmax(std::vector<double>{0.3, -1.2, 2.0});
  auto b = softmax(std::vector<double>{0.3 + 7.5, -1.2 + 7.5, 2.0 + 7.5});
  for (int i = 0; i < 3; ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));

  CHECK_THROWS_AS(softmax(std::vector<double>{1.0, std::nan("")}), NumericError);
  CHECK_THROWS_AS(
      softmax(std::vector<double>{1.0, std::numeric_limits<double>::infinity()}),
      NumericError);
}

TEST_CASE("toy linear model forward values") {
  auto zero = test::make_scalar_toy_model(0.0);
  Tensor<double> x({1, 3, 32, 32});
  x.fill(0.7);
  auto logits = zero.forward(x);
  for (std::size_t i = 0; i < logits.size(); ++i) CHECK(logits[i] == 0.0);

  auto m = test::make_scalar_toy_model(1.0);
  Tensor<double> x2({1, 3, 32, 32});
  x2[0] = 0.5;
  auto l2 = m.forward(x2);
  CHECK(l2.at2(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(l2.at2(0, 1) == doctest::Approx(-0.5).epsilon(1e-15));
}

TEST_CASE("forward shape contract and rejection") {
  ModelSpec spec{Architecture::tiny_cnn, 10, 3, 32, 32};
  auto model = make_model<float>(spec);
  model.init(1234, "student");
  RngStream rng = RngStream::derive(99, "imgs");
  auto x = test::random_images<float>(rng, 5);
  auto logits = model.forward(x);
  REQUIRE(logits.rank() == 2);
  CHECK(logits.dim(0) == 5);
  CHECK(logits.dim(1) == 10);

  Tensor<float> bad({2, 1, 32, 32});
  CHECK_THROWS_AS(model.forward(bad), InvalidInputError);
  Tensor<float> bad2({2, 3, 16, 16});
  CHECK_THROWS_AS(model.forward(bad2), InvalidInputError);
}

TEST_CASE("num_classes invariant") {
  ModelSpec spec{Architecture::tiny_cnn, 1, 3, 32, 32};
  CHECK_THROWS_AS(make_model<float>(spec), InvalidInputError);
}

TEST_CASE("softmax of forward stays on the simplex") {
  ModelSpec spec{Architecture::tiny_cnn, 7, 3, 32, 32};
  auto model = make_model<double>(spec);
  model.init(7, "student");
  RngStream rng = RngStream::derive(3, "imgs");
  for (int rep = 0; rep < 5; ++rep) {
    auto x = test::random_images<double>(rng, 3);
    auto probs = softmax_rows(model.forward(x));
    for (std::size_t i = 0; i < 3; ++i) {
      double s = 0;
      for (std::size_t j = 0; j < 7; ++j) {
        const double p = probs.at2(i, j);
        CHECK(p >= 0.0);
        CHECK(p <= 1.0);
        s += p;
      }
      CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
    }
  }
}

TEST_CASE("tiny-cnn input gradient matches central differences") {
  ModelSpec spec{Architecture::tiny_cnn, 4, 3, 32, 32};
  auto model = make_model<double>(spec);
  model.init(42, "student");
  RngStream rng = RngStream::derive(5, "imgs");
  auto x = test::random_images<double>(rng, 2);

  // scalar probe: r . logits summed over the batch
  std::vector<double> r = {0.37, -1.1, 0.52, 0.9};
  auto eval = [&]() {
    auto logits = model.forward(x);
    double s = 0;
    for (std::size_t i = 0; i < logits.dim(0); ++i)
      for (std::size_t j = 0; j < 4; ++j) s += r[j] * logits.at2(i, j);
    return s;
  };
  auto logits = model.forward(x);
  Tensor<double> dl(logits.shape());
  for (std::size_t i = 0; i < logits.dim(0); ++i)
    for (std::size_t j = 0; j < 4; ++j) dl.at2(i, j) = r[j];
  auto gin = model.backward(dl, false);

  RngStream pick = RngStream::derive(6, "coords");
  double worst = 0;
  const double h = 1e-6;
  for (int t = 0; t < 48; ++t) {
    const std::size_t i = pick.uniform_int(static_cast<std::uint32_t>(x.size()));
    const double orig = x[i];
    x[i] = orig + h;
    const double fp = eval();
    x[i] = orig - h;
    const double fm = eval();
    x[i] = orig;
    const double num = (fp - fm) / (2 * h);
    const double denom = std::max({std::abs(num), std::abs(gin[i]), 1e-8});
    worst = std::max(worst, std::abs(num - gin[i]) / denom);
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("layer parameter gradients match central differences") {
  // conv -> bn -> relu -> pool -> gap-equivalent linear head on small input
  Sequential<double> net;
  net.add("conv", std::make_unique<Conv2d<double>>(2, 3, 3, 1, 1, false));
  net.add("bn", std::make_unique<BatchNorm2d<double>>(3));
  net.add("relu", std::make_unique<ReLU<double>>());
  net.add("pool", std::make_unique<MaxPool2<double>>());
  net.add("flat", std::make_unique<Flatten<double>>());
  net.add("fc", std::make_unique<Linear<double>>(3 * 3 * 3, 4));
  RngStream rng = RngStream::derive(11, "init");
  net.init_params(rng);

  Tensor<double> x({2, 2, 6, 6});
  RngStream xr = RngStream::derive(12, "x");
  for (auto& v : x.vec()) v = xr.uniform01();
  std::vector<double> r = {0.3, -0.7, 1.1, 0.25};

  auto eval = [&]() {
    auto y = net.forward(x, true);
    double s = 0;
    for (std::size_t i = 0; i < y.dim(0); ++i)
      for (std::size_t j = 0; j < 4; ++j) s += r[j] * y.at2(i, j);
    return s;
  };

  std::vector<ParamRef<double>> params;
  net.collect_params("", params);
  for (auto& p : params)
    if (p.grad) p.grad->fill(0.0);
  auto y = net.forward(x, true);
  Tensor<double> dl(y.shape());
  for (std::size_t i = 0; i < y.dim(0); ++i)
    for (std::size_t j = 0; j < 4; ++j) dl.at2(i, j) = r[j];
  net.backward(dl, true);

  // BN running stats drift across evals; exclude them (they carry no grad).
  for (auto& p : params) {
    if (!p.grad) continue;
    std::vector<double>& flat = p.value->vec();
    std::vector<double> analytic = p.grad->vec();
    const double err = test::max_rel_grad_error(flat, eval, analytic, 1e-6);
    INFO("param ", p.name);
    CHECK(err < 1e-4);
  }
}

TEST_CASE("depthwise conv and relu6 gradients") {
  Sequential<double> net;
  net.add("dw", std::make_unique<DepthwiseConv2d<double>>(3, 3, 1, 1));
  net.add("relu6", std::make_unique<ReLU<double>>(6.0));
  net.add("gap", std::make_unique<GlobalAvgPool<double>>());
  net.add("fc", std::make_unique<Linear<double>>(3, 2));
  RngStream rng = RngStream::derive(21, "init");
  net.init_params(rng);

  Tensor<double> x({2, 3, 5, 5});
  RngStream xr = RngStream::derive(22, "x");
  for (auto& v : x.vec()) v = xr.uniform(-1.0, 1.0);

  auto eval = [&]() {
    auto y = net.forward(x, true);
    double s = 0;
    for (std::size_t i = 0; i < y.size(); ++i) s += (i % 2 ? -0.4 : 0.9) * y[i];
    return s;
  };
  std::vector<ParamRef<double>> params;
  net.collect_params("", params);
  for (auto& p : params)
    if (p.grad) p.grad->fill(0.0);
  auto y = net.forward(x, true);
  Tensor<double> dl(y.shape());
  for (std::size_t i = 0; i < dl.size(); ++i) dl[i] = (i % 2 ? -0.4 : 0.9);
  net.backward(dl, true);
  for (auto& p : params) {
    if (!p.grad) continue;
    std::vector<double> analytic = p.grad->vec();
    const double err = test::max_rel_grad_error(p.value->vec(), eval, analytic, 1e-6);
    INFO("param ", p.name);
    CHECK(err < 1e-4);
  }
}

TEST_CASE("resnet18 and mobilenetv2 construct and forward") {
  for (auto arch : {Architecture::resnet18, Architecture::mobilenet_v2}) {
    ModelSpec spec{arch, 10, 3, 32, 32};
    auto model = make_model<float>(spec);
    model.init(5, "student");
    RngStream rng = RngStream::derive(6, "imgs");
    auto x = test::random_images<float>(rng, 2);
    auto logits = model.forward(x);
    CHECK(logits.dim(0) == 2);
    CHECK(logits.dim(1) == 10);
    CHECK(logits.all_finite());
  }
  auto rn = make_model<float>({Architecture::resnet18, 10, 3, 32, 32});
  CHECK(rn.num_params() > 11'000'000);  // standard 32x32 ResNet-18 size
  auto mb = make_model<float>({Architecture::mobilenet_v2, 10, 3, 32, 32});
  CHECK(mb.num_params() > 2'200'000);
}

TEST_CASE("parameter digest is stable and order-sensitive") {
  ModelSpec spec{Architecture::tiny_cnn, 10, 3, 32, 32};
  auto a = make_model<float>(spec);
  a.init(1, "teacher");
  const auto d1 = a.param_digest();
  const auto d2 = a.param_digest();
  CHECK(d1 == d2);
  auto b = make_model<float>(spec);
  b.init(2, "teacher");
  CHECK(b.param_digest() != d1);
}
