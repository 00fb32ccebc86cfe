#include <cmath>

#include "doctest.h"
#include "gradcheck.h"
#include "sqdr/error.h"
#include "sqdr/layers.h"
#include "sqdr/optim.h"
#include "support.h"

using namespace sqdr;

namespace {

void CheckKind(const std::function<void()>& f, ErrorKind kind) {
  try {
    f();
    FAIL("no error thrown");
  } catch (const Error& e) {
    CHECK(e.kind() == kind);
  }
}

}  // namespace

TEST_SUITE("nn_core") {

TEST_CASE("patchify examples") {
  Tensor ones({1, 1, 8, 8}, 1.0);
  Tensor w({1, 1, 8, 8}, 1.0);
  CHECK(PatchifyConv(ones, w, Tensor({1}, 0.0))[0] == 64.0);
  Rng rng(1);
  const Tensor x = test::RandomTensor(rng, {1, 1, 64, 104});
  const Tensor zero_w({8, 1, 8, 8}, 0.0);
  const Tensor out = PatchifyConv(x, zero_w, Tensor({8}, 1.5));
  CHECK(out.shape() == std::vector<size_t>{1, 8, 8, 13});
  for (double v : out.data()) CHECK(v == 1.5);
  CheckKind([&] { PatchifyConv(Tensor({1, 1, 60, 104}), zero_w, Tensor({8})); },
            ErrorKind::kShapeMismatch);
}

TEST_CASE("depthwise examples") {
  Rng rng(2);
  const Tensor x = test::RandomTensor(rng, {2, 3, 5, 7});
  Tensor identity({3, 1, 3, 3}, 0.0);
  for (size_t c = 0; c < 3; ++c) identity[c * 9 + 4] = 1.0;
  CHECK(DepthwiseConv3x3(x, identity, Tensor()).vec() == x.vec());

  const Tensor out = DepthwiseConv3x3(Tensor({1, 1, 4, 4}, 1.0), Tensor({1, 1, 3, 3}, 1.0), Tensor());
  CHECK(out.at(0, 0, 1, 1) == 9.0);
  CHECK(out.at(0, 0, 0, 0) == 4.0);
  CHECK(out.at(0, 0, 3, 3) == 4.0);
  CHECK(out.at(0, 0, 0, 2) == 6.0);

  const Tensor w = test::RandomTensor(rng, {3, 1, 3, 3});
  Tensor x2 = x;
  for (size_t n = 0; n < 2; ++n)
    for (size_t h = 0; h < 5; ++h)
      for (size_t v = 0; v < 7; ++v) x2.at(n, 1, h, v) = 0.0;
  const Tensor a = DepthwiseConv3x3(x, w, Tensor()), b = DepthwiseConv3x3(x2, w, Tensor());
  for (size_t n = 0; n < 2; ++n)
    for (size_t c = 0; c < 3; ++c)
      for (size_t h = 0; h < 5; ++h)
        for (size_t v = 0; v < 7; ++v) {
          if (c == 1) CHECK(b.at(n, c, h, v) == 0.0);
          else CHECK(b.at(n, c, h, v) == a.at(n, c, h, v));
        }
}

TEST_CASE("depthwise equals the per-channel dense 2-D convolution oracle") {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const size_t N = 1 + rng.Below(3), C = 1 + rng.Below(6), H = 1 + rng.Below(8), W = 1 + rng.Below(8);
    const Tensor x = test::RandomTensor(rng, {N, C, H, W});
    const Tensor w = test::RandomTensor(rng, {C, 1, 3, 3});
    const Tensor b = test::RandomTensor(rng, {C});
    const Tensor ours = DepthwiseConv3x3(x, w, b);
    for (size_t n = 0; n < N; ++n) {
      for (size_t c = 0; c < C; ++c) {
        // Zero-padded copy of the channel.
        std::vector<double> pad((H + 2) * (W + 2), 0.0);
        for (size_t h = 0; h < H; ++h)
          for (size_t v = 0; v < W; ++v) pad[(h + 1) * (W + 2) + v + 1] = x.at(n, c, h, v);
        for (size_t h = 0; h < H; ++h) {
          for (size_t v = 0; v < W; ++v) {
            double acc = b[c];
            for (size_t ky = 0; ky < 3; ++ky) {
              for (size_t kx = 0; kx < 3; ++kx) {
                const bool inside = h + ky >= 1 && h + ky <= H && v + kx >= 1 && v + kx <= W;
                if (inside) acc += w[c * 9 + ky * 3 + kx] * pad[(h + ky) * (W + 2) + v + kx];
              }
            }
            REQUIRE(ours.at(n, c, h, v) == acc);
          }
        }
      }
    }
  }
}

TEST_CASE("grouped pointwise examples") {
  Rng rng(4);
  const Tensor x = test::RandomTensor(rng, {2, 8, 3, 3});
  const Tensor bias = test::RandomTensor(rng, {8});
  const Tensor out = GroupedPointwise(x, Tensor({8, 1}, 1.0), bias, 8);
  for (size_t n = 0; n < 2; ++n)
    for (size_t c = 0; c < 8; ++c)
      for (size_t h = 0; h < 3; ++h)
        for (size_t v = 0; v < 3; ++v) CHECK(out.at(n, c, h, v) == x.at(n, c, h, v) + bias[c]);

  const Tensor w = test::RandomTensor(rng, {8, 2});
  Tensor x2 = x;
  for (size_t n = 0; n < 2; ++n)
    for (size_t c = 2; c < 4; ++c)
      for (size_t h = 0; h < 3; ++h)
        for (size_t v = 0; v < 3; ++v) x2.at(n, c, h, v) += 1.0;
  const Tensor a = GroupedPointwise(x, w, bias, 4), b = GroupedPointwise(x2, w, bias, 4);
  for (size_t n = 0; n < 2; ++n)
    for (size_t c = 0; c < 8; ++c) {
      const bool changed = a.at(n, c, 1, 1) != b.at(n, c, 1, 1);
      CHECK(changed == (c / 2 == 1));
    }

  PointwiseLayer layer("pw", 24, 24, 8, true);
  CHECK(layer.weight.value.size() + layer.bias->value.size() == 96);
  CheckKind([&] { GroupedPointwise(Tensor({1, 6, 2, 2}), Tensor({6, 1}), Tensor(), 4); },
            ErrorKind::kIndivisibleChannels);
  CheckKind([] { PointwiseLayer("bad", 10, 10, 4, true); }, ErrorKind::kIndivisibleChannels);
}

TEST_CASE("grouped pointwise equals independent dense convolutions on channel slices") {
  Rng rng(5);
  for (size_t g : {1, 2, 4, 8}) {
    const size_t C = 16, N = 2, HW = 12;
    const Tensor x = test::RandomTensor(rng, {N, C, 3, 4});
    const Tensor w = test::RandomTensor(rng, {C, C / g});
    const Tensor b = test::RandomTensor(rng, {C});
    const Tensor ours = GroupedPointwise(x, w, b, g);
    const size_t cg = C / g;
    for (size_t grp = 0; grp < g; ++grp) {
      for (size_t n = 0; n < N; ++n) {
        for (size_t o = 0; o < cg; ++o) {
          for (size_t p = 0; p < HW; ++p) {
            double acc = b[grp * cg + o];
            for (size_t k = 0; k < cg; ++k) {
              acc += w[(grp * cg + o) * cg + k] * x.vec()[(n * C + grp * cg + k) * HW + p];
            }
            REQUIRE(ours.vec()[(n * C + grp * cg + o) * HW + p] == acc);
          }
        }
      }
    }
  }
}

TEST_CASE("batch norm train and eval behaviour") {
  Rng rng(6);
  BatchNormLayer bn("bn", 4);
  const Tensor x = test::RandomTensor(rng, {3, 4, 5, 5}, -3.0, 5.0);
  const Tensor y = bn.Forward(x, Mode::kTrain);
  for (size_t c = 0; c < 4; ++c) {
    double mean = 0.0, var = 0.0;
    for (size_t n = 0; n < 3; ++n)
      for (size_t h = 0; h < 5; ++h)
        for (size_t v = 0; v < 5; ++v) mean += y.at(n, c, h, v);
    mean /= 75.0;
    for (size_t n = 0; n < 3; ++n)
      for (size_t h = 0; h < 5; ++h)
        for (size_t v = 0; v < 5; ++v) var += std::pow(y.at(n, c, h, v) - mean, 2);
    var /= 75.0;
    CHECK(std::abs(mean) < 1e-6);
    CHECK(std::abs(var - 1.0) < 1e-5);
    // Running stats moved 10% of the way from (0, 1).
    double xm = 0.0;
    for (size_t n = 0; n < 3; ++n)
      for (size_t h = 0; h < 5; ++h)
        for (size_t v = 0; v < 5; ++v) xm += x.at(n, c, h, v);
    CHECK(bn.running_mean.value[c] == doctest::Approx(0.1 * xm / 75.0).epsilon(1e-12));
  }
  BatchNormLayer fresh("bn2", 4);
  const Tensor e = fresh.Forward(x, Mode::kEval);
  for (size_t i = 0; i < x.size(); ++i) {
    CHECK(e[i] == doctest::Approx(x[i] / std::sqrt(1.0 + 1e-5)).epsilon(1e-14));
  }
  CheckKind([&] { fresh.Forward(Tensor({1, 4, 1, 1}, 1.0), Mode::kTrain); },
            ErrorKind::kDegenerateBatch);
}

TEST_CASE("activation, pooling and linear examples") {
  CHECK(Sigmoid(0.0) == 0.5);
  const Tensor s = Sigmoid(Tensor({4}, std::vector<double>{1e6, -1e6, 800.0, -800.0}));
  for (double v : s.data()) {
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
  Tensor x({2, 3, 4, 4}, 0.0);
  for (size_t n = 0; n < 2; ++n)
    for (size_t c = 0; c < 3; ++c)
      for (size_t h = 0; h < 4; ++h)
        for (size_t v = 0; v < 4; ++v) x.at(n, c, h, v) = 1.5 * c;
  const Tensor pooled = GlobalAvgPool(x);
  CHECK(pooled.shape() == std::vector<size_t>{2, 3});
  CHECK(pooled[4] == 1.5);
  const Tensor lin = Linear(pooled, Tensor({1, 3}, 0.0), Tensor({1}, 0.25));
  CHECK(lin[0] == 0.25);
  CHECK(lin[1] == 0.25);
  CHECK(Relu(Tensor({3}, std::vector<double>{-1.0, 0.0, 2.0})).vec() == std::vector<double>{0.0, 0.0, 2.0});
}

TEST_CASE("backward before forward throws") {
  PatchifyLayer p("p", 1, 2, 8);
  DepthwiseLayer d("d", 2, false);
  PointwiseLayer w("w", 2, 2, 1, true);
  BatchNormLayer b("b", 2);
  ReluLayer r;
  SigmoidLayer s;
  GlobalAvgPoolLayer g;
  LinearLayer l("l", 2);
  const Tensor dy({1, 2, 1, 1});
  CheckKind([&] { p.Backward(dy); }, ErrorKind::kBackwardBeforeForward);
  CheckKind([&] { d.Backward(dy); }, ErrorKind::kBackwardBeforeForward);
  CheckKind([&] { w.Backward(dy); }, ErrorKind::kBackwardBeforeForward);
  CheckKind([&] { b.Backward(dy); }, ErrorKind::kBackwardBeforeForward);
  CheckKind([&] { r.Backward(dy); }, ErrorKind::kBackwardBeforeForward);
  CheckKind([&] { s.Backward(dy); }, ErrorKind::kBackwardBeforeForward);
  CheckKind([&] { g.Backward(dy); }, ErrorKind::kBackwardBeforeForward);
  CheckKind([&] { l.Backward(Tensor({1, 1})); }, ErrorKind::kBackwardBeforeForward);
}

TEST_CASE("parameter gradients accumulate across backward calls") {
  Rng rng(7);
  PointwiseLayer layer("pw", 4, 4, 2, true);
  layer.Initialize(rng);
  const Tensor x = test::RandomTensor(rng, {1, 4, 2, 2});
  const Tensor dy = test::RandomTensor(rng, {1, 4, 2, 2});
  layer.Forward(x);
  layer.Backward(dy);
  const Tensor once = layer.weight.grad;
  layer.Forward(x);
  layer.Backward(dy);
  for (size_t i = 0; i < once.size(); ++i) CHECK(layer.weight.grad[i] == 2.0 * once[i]);

  // A branch fed by a constant zero input leaves the weight gradient at zero.
  LinearLayer lin("lin", 3);
  lin.Initialize(rng);
  lin.Forward(Tensor({2, 3}, 0.0));
  lin.Backward(Tensor({2, 1}, 1.0));
  for (double g : lin.weight.grad.data()) CHECK(g == 0.0);
  CHECK(lin.bias.grad[0] == 2.0);
}

TEST_CASE("layer gradients match central differences") {
  for (const auto& c : test::AllGradientChecks(77)) {
    if (c.name.find("front-end") != std::string::npos || c.name == "model end-to-end" ||
        c.name == "loss_backward") {
      continue;
    }
    CAPTURE(c.name);
    CAPTURE(c.report.analytic);
    CAPTURE(c.report.numeric);
    CHECK(c.report.checked > 0);
    CHECK(c.report.max_rel < c.tolerance);
  }
}

TEST_CASE("sgd examples") {
  ParamSlot p("w", {3});
  p.value.vec() = {1.0, -2.0, 0.5};
  std::vector<ParamSlot*> slots{&p};
  SgdStep(slots, 0.1);
  for (size_t i = 0; i < 3; ++i) {
    const double w0 = std::vector<double>{1.0, -2.0, 0.5}[i];
    CHECK(p.value[i] == doctest::Approx(w0 * (1.0 - 0.001 * 0.1)).epsilon(1e-15));
  }

  ParamSlot q("q", {1});
  q.value[0] = 0.0;
  std::vector<ParamSlot*> qs{&q};
  q.grad[0] = 1.0;
  SgdStep(qs, 1.0, 0.9, 0.0);
  q.grad[0] = 1.0;
  SgdStep(qs, 1.0, 0.9, 0.0);
  CHECK(q.value[0] == doctest::Approx(-2.9).epsilon(1e-15));
  CHECK(q.grad[0] == 0.0);

  ParamSlot r("r", {1});
  r.value[0] = 3.0;
  r.grad[0] = 2.0;
  std::vector<ParamSlot*> rs{&r};
  SgdStep(rs, 0.0);
  CHECK(r.value[0] == 3.0);
  CHECK(r.momentum[0] == doctest::Approx(2.0 + 0.003).epsilon(1e-15));

  ParamSlot buf("running", {1}, false);
  buf.value[0] = 5.0;
  buf.grad[0] = 1.0;
  std::vector<ParamSlot*> bs{&buf};
  SgdStep(bs, 1.0);
  CHECK(buf.value[0] == 5.0);
}

TEST_CASE("learning-rate schedule") {
  const LrSchedule s;
  CHECK(LrAt(s, 0.0) == 0.0);
  CHECK(LrAt(s, 0.05 * 150) == 0.01);
  CHECK(LrAt(s, 75.0) == 0.01);
  CHECK(LrAt(s, 150.0) == 0.0);
  CHECK(LrAt(s, 112.5) == doctest::Approx(0.0025).epsilon(1e-15));
  CHECK(LrAt(s, 3.75) == doctest::Approx(0.005).epsilon(1e-15));
  CHECK_THROWS_AS(LrAt(s, -0.1), Error);
  CHECK_THROWS_AS(LrAt(s, 150.1), Error);
  double worst = 0.0, prev = LrAt(s, 0.0);
  for (int k = 1; k <= 1500000; ++k) {
    const double v = LrAt(s, k * 1e-4);
    worst = std::max(worst, std::abs(v - prev));
    prev = v;
  }
  // Largest step is the warm-up slope times the scan spacing.
  CHECK(worst <= 1.0001 * s.peak_lr / (0.05 * 150) * 1e-4);
}

}  // TEST_SUITE
