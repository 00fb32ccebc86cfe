#include <cmath>

#include "doctest.h"
#include "gradcheck.h"
#include "sqdr/error.h"
#include "sqdr/eval_metrics.h"
#include "sqdr/losses.h"
#include "support.h"

using namespace sqdr;

namespace {

struct Batch {
  std::vector<double> s;
  std::vector<int> y;
};

Batch RandomBatch(Rng& rng, size_t max_n = 64) {
  Batch b;
  const size_t n = 2 + rng.Below(max_n - 1);
  b.s = test::RandomVector(rng, n, 0.0, 1.0);
  b.y.resize(n);
  for (auto& v : b.y) v = static_cast<int>(rng.Below(2));
  const size_t i = rng.Below(n);
  b.y[i] = 1;
  b.y[(i + 1 + rng.Below(n - 1)) % n] = 0;
  return b;
}

}  // namespace

TEST_SUITE("losses") {

TEST_CASE("bce examples") {
  const std::vector<double> half(6, 0.5);
  const std::vector<int> y{1, 0, 1, 1, 0, 0};
  CHECK(Bce(half, y) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  const std::vector<double> exact{1.0, 0.0, 1.0, 1.0, 0.0, 0.0};
  CHECK(Bce(exact, y) < 1e-11);
  const std::vector<double> s{0.9, 0.2};
  const std::vector<int> l{1, 0};
  CHECK(Bce(s, l) == doctest::Approx(0.164252).epsilon(1e-6));
  CHECK(std::abs(Bce(s, l) + (std::log(0.9) + std::log(0.8)) / 2.0) < 1e-15);
}

TEST_CASE("bce rejects bad input") {
  const std::vector<int> l{1, 0};
  for (double bad : {-0.1, 1.5, std::nan("")}) {
    const std::vector<double> s{bad, 0.5};
    try {
      Bce(s, l);
      FAIL("expected kScoreOutOfRange");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kScoreOutOfRange);
    }
  }
  const std::vector<double> s1{0.5};
  CHECK_THROWS_AS(Bce(s1, l), Error);
}

TEST_CASE("qdr examples") {
  auto q = [](std::vector<double> s, std::vector<int> y) { return Qdr(s, y, 1.0); };
  CHECK(q({1.0, 0.0}, {1, 0}).value == 0.0);
  CHECK(q({0.5, 0.5}, {1, 0}).value == 1.0);
  CHECK(q({0.9, 0.6, 0.4}, {1, 1, 0}).value == doctest::Approx(0.445).epsilon(1e-14));
  const auto deg = q({0.3, 0.8}, {1, 1});
  CHECK(deg.degenerate);
  CHECK(deg.value == 0.0);
  CHECK_FALSE(q({0.3, 0.8}, {1, 0}).degenerate);
}

TEST_CASE("qdr matches the double loop on 500 random batches") {
  Rng rng(31);
  double worst = 0.0;
  for (int trial = 0; trial < 500; ++trial) {
    const Batch b = RandomBatch(rng);
    const double m = trial % 3 == 0 ? 1.0 : rng.Uniform(0.05, 2.0);
    const double got = Qdr(b.s, b.y, m).value;
    worst = std::max(worst, std::abs(got - test::BruteQdr(b.s, b.y, m)));
  }
  CHECK(worst <= 1e-12);
}

TEST_CASE("qdr shift invariance") {
  Rng rng(32);
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const Batch b = RandomBatch(rng);
    const double base = Qdr(b.s, b.y, 1.0).value;
    for (double c : {0.1, -0.1, 3.0, -3.0}) {
      std::vector<double> shifted = b.s;
      for (double& v : shifted) v += c;
      worst = std::max(worst, std::abs(Qdr(shifted, b.y, 1.0).value - base));
    }
  }
  CHECK(worst <= 1e-12);
}

TEST_CASE("qdr is zero exactly on margin-separated batches") {
  Rng rng(33);
  for (int trial = 0; trial < 100; ++trial) {
    Batch b = RandomBatch(rng);
    const double m = rng.Uniform(0.1, 0.5);
    for (size_t i = 0; i < b.s.size(); ++i) {
      b.s[i] = b.y[i] == 1 ? rng.Uniform(0.5 + m, 1.0) : rng.Uniform(0.0, 0.5);
    }
    CHECK(Qdr(b.s, b.y, m).value == 0.0);
    CHECK(Auroc(b.s, b.y) == 1.0);
  }
}

TEST_CASE("qdr is non-negative and monotone") {
  Rng rng(34);
  for (int trial = 0; trial < 200; ++trial) {
    Batch b = RandomBatch(rng, 20);
    const double base = Qdr(b.s, b.y, 1.0).value;
    CHECK(base >= 0.0);
    const size_t k = rng.Below(b.s.size());
    std::vector<double> moved = b.s;
    moved[k] += b.y[k] == 1 ? 0.05 : -0.05;
    CHECK(Qdr(moved, b.y, 1.0).value <= base);
  }
}

TEST_CASE("qdr ranking link") {
  Rng rng(35);
  for (int trial = 0; trial < 50; ++trial) {
    Batch b = RandomBatch(rng, 30);
    for (size_t i = 0; i < b.s.size(); ++i) {
      b.s[i] = b.y[i] == 1 ? rng.Uniform(0.6, 0.9) : rng.Uniform(0.1, 0.4);
    }
    REQUIRE(Auroc(b.s, b.y) == 1.0);
    // Scaling a perfectly ranked vector drives the loss to zero.
    double prev = Qdr(b.s, b.y, 1.0).value;
    for (double scale : {2.0, 5.0, 20.0}) {
      std::vector<double> scaled = b.s;
      for (double& v : scaled) v *= scale;
      const double q = Qdr(scaled, b.y, 1.0).value;
      CHECK(q <= prev);
      prev = q;
    }
    CHECK(prev == 0.0);
  }
}

TEST_CASE("total loss blends the two terms") {
  const std::vector<double> s{0.9, 0.6, 0.4};
  const std::vector<int> y{1, 1, 0};
  const double bce = Bce(s, y);
  const double qdr = Qdr(s, y, 1.0).value;
  CHECK(TotalLoss(s, y, {1.0, 0.0}).total == bce);
  CHECK(TotalLoss(s, y, {1.0, 1.0}).total == qdr);
  const auto mid = TotalLoss(s, y, {1.0, 0.25});
  CHECK(mid.bce == bce);
  CHECK(mid.qdr == qdr);
  CHECK(mid.total == 0.25 * qdr + 0.75 * bce);
  CHECK(0.25 * 0.445 + 0.75 * 0.164252 == doctest::Approx(0.234439).epsilon(1e-6));

  const std::vector<double> one{0.3, 0.7};
  const std::vector<int> pos{1, 1};
  const auto deg = TotalLoss(one, pos, {1.0, 0.25});
  CHECK(deg.qdr_degenerate);
  CHECK(deg.total == 0.75 * Bce(one, pos));
}

TEST_CASE("loss backward examples") {
  const std::vector<double> sep{0.95, 0.9, 0.05};
  const std::vector<int> y{1, 1, 0};
  const auto g = LossBackward(sep, y, {0.5, 1.0});
  for (double v : g) CHECK(v == 0.0);

  for (double m : {1.0, 0.4}) {
    const std::vector<double> s{0.37, 0.37};
    const std::vector<int> l{1, 0};
    const auto sym = LossBackward(s, l, {m, 1.0});
    CHECK(sym[0] == doctest::Approx(-2.0 * m).epsilon(1e-15));
    CHECK(sym[1] == doctest::Approx(2.0 * m).epsilon(1e-15));
  }
}

TEST_CASE("loss backward matches finite differences") {
  const test::GradReport r = test::CheckLosses(36);
  INFO("worst index " << r.worst << " analytic " << r.analytic << " numeric " << r.numeric);
  CHECK(r.max_rel < 1e-6);
  CHECK(r.checked > 100);
}

}  // TEST_SUITE
