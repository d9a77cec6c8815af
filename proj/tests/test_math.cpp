#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "slrkit/errors.hpp"
#include "slrkit/math.hpp"
#include "slrkit/rng.hpp"

using namespace slrkit;

namespace {

// Definitional (unoptimized) evaluations used as independent oracles.
std::vector<double> softmax_oracle(const std::vector<double>& m) {
  double denom = 0.0;
  for (double v : m) denom += std::exp(v);
  std::vector<double> out;
  for (double v : m) out.push_back(std::exp(v) / denom);
  return out;
}

double ce_oracle(const std::vector<double>& r, int y, double eps, int k) {
  double loss = 0.0;
  for (int j = 0; j < k; ++j) {
    const double target = (j == y ? 1.0 - eps : 0.0) + eps / k;
    loss -= target * std::log(std::max(r[static_cast<std::size_t>(j)], 1e-12));
  }
  return loss;
}

}  // namespace

TEST_CASE("relu clamps negatives and passes positives") {
  CHECK(relu(-3.0) == 0.0);
  CHECK(relu(0.0) == 0.0);
  CHECK(relu(2.5) == 2.5);
  const std::vector<double> v{-1.0, 0.5, -0.0};
  const auto out = relu(std::span<const double>(v));
  CHECK(out == std::vector<double>{0.0, 0.5, 0.0});
}

TEST_CASE("softmax basics") {
  const std::vector<double> z{0.0, 0.0, 0.0};
  for (double p : softmax(z)) CHECK(p == doctest::Approx(1.0 / 3).epsilon(1e-15));

  const std::vector<double> shifted{5.0, 5.0 + std::log(2.0)};
  const auto p = softmax(shifted);
  CHECK(p[0] == doctest::Approx(1.0 / 3).epsilon(1e-14));
  CHECK(p[1] == doctest::Approx(2.0 / 3).epsilon(1e-14));

  const std::vector<double> huge{1000.0, 1000.0};
  const auto q = softmax(huge);
  CHECK(q[0] == doctest::Approx(0.5).epsilon(1e-15));

  const std::vector<double> bad{1.0, std::nan("")};
  CHECK_THROWS_AS(softmax(bad), NumericError);
}

TEST_CASE("softmax matches the definitional oracle on random vectors") {
  Rng rng(11);
  for (int trial = 0; trial < 1000; ++trial) {
    const int k = 1 + static_cast<int>(rng.next_below(12));
    std::vector<double> m(static_cast<std::size_t>(k));
    for (double& v : m) v = rng.uniform(-20.0, 20.0);
    const auto got = softmax(m);
    const auto want = softmax_oracle(m);
    double sum = 0.0;
    for (int j = 0; j < k; ++j) {
      CHECK(std::abs(got[static_cast<std::size_t>(j)] - want[static_cast<std::size_t>(j)]) <=
            1e-12 * std::max(1.0, std::abs(want[static_cast<std::size_t>(j)])));
      sum += got[static_cast<std::size_t>(j)];
    }
    CHECK(std::abs(sum - 1.0) <= 1e-12);
  }
}

TEST_CASE("smoothed target sums to 1 with the eps/K floor") {
  const auto t = smoothed_target(2, 0.1, 4);
  CHECK(t[2] == doctest::Approx(0.9 + 0.025).epsilon(1e-15));
  double sum = 0.0, lo = 1.0;
  for (double v : t) {
    sum += v;
    lo = std::min(lo, v);
  }
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(lo == 0.1 / 4);  // exact lower bound
}

TEST_CASE("cross entropy closed forms") {
  std::vector<double> onehot{0.0, 0.0, 1.0, 0.0};
  CHECK(cross_entropy_lsr(onehot, 2, 0.0, 4) == doctest::Approx(0.0).epsilon(1e-12));
  std::vector<double> uniform(5, 0.2);
  CHECK(cross_entropy_lsr(uniform, 3, 0.0, 5) ==
        doctest::Approx(std::log(5.0)).epsilon(1e-14));
  std::vector<double> unnormalized{0.9, 0.3};
  CHECK_THROWS_AS(cross_entropy_lsr(unnormalized, 0, 0.0, 2), NumericError);
}

TEST_CASE("cross entropy matches the oracle and the decomposition identity") {
  Rng rng(23);
  for (int trial = 0; trial < 1000; ++trial) {
    const int k = 2 + static_cast<int>(rng.next_below(11));
    const int y = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(k)));
    const double eps = rng.next_double() * 0.9;
    std::vector<double> r(static_cast<std::size_t>(k));
    double sum = 0.0;
    for (double& v : r) {
      v = rng.next_double() + 1e-3;
      sum += v;
    }
    for (double& v : r) v /= sum;

    const double got = cross_entropy_lsr(r, y, eps, k);
    const double want = ce_oracle(r, y, eps, k);
    CHECK(std::abs(got - want) <= 1e-12 * std::max(1.0, std::abs(want)));

    // H(s', r) = (1 - eps) H(s, r) + eps H(t, r), evaluated independently.
    const double h_s = -std::log(std::max(r[static_cast<std::size_t>(y)], 1e-12));
    double h_t = 0.0;
    for (int j = 0; j < k; ++j) {
      h_t -= (1.0 / k) * std::log(std::max(r[static_cast<std::size_t>(j)], 1e-12));
    }
    const double decomposed = (1.0 - eps) * h_s + eps * h_t;
    CHECK(std::abs(got - decomposed) <= 1e-12 * std::max(1.0, std::abs(decomposed)));
  }
}

TEST_CASE("logit gradient equals softmax minus smoothed target, checked by finite differences") {
  Rng rng(37);
  for (int trial = 0; trial < 50; ++trial) {
    const int k = 2 + static_cast<int>(rng.next_below(9));
    const int y = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(k)));
    const double eps = rng.next_double() * 0.5;
    std::vector<double> m(static_cast<std::size_t>(k));
    for (double& v : m) v = rng.uniform(-3.0, 3.0);

    const auto grad = softmax_ce_logit_grad(m, y, eps, k);
    const double h = 1e-6;
    for (int j = 0; j < k; ++j) {
      auto hi = m, lo = m;
      hi[static_cast<std::size_t>(j)] += h;
      lo[static_cast<std::size_t>(j)] -= h;
      const double fd = (cross_entropy_lsr(softmax(hi), y, eps, k) -
                         cross_entropy_lsr(softmax(lo), y, eps, k)) /
                        (2.0 * h);
      const double denom = std::max(1.0, std::abs(fd));
      CHECK(std::abs(grad[static_cast<std::size_t>(j)] - fd) / denom <= 1e-4);
    }
  }
}
