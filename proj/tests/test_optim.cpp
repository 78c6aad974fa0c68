#include <doctest.h>

#include <cmath>

#include "m3l/optim.hpp"

using namespace m3l;
using optim::AdamConfig;
using optim::AdamState;

TEST_SUITE_BEGIN("optim");

TEST_CASE("zero gradient leaves parameters alone") {
  AdamState adam(3, AdamConfig{});
  std::vector<double> params = {1.0, -2.0, 0.5};
  const std::vector<double> before = params;
  const std::vector<double> grads(3, 0.0);
  adam.step(std::span<double>(params), std::span<const double>(grads));
  CHECK(params == before);
  CHECK(adam.step_count() == 1);
}

TEST_CASE("first step matches the hand-derived update") {
  AdamConfig cfg;
  cfg.learning_rate = 0.1;
  AdamState adam(1, cfg);
  std::vector<double> params = {0.0};
  const std::vector<double> grads = {1.0};
  adam.step(std::span<double>(params), std::span<const double>(grads));
  // m_hat = 1, v_hat = 1 after bias correction
  const double expect = -0.1 / (1.0 + 1e-8);
  CHECK(params[0] == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("constant gradient follows the hand recurrence") {
  AdamConfig cfg;
  cfg.learning_rate = 0.05;
  AdamState adam(1, cfg);
  std::vector<double> params = {0.3};

  double m = 0.0, v = 0.0, ref = 0.3;
  for (int t = 1; t <= 2; ++t) {
    const std::vector<double> grads = {1.0};
    adam.step(std::span<double>(params), std::span<const double>(grads));
    m = 0.9 * m + 0.1 * 1.0;
    v = 0.999 * v + 0.001 * 1.0;
    const double m_hat = m / (1.0 - std::pow(0.9, t));
    const double v_hat = v / (1.0 - std::pow(0.999, t));
    ref -= 0.05 * m_hat / (std::sqrt(v_hat) + 1e-8);
    CHECK(params[0] == doctest::Approx(ref).epsilon(1e-12));
  }
}

TEST_CASE("update magnitude approaches the learning rate regardless of scale") {
  for (const double g : {0.01, 1.0, 250.0}) {
    AdamConfig cfg;
    cfg.learning_rate = 2e-3;
    AdamState adam(1, cfg);
    std::vector<double> params = {0.0};
    double prev = params[0];
    double last_step = 0.0;
    for (int t = 0; t < 5000; ++t) {
      const std::vector<double> grads = {g};
      adam.step(std::span<double>(params), std::span<const double>(grads));
      last_step = std::abs(params[0] - prev);
      prev = params[0];
    }
    CHECK(last_step == doctest::Approx(cfg.learning_rate).epsilon(0.01));
  }
}

TEST_CASE("identical inputs give identical updates") {
  const AdamConfig cfg;
  AdamState a(4, cfg), b(4, cfg);
  std::vector<double> pa = {1.0, 2.0, 3.0, 4.0};
  std::vector<double> pb = pa;
  const std::vector<double> grads = {0.5, -1.5, 0.25, 10.0};
  for (int t = 0; t < 10; ++t) {
    a.step(std::span<double>(pa), std::span<const double>(grads));
    b.step(std::span<double>(pb), std::span<const double>(grads));
  }
  CHECK(pa == pb);
}

TEST_CASE("global-norm clipping rescales the gradient") {
  AdamConfig cfg;
  cfg.clip_norm = 1.0;
  AdamState adam(2, cfg);
  std::vector<double> params = {0.0, 0.0};
  const std::vector<double> grads = {30.0, 40.0};  // norm 50
  adam.step(std::span<double>(params), std::span<const double>(grads));
  // first moment holds (1 - beta1) * g * (clip / norm)
  CHECK(adam.first_moment()[0] == doctest::Approx(0.1 * 30.0 / 50.0).epsilon(1e-12));
  CHECK(adam.first_moment()[1] == doctest::Approx(0.1 * 40.0 / 50.0).epsilon(1e-12));
}

TEST_CASE("segmented and flat views agree") {
  const AdamConfig cfg;
  AdamState flat(5, cfg), segmented(5, cfg);
  std::vector<double> pf = {1, 2, 3, 4, 5};
  std::vector<double> s1 = {1, 2}, s2 = {3, 4, 5};
  const std::vector<double> gf = {0.1, 0.2, 0.3, 0.4, 0.5};
  const std::vector<double> g1 = {0.1, 0.2}, g2 = {0.3, 0.4, 0.5};
  flat.step(std::span<double>(pf), std::span<const double>(gf));
  segmented.step({std::span<double>(s1), std::span<double>(s2)},
                 {std::span<const double>(g1), std::span<const double>(g2)});
  CHECK(pf[0] == s1[0]);
  CHECK(pf[4] == s2[2]);
}

TEST_CASE("shape mismatches are rejected") {
  AdamState adam(3, AdamConfig{});
  std::vector<double> params = {1.0, 2.0};
  const std::vector<double> grads = {0.1, 0.2};
  CHECK_THROWS_AS(adam.step(std::span<double>(params), std::span<const double>(grads)), Error);

  std::vector<double> p3 = {1.0, 2.0, 3.0};
  const std::vector<double> g2 = {0.1, 0.2};
  CHECK_THROWS_AS(adam.step(std::span<double>(p3), std::span<const double>(g2)), Error);
}

TEST_SUITE_END();
