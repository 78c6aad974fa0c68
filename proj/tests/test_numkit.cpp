#include <doctest.h>

#include <cmath>
#include <numbers>

#include "m3l/numkit.hpp"

using namespace m3l;
using numkit::Matrix;
using numkit::SeededRng;
using numkit::Vector;

TEST_SUITE_BEGIN("numkit");

namespace {

Matrix random_matrix(SeededRng& rng, int rows, int cols) {
  Matrix m(rows, cols);
  for (auto& x : m.data) x = rng.normal();
  return m;
}

}  // namespace

TEST_CASE("matmul identity and hand values") {
  Matrix eye(2, 2);
  eye(0, 0) = eye(1, 1) = 1.0;
  Matrix a(2, 2);
  a.data = {1, 2, 3, 4};
  const Matrix ia = numkit::matmul(eye, a);
  CHECK(ia.data == a.data);

  Matrix b(2, 1);
  b.data = {5, 6};
  const Matrix ab = numkit::matmul(a, b);
  CHECK(ab.rows == 2);
  CHECK(ab.cols == 1);
  CHECK(ab(0, 0) == doctest::Approx(17.0).epsilon(1e-12));
  CHECK(ab(1, 0) == doctest::Approx(39.0).epsilon(1e-12));

  const Matrix zero(3, 2);
  Matrix c(2, 4);
  c.data.assign(8, 1.5);
  const Matrix zc = numkit::matmul(zero, c);
  for (double x : zc.data) CHECK(x == 0.0);
}

TEST_CASE("matmul rejects mismatched shapes") {
  Matrix a(2, 3), b(2, 3);
  CHECK_THROWS_AS(numkit::matmul(a, b), Error);
  try {
    numkit::matmul(a, b);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::dim_mismatch);
  }
}

TEST_CASE("matmul associativity on random chains") {
  SeededRng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix a = random_matrix(rng, 4, 6);
    const Matrix b = random_matrix(rng, 6, 3);
    const Matrix c = random_matrix(rng, 3, 5);
    const Matrix left = numkit::matmul(numkit::matmul(a, b), c);
    const Matrix right = numkit::matmul(a, numkit::matmul(b, c));
    double max_abs = 0.0;
    for (double x : right.data) max_abs = std::max(max_abs, std::abs(x));
    for (size_t i = 0; i < left.size(); ++i) {
      CHECK(std::abs(left.data[i] - right.data[i]) <= 1e-9 * std::max(1.0, max_abs));
    }
  }
}

TEST_CASE("softplus values and overflow safety") {
  const Vector zero = {0.0};
  CHECK(numkit::softplus(zero)[0] == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  const Vector big = {100.0};
  CHECK(numkit::softplus(big)[0] == doctest::Approx(100.0).epsilon(1e-12));
  const Vector huge = {1e6};
  CHECK(std::isfinite(numkit::softplus(huge)[0]));
  CHECK(numkit::softplus_grad(zero)[0] == doctest::Approx(0.5).epsilon(1e-12));
  const Vector neg = {-40.0};
  CHECK(numkit::softplus(neg)[0] > 0.0);
}

TEST_CASE("log_softmax stability and hand values") {
  const Vector pair = {0.0, 0.0};
  const Vector ls = numkit::log_softmax(pair);
  CHECK(ls[0] == doctest::Approx(-std::log(2.0)).epsilon(1e-12));
  CHECK(ls[1] == doctest::Approx(-std::log(2.0)).epsilon(1e-12));

  const Vector v = {1.0, 2.0, 3.0};
  const Vector lv = numkit::log_softmax(v);
  CHECK(lv[0] == doctest::Approx(-2.4076059644443806).epsilon(1e-9));
  CHECK(lv[1] == doctest::Approx(-1.4076059644443806).epsilon(1e-9));
  CHECK(lv[2] == doctest::Approx(-0.4076059644443806).epsilon(1e-9));

  SeededRng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    Vector x(7);
    for (auto& e : x) e = 10.0 * rng.normal();
    const Vector base = numkit::log_softmax(x);
    Vector shifted = x;
    for (auto& e : shifted) e += 123.456;
    const Vector after = numkit::log_softmax(shifted);
    double mass = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
      CHECK(std::abs(base[i] - after[i]) < 1e-9);
      mass += std::exp(base[i]);
    }
    CHECK(std::abs(mass - 1.0) <= 1e-12);
  }
}

TEST_CASE("seeded stream is frozen") {
  // splitmix64 reference values; these pin the byte-level stream across
  // platforms and refactors
  SeededRng rng(0);
  CHECK(rng.next_u64() == 0xE220A8397B1DCDAFull);
  CHECK(rng.next_u64() == 0x6E789E6AA1B965F4ull);
  SeededRng rng42(42);
  CHECK(rng42.next_u64() == 0xBDD732262FEB6E95ull);
  CHECK(rng42.next_u64() == 0x28EFE333B266F103ull);
  CHECK(numkit::derive_seed(7, "init") == 0x13337054C44CC232ull);
  CHECK(numkit::derive_seed(7, "init") != numkit::derive_seed(7, "eps"));
  CHECK(numkit::derive_seed(7, "init") != numkit::derive_seed(8, "init"));
}

TEST_CASE("same seed reproduces normal draws") {
  SeededRng a(123), b(123);
  const Vector va = numkit::sample_standard_normal(a, 64);
  const Vector vb = numkit::sample_standard_normal(b, 64);
  CHECK(va == vb);
}

TEST_CASE("normal draws match moments") {
  SeededRng rng(2024);
  const int n = 1'000'000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    sum += x;
    sq += x * x;
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  CHECK(std::abs(mean) < 0.005);
  CHECK(std::abs(var - 1.0) < 0.01);
}

TEST_CASE("uniform_int stays in range and covers values") {
  SeededRng rng(5);
  std::vector<int> hits(7, 0);
  for (int i = 0; i < 7000; ++i) ++hits[static_cast<size_t>(rng.uniform_int(7))];
  for (int h : hits) CHECK(h > 700);
}

TEST_CASE("gamma and dirichlet sanity") {
  SeededRng rng(8);
  double sum = 0.0;
  const int n = 200'000;
  for (int i = 0; i < n; ++i) sum += rng.gamma(2.5);
  CHECK(sum / n == doctest::Approx(2.5).epsilon(0.02));

  const Vector alpha = {0.05, 0.05, 0.05, 0.05};
  Vector out(4);
  for (int trial = 0; trial < 100; ++trial) {
    rng.dirichlet(alpha, out);
    double total = 0.0;
    for (double x : out) {
      CHECK(x >= 0.0);
      total += x;
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("poisson matches its mean") {
  SeededRng rng(99);
  long long total = 0;
  const int n = 100'000;
  for (int i = 0; i < n; ++i) total += rng.poisson(60.0);
  CHECK(static_cast<double>(total) / n == doctest::Approx(60.0).epsilon(0.01));
}

TEST_CASE("finite differences recover simple gradients") {
  const auto square = [](std::span<const double> x) { return x[0] * x[0]; };
  const Vector at = {3.0};
  const Vector g = numkit::finite_difference_gradient(square, at, 1e-5);
  CHECK(g[0] == doctest::Approx(6.0).epsilon(1e-6));

  const auto constant = [](std::span<const double>) { return 4.2; };
  const Vector zeros = numkit::finite_difference_gradient(constant, Vector{1.0, -2.0, 0.5}, 1e-5);
  for (double x : zeros) CHECK(x == 0.0);

  const auto softplus_sum = [](std::span<const double> x) {
    double s = 0.0;
    for (double xi : x) s += std::log1p(std::exp(xi));
    return s;
  };
  const Vector origin(5, 0.0);
  const Vector fd = numkit::finite_difference_gradient(softplus_sum, origin, 1e-6);
  const Vector analytic = numkit::softplus_grad(origin);
  for (size_t i = 0; i < fd.size(); ++i) CHECK(fd[i] == doctest::Approx(analytic[i]).epsilon(1e-6));
}

TEST_SUITE_END();
