#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "m3l/error.hpp"

namespace m3l::numkit {

using Vector = std::vector<double>;

// Dense row-major matrix, 64-bit storage. File formats round to float32 on
// write; everything in memory stays double so gradient checks keep ~1e-6
// headroom.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;  // row-major, data.size() == rows*cols

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, 0.0) {}

  double& operator()(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
  double operator()(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }

  std::span<double> row(int r) { return {data.data() + static_cast<size_t>(r) * cols, static_cast<size_t>(cols)}; }
  std::span<const double> row(int r) const {
    return {data.data() + static_cast<size_t>(r) * cols, static_cast<size_t>(cols)};
  }

  size_t size() const { return data.size(); }
};

Matrix matmul(const Matrix& a, const Matrix& b);

// y = A x
Vector matvec(const Matrix& a, std::span<const double> x);
// y = A^T x
Vector matvec_transposed(const Matrix& a, std::span<const double> x);

// log(1 + e^x), overflow-safe: returns x directly for x > 30.
Vector softplus(std::span<const double> x);
// d/dx softplus = logistic sigmoid.
Vector softplus_grad(std::span<const double> x);

double logsumexp(std::span<const double> v);
Vector log_softmax(std::span<const double> v);
Vector softmax(std::span<const double> v);

double dot(std::span<const double> a, std::span<const double> b);

// Counter-based deterministic generator: the raw u64 stream is the splitmix64
// sequence of the seed, bit-exact on every platform. Derived draws use fixed
// documented transforms:
//   uniform():      (next_u64() >> 11) * 2^-53, in [0, 1)
//   normal():       Box-Muller over two uniforms, sine value cached
//   uniform_int(n): rejection sampling on next_u64() % n
//   gamma(a):       Marsaglia-Tsang squeeze (boosted by u^(1/a) for a < 1)
//   poisson(m):     Knuth product-of-uniforms
// Single-owner: not safe to share across threads.
class SeededRng {
 public:
  explicit SeededRng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64();
  double uniform();
  double normal();
  uint64_t uniform_int(uint64_t n);
  double gamma(double shape);
  int poisson(double mean);
  void dirichlet(std::span<const double> alpha, std::span<double> out);

 private:
  uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Sub-seed for a named component: splitmix64 finalizer over
// master XOR FNV-1a(tag). One master seed drives the whole run.
uint64_t derive_seed(uint64_t master, std::string_view tag);

// n i.i.d. N(0,1) draws.
Vector sample_standard_normal(SeededRng& rng, int n);

// Central differences (f(x+h e_i) - f(x-h e_i)) / 2h. Test oracle for every
// analytic gradient in the model module.
Vector finite_difference_gradient(const std::function<double(std::span<const double>)>& f,
                                  std::span<const double> x, double h);

}  // namespace m3l::numkit
