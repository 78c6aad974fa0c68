#include "m3l/numkit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace m3l::numkit {

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows) {
    fail(ErrorCode::dim_mismatch, "matmul: " + std::to_string(a.rows) + "x" + std::to_string(a.cols) +
                                      " times " + std::to_string(b.rows) + "x" + std::to_string(b.cols));
  }
  Matrix out(a.rows, b.cols);
  for (int i = 0; i < a.rows; ++i) {
    for (int k = 0; k < a.cols; ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      const double* brow = b.data.data() + static_cast<size_t>(k) * b.cols;
      double* orow = out.data.data() + static_cast<size_t>(i) * out.cols;
      for (int j = 0; j < b.cols; ++j) {
        orow[j] += aik * brow[j];
      }
    }
  }
  return out;
}

Vector matvec(const Matrix& a, std::span<const double> x) {
  if (static_cast<int>(x.size()) != a.cols) {
    fail(ErrorCode::dim_mismatch, "matvec: matrix cols " + std::to_string(a.cols) + " vs vector " +
                                      std::to_string(x.size()));
  }
  Vector y(static_cast<size_t>(a.rows), 0.0);
  for (int i = 0; i < a.rows; ++i) {
    const double* row = a.data.data() + static_cast<size_t>(i) * a.cols;
    double acc = 0.0;
    for (int j = 0; j < a.cols; ++j) acc += row[j] * x[j];
    y[i] = acc;
  }
  return y;
}

Vector matvec_transposed(const Matrix& a, std::span<const double> x) {
  if (static_cast<int>(x.size()) != a.rows) {
    fail(ErrorCode::dim_mismatch, "matvec_transposed: matrix rows " + std::to_string(a.rows) +
                                      " vs vector " + std::to_string(x.size()));
  }
  Vector y(static_cast<size_t>(a.cols), 0.0);
  for (int i = 0; i < a.rows; ++i) {
    const double* row = a.data.data() + static_cast<size_t>(i) * a.cols;
    const double xi = x[i];
    for (int j = 0; j < a.cols; ++j) y[j] += row[j] * xi;
  }
  return y;
}

Vector softplus(std::span<const double> x) {
  Vector y(x.size());
  for (size_t i = 0; i < x.size(); ++i) {
    y[i] = x[i] > 30.0 ? x[i] : std::log1p(std::exp(x[i]));
  }
  return y;
}

Vector softplus_grad(std::span<const double> x) {
  Vector y(x.size());
  for (size_t i = 0; i < x.size(); ++i) {
    // logistic sigmoid, evaluated on the non-overflowing side
    y[i] = x[i] >= 0.0 ? 1.0 / (1.0 + std::exp(-x[i])) : std::exp(x[i]) / (1.0 + std::exp(x[i]));
  }
  return y;
}

double logsumexp(std::span<const double> v) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : v) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

Vector log_softmax(std::span<const double> v) {
  const double lse = logsumexp(v);
  Vector y(v.size());
  for (size_t i = 0; i < v.size(); ++i) y[i] = v[i] - lse;
  return y;
}

Vector softmax(std::span<const double> v) {
  Vector y = log_softmax(v);
  for (double& x : y) x = std::exp(x);
  return y;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

uint64_t SeededRng::next_u64() {
  uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double SeededRng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double SeededRng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // Box-Muller; u1 shifted into (0,1] so log never sees zero.
  const double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double t = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(t);
  has_spare_ = true;
  return r * std::cos(t);
}

uint64_t SeededRng::uniform_int(uint64_t n) {
  if (n == 0) fail(ErrorCode::bad_argument, "uniform_int: n must be positive");
  const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return x % n;
}

double SeededRng::gamma(double shape) {
  if (shape <= 0.0) fail(ErrorCode::bad_argument, "gamma: shape must be positive");
  if (shape < 1.0) {
    const double u = uniform();
    return gamma(shape + 1.0) * std::pow(u > 0.0 ? u : 0x1.0p-53, 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (std::log(u > 0.0 ? u : 0x1.0p-53) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

int SeededRng::poisson(double mean) {
  if (mean < 0.0) fail(ErrorCode::bad_argument, "poisson: mean must be nonnegative");
  const double limit = std::exp(-mean);
  int k = 0;
  double p = 1.0;
  do {
    ++k;
    p *= uniform();
  } while (p > limit);
  return k - 1;
}

void SeededRng::dirichlet(std::span<const double> alpha, std::span<double> out) {
  double total = 0.0;
  for (size_t i = 0; i < alpha.size(); ++i) {
    out[i] = gamma(alpha[i]);
    total += out[i];
  }
  if (total <= 0.0) {
    // all gammas underflowed (tiny alphas); fall back to uniform
    std::fill(out.begin(), out.end(), 1.0 / static_cast<double>(alpha.size()));
    return;
  }
  for (size_t i = 0; i < alpha.size(); ++i) out[i] /= total;
}

uint64_t derive_seed(uint64_t master, std::string_view tag) {
  uint64_t h = 0xCBF29CE484222325ULL;  // FNV-1a
  for (char c : tag) {
    h ^= static_cast<uint8_t>(c);
    h *= 0x100000001B3ULL;
  }
  uint64_t z = master ^ h;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

Vector sample_standard_normal(SeededRng& rng, int n) {
  if (n < 1) fail(ErrorCode::bad_argument, "sample_standard_normal: n must be >= 1");
  Vector v(static_cast<size_t>(n));
  for (auto& x : v) x = rng.normal();
  return v;
}

Vector finite_difference_gradient(const std::function<double(std::span<const double>)>& f,
                                  std::span<const double> x, double h) {
  Vector grad(x.size());
  Vector probe(x.begin(), x.end());
  for (size_t i = 0; i < x.size(); ++i) {
    const double saved = probe[i];
    probe[i] = saved + h;
    const double up = f(probe);
    probe[i] = saved - h;
    const double down = f(probe);
    probe[i] = saved;
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

}  // namespace m3l::numkit

namespace m3l {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::io_open: return "io_open";
    case ErrorCode::io_read: return "io_read";
    case ErrorCode::io_write: return "io_write";
    case ErrorCode::bad_magic: return "bad_magic";
    case ErrorCode::bad_version: return "bad_version";
    case ErrorCode::truncated: return "truncated";
    case ErrorCode::zero_dims: return "zero_dims";
    case ErrorCode::dim_mismatch: return "dim_mismatch";
    case ErrorCode::row_count_mismatch: return "row_count_mismatch";
    case ErrorCode::missing_bow: return "missing_bow";
    case ErrorCode::index_out_of_range: return "index_out_of_range";
    case ErrorCode::empty_corpus: return "empty_corpus";
    case ErrorCode::empty_dataset: return "empty_dataset";
    case ErrorCode::empty_input: return "empty_input";
    case ErrorCode::config_unknown_key: return "config_unknown_key";
    case ErrorCode::config_bad_value: return "config_bad_value";
    case ErrorCode::line_count_mismatch: return "line_count_mismatch";
    case ErrorCode::view_not_found: return "view_not_found";
    case ErrorCode::arch_mismatch: return "arch_mismatch";
    case ErrorCode::bad_argument: return "bad_argument";
    case ErrorCode::parse_error: return "parse_error";
  }
  return "unknown";
}

}  // namespace m3l
