#pragma once

#include <span>
#include <vector>

#include "m3l/error.hpp"

namespace m3l::optim {

struct AdamConfig {
  double learning_rate = 2e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double clip_norm = 0.0;  // > 0 enables global-norm gradient clipping

  void validate() const;
};

// Adam with bias correction over a flat parameter vector. Parameter order is
// the caller's contract (the model's visit_params order); state length is
// fixed at construction.
class AdamState {
 public:
  AdamState(size_t n_params, AdamConfig config);

  // One update: params -= lr * m_hat / (sqrt(v_hat) + eps). Spans must cover
  // exactly the construction-time parameter count, in the same order each
  // call. Grad clipping, when enabled, rescales before the moment update.
  void step(const std::vector<std::span<double>>& params,
            const std::vector<std::span<const double>>& grads);

  // Single-segment convenience.
  void step(std::span<double> params, std::span<const double> grads);

  long long step_count() const { return t_; }
  const AdamConfig& config() const { return config_; }
  std::span<const double> first_moment() const { return m_; }
  std::span<const double> second_moment() const { return v_; }

 private:
  AdamConfig config_;
  std::vector<double> m_;
  std::vector<double> v_;
  long long t_ = 0;
};

}  // namespace m3l::optim
