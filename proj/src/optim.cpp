#include "m3l/optim.hpp"

#include <cmath>

namespace m3l::optim {

void AdamConfig::validate() const {
  if (learning_rate <= 0.0) fail(ErrorCode::config_bad_value, "learning_rate must be > 0");
  if (beta1 < 0.0 || beta1 >= 1.0) fail(ErrorCode::config_bad_value, "beta1 must be in [0, 1)");
  if (beta2 < 0.0 || beta2 >= 1.0) fail(ErrorCode::config_bad_value, "beta2 must be in [0, 1)");
  if (epsilon <= 0.0) fail(ErrorCode::config_bad_value, "epsilon must be > 0");
  if (clip_norm < 0.0) fail(ErrorCode::config_bad_value, "clip_norm must be >= 0");
}

AdamState::AdamState(size_t n_params, AdamConfig config) : config_(config) {
  config_.validate();
  m_.assign(n_params, 0.0);
  v_.assign(n_params, 0.0);
}

void AdamState::step(const std::vector<std::span<double>>& params,
                     const std::vector<std::span<const double>>& grads) {
  if (params.size() != grads.size()) fail(ErrorCode::dim_mismatch, "adam_step: segment count mismatch");
  size_t total = 0;
  for (size_t s = 0; s < params.size(); ++s) {
    if (params[s].size() != grads[s].size()) fail(ErrorCode::dim_mismatch, "adam_step: segment shape mismatch");
    total += params[s].size();
  }
  if (total != m_.size()) fail(ErrorCode::dim_mismatch, "adam_step: parameter count changed");

  double scale = 1.0;
  if (config_.clip_norm > 0.0) {
    double sq = 0.0;
    for (const auto& g : grads) {
      for (double x : g) sq += x * x;
    }
    const double norm = std::sqrt(sq);
    if (norm > config_.clip_norm) scale = config_.clip_norm / norm;
  }

  ++t_;
  const double correction1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double correction2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  size_t offset = 0;
  for (size_t s = 0; s < params.size(); ++s) {
    auto p = params[s];
    auto g = grads[s];
    for (size_t i = 0; i < p.size(); ++i) {
      const double gi = g[i] * scale;
      double& m = m_[offset + i];
      double& v = v_[offset + i];
      m = config_.beta1 * m + (1.0 - config_.beta1) * gi;
      v = config_.beta2 * v + (1.0 - config_.beta2) * gi * gi;
      const double m_hat = m / correction1;
      const double v_hat = v / correction2;
      p[i] -= config_.learning_rate * m_hat / (std::sqrt(v_hat) + config_.epsilon);
    }
    offset += p.size();
  }
}

void AdamState::step(std::span<double> params, std::span<const double> grads) {
  step(std::vector<std::span<double>>{params}, std::vector<std::span<const double>>{grads});
}

}  // namespace m3l::optim
