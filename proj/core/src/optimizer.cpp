#include "grids/optimizer.hpp"

#include <cmath>
#include <string>

#include "grids/errors.hpp"

namespace grids {

AdamOptimizer::AdamOptimizer(const ParameterStore& params, AdamConfig cfg) : cfg_(cfg) {
  if (!(cfg_.learning_rate > 0.0f)) throw ConfigError("adam: learning_rate must be positive");
  if (!(cfg_.beta1 >= 0.0f && cfg_.beta1 < 1.0f)) throw ConfigError("adam: beta1 must be in [0, 1)");
  if (!(cfg_.beta2 >= 0.0f && cfg_.beta2 < 1.0f)) throw ConfigError("adam: beta2 must be in [0, 1)");
  if (!(cfg_.eps > 0.0f)) throw ConfigError("adam: eps must be positive");
  for (const auto& p : params) {
    m_.emplace_back(p.numel(), 0.0);
    v_.emplace_back(p.numel(), 0.0);
  }
}

void AdamOptimizer::step(ParameterStore& params) {
  if (params.size() != m_.size()) {
    throw PreconditionError("adam: parameter store changed since optimizer construction");
  }
  for (const auto& p : params) {
    for (std::size_t i = 0; i < p.numel(); ++i) {
      if (!std::isfinite(p.grads[i])) {
        throw NumericError("adam: non-finite gradient in parameter '" + p.name + "' at index " +
                           std::to_string(i));
      }
    }
  }
  ++step_;
  const double b1 = cfg_.beta1;
  const double b2 = cfg_.beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  const double lr = cfg_.learning_rate;
  const double eps = cfg_.eps;
  std::size_t n = 0;
  for (auto& p : params) {
    auto& m = m_[n];
    auto& v = v_[n];
    if (m.size() != p.numel()) throw PreconditionError("adam: parameter '" + p.name + "' resized");
    for (std::size_t i = 0; i < p.numel(); ++i) {
      const double g = p.grads[i];
      m[i] = b1 * m[i] + (1.0 - b1) * g;
      v[i] = b2 * v[i] + (1.0 - b2) * g * g;
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      p.values[i] = static_cast<float>(p.values[i] - lr * m_hat / (std::sqrt(v_hat) + eps));
    }
    ++n;
  }
}

}  // namespace grids
