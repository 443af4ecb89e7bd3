#pragma once

#include <cstddef>
#include <vector>

#include "grids/parameter_store.hpp"

namespace grids {

struct AdamConfig {
  float learning_rate = 3e-4f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
};

/// Adam with bias correction and no weight decay. First and second moments
/// are kept per parameter, parallel to the store's insertion order.
class AdamOptimizer {
 public:
  AdamOptimizer(const ParameterStore& params, AdamConfig cfg);

  // One update from the gradients currently in `params`. Throws NumericError
  // naming the parameter if any gradient is non-finite; in that case no
  // parameter is modified.
  void step(ParameterStore& params);

  std::size_t steps_taken() const noexcept { return step_; }
  const AdamConfig& config() const noexcept { return cfg_; }

 private:
  AdamConfig cfg_;
  std::size_t step_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

}  // namespace grids
