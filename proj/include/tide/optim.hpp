#ifndef TIDE_OPTIM_HPP
#define TIDE_OPTIM_HPP

#include <cstdint>
#include <vector>

#include "tide/tensor.hpp"

namespace tide {

/// First and second moment estimates for one parameter tensor.
struct AdamState {
  Tensor m;
  Tensor v;
  std::int64_t step = 0;

  explicit AdamState(const std::vector<Index>& shape) : m(shape), v(shape) {}
  AdamState() = default;
};

/// Adam hyperparameters. Defaults match the reference training setup.
struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-7;
};

/// One Adam update in place. Increments state.step, then applies the
/// bias-corrected moment estimates. Requires lr > 0 and matching shapes.
void adam_update(Tensor& param, const Tensor& grad, AdamState& state, double lr,
                 const AdamConfig& cfg = {});

/// Cosine decay from max_lr at step 0 to 0 at total_steps.
struct ScheduleConfig {
  double max_lr = 1e-3;
  std::int64_t total_steps = 1;
};

/// lr(step) = max_lr * (1 + cos(pi * step / total_steps)) / 2.
/// Requires 0 <= step <= total_steps, max_lr > 0 and total_steps >= 1.
double cosine_lr(std::int64_t step, const ScheduleConfig& cfg);

}  // namespace tide

#endif  // TIDE_OPTIM_HPP
