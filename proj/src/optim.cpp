#include "tide/optim.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "tide/errors.hpp"

namespace tide {

void adam_update(Tensor& param, const Tensor& grad, AdamState& state, double lr,
                 const AdamConfig& cfg) {
  if (lr <= 0.0) {
    throw std::invalid_argument("adam_update: lr must be positive, got " + std::to_string(lr));
  }
  check_same_shape(param, grad, "adam_update");
  if (state.m.numel() == 0) state = AdamState(param.shape());
  check_same_shape(param, state.m, "adam_update state");

  state.step += 1;
  const double b1 = cfg.beta1;
  const double b2 = cfg.beta2;
  state.m.flat() = b1 * state.m.flat() + (1.0 - b1) * grad.flat();
  state.v.flat().array() =
      b2 * state.v.flat().array() + (1.0 - b2) * grad.flat().array().square();

  const double t = static_cast<double>(state.step);
  const double mhat_scale = 1.0 / (1.0 - std::pow(b1, t));
  const double vhat_scale = 1.0 / (1.0 - std::pow(b2, t));
  param.flat().array() -= lr * (state.m.flat().array() * mhat_scale) /
                          ((state.v.flat().array() * vhat_scale).sqrt() + cfg.eps);
}

double cosine_lr(std::int64_t step, const ScheduleConfig& cfg) {
  if (cfg.max_lr <= 0.0) {
    throw std::invalid_argument("cosine_lr: max_lr must be positive, got " +
                                std::to_string(cfg.max_lr));
  }
  if (cfg.total_steps < 1) {
    throw std::invalid_argument("cosine_lr: total_steps must be at least 1, got " +
                                std::to_string(cfg.total_steps));
  }
  if (step < 0 || step > cfg.total_steps) {
    throw std::invalid_argument("cosine_lr: step " + std::to_string(step) +
                                " outside [0, " + std::to_string(cfg.total_steps) + "]");
  }
  const double frac = static_cast<double>(step) / static_cast<double>(cfg.total_steps);
  return cfg.max_lr * 0.5 * (1.0 + std::cos(M_PI * frac));
}

}  // namespace tide
