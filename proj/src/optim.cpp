#include "apg/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace apg {

void adam_step(Eigen::VectorXd& params, const Eigen::VectorXd& grads, AdamState& state,
               double lr, const AdamConfig& cfg) {
  if (params.size() != grads.size() || params.size() != state.m.size()) {
    throw std::invalid_argument("adam_step: size mismatch");
  }
  ++state.t;
  state.m = cfg.beta1 * state.m + (1.0 - cfg.beta1) * grads;
  state.v = cfg.beta2 * state.v.array() + (1.0 - cfg.beta2) * grads.array().square();
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  params.array() -=
      lr * (state.m.array() / bc1) / ((state.v.array() / bc2).sqrt() + cfg.eps);
}

double cosine_lr(std::int64_t step, std::int64_t total, double lr0, double lr1) {
  if (total <= 0) return lr1;
  const double x = std::min(1.0, std::max(0.0, static_cast<double>(step) / total));
  return lr1 + 0.5 * (lr0 - lr1) * (1.0 + std::cos(M_PI * x));
}

}  // namespace apg
