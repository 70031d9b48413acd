#pragma once

#include <Eigen/Dense>
#include <cstdint>

namespace apg {

struct AdamState {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  std::int64_t t = 0;

  explicit AdamState(Eigen::Index n)
      : m(Eigen::VectorXd::Zero(n)), v(Eigen::VectorXd::Zero(n)) {}
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam update: params -= lr * m_hat / (sqrt(v_hat) + eps).
// Pass a negative lr for a gradient-ascent step.
void adam_step(Eigen::VectorXd& params, const Eigen::VectorXd& grads, AdamState& state,
               double lr, const AdamConfig& cfg = {});

// lr1 + 0.5*(lr0 - lr1)*(1 + cos(pi * step / total)).
double cosine_lr(std::int64_t step, std::int64_t total, double lr0, double lr1);

}  // namespace apg
