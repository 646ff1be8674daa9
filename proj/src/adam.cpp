#include "sinceeg/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace sinceeg {

void adam_step(std::span<Parameter> params, const AdamConfig& config, std::int64_t& step_count) {
  for (const Parameter& p : params) {
    if (p.grad.shape() != p.value.shape() || p.m.shape() != p.value.shape() || p.v.shape() != p.value.shape()) {
      throw std::invalid_argument("adam_step: gradient/moment shape mismatch for parameter '" + p.name + "'");
    }
  }
  ++step_count;
  const double t = static_cast<double>(step_count);
  const double bias1 = 1.0 - std::pow(config.beta1, t);
  const double bias2 = 1.0 - std::pow(config.beta2, t);
  for (Parameter& p : params) {
    auto x = p.value.vec().array();
    const Eigen::ArrayXd g = p.grad.vec().array() + config.weight_decay * x;
    p.m.vec().array() = config.beta1 * p.m.vec().array() + (1.0 - config.beta1) * g;
    p.v.vec().array() = config.beta2 * p.v.vec().array() + (1.0 - config.beta2) * g.square();
    x -= config.lr * (p.m.vec().array() / bias1) / ((p.v.vec().array() / bias2).sqrt() + config.eps);
  }
}

}  // namespace sinceeg
