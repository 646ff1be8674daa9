#pragma once

#include "sinceeg/tensor.hpp"

#include <cstdint>
#include <span>
#include <string>

namespace sinceeg {

// A learnable tensor with its gradient and Adam moments, all the same shape.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  Tensor m;
  Tensor v;

  Parameter() = default;
  Parameter(std::string n, Tensor init)
      : name(std::move(n)), value(std::move(init)), grad(value.shape()), m(value.shape()), v(value.shape()) {}

  void zero_grad() { grad.vec().setZero(); }
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-5;
};

// One bias-corrected Adam update using each parameter's grad plus
// weight_decay * value as the effective gradient. Increments step_count.
void adam_step(std::span<Parameter> params, const AdamConfig& config, std::int64_t& step_count);

}  // namespace sinceeg
