#pragma once

#include "sinceeg/tensor.hpp"

#include <Eigen/Core>

#include <random>
#include <span>
#include <vector>

namespace sinceeg {

using Rng = std::mt19937_64;

enum class Mode { train, eval };

// ---- conv2d: same-padded cross-correlation, stride 1 ----------------------

// input [B x C x H x W], kernel [O x C x kh x kw], bias [O] -> [B x O x H x W]
Tensor conv2d_forward(const Tensor& input, const Tensor& kernel, const Eigen::VectorXd& bias);

struct Conv2dGrads {
  Tensor input;  // empty when not requested
  Tensor kernel;
  Eigen::VectorXd bias;
};

Conv2dGrads conv2d_backward(const Tensor& upstream, const Tensor& input, const Tensor& kernel,
                            bool need_input_grad = true);

// ---- max pooling ------------------------------------------------------------

// Non-overlapping windows; ragged edges behave as if padded with -inf.
struct PoolResult {
  Tensor output;
  std::vector<Index> argmax;  // flat input index per output element
};

PoolResult maxpool2d_forward(const Tensor& input, Index pool_h, Index pool_w);
Tensor maxpool2d_backward(const Tensor& upstream, std::span<const Index> argmax, const std::vector<Index>& input_shape);

// ---- batch normalization ----------------------------------------------------

struct BatchNormState {
  Eigen::VectorXd running_mean;
  Eigen::VectorXd running_var;
  double momentum = 0.1;
  double eps = 1e-5;

  explicit BatchNormState(Index channels = 0)
      : running_mean(Eigen::VectorXd::Zero(channels)), running_var(Eigen::VectorXd::Ones(channels)) {}
};

struct BatchNormCache {
  Tensor normalized;         // x_hat
  Eigen::VectorXd inv_std;   // per channel
  Mode mode = Mode::eval;
};

// input [B x C x H x W]. In train mode the running statistics are updated.
Tensor batch_norm_forward(const Tensor& input, const Eigen::VectorXd& scale, const Eigen::VectorXd& shift,
                          BatchNormState& state, Mode mode, BatchNormCache* cache = nullptr);

struct BatchNormGrads {
  Tensor input;
  Eigen::VectorXd scale;
  Eigen::VectorXd shift;
};

BatchNormGrads batch_norm_backward(const Tensor& upstream, const BatchNormCache& cache, const Eigen::VectorXd& scale);

// ---- elementwise ---------------------------------------------------------

Tensor relu_forward(const Tensor& input);
Tensor relu_backward(const Tensor& upstream, const Tensor& input);

// Inverted dropout. The mask holds 0 or 1/(1-rate) per element and is reused
// by the backward pass; in eval mode the mask is all ones.
Tensor dropout_forward(const Tensor& input, double rate, Mode mode, Rng& rng, Tensor& mask);
Tensor dropout_backward(const Tensor& upstream, const Tensor& mask);

// ---- dense ------------------------------------------------------------------

// input [B x D], weight [D x K], bias [K] -> [B x K]
Tensor dense_forward(const Tensor& input, const Tensor& weight, const Eigen::VectorXd& bias);

struct DenseGrads {
  Tensor input;
  Tensor weight;
  Eigen::VectorXd bias;
};

DenseGrads dense_backward(const Tensor& upstream, const Tensor& input, const Tensor& weight);

// ---- loss -------------------------------------------------------------------

struct SoftmaxCrossEntropy {
  double loss = 0.0;     // mean over the batch
  Tensor probabilities;  // [B x K]
  Tensor logit_grad;     // (softmax - onehot) / B
};

Eigen::VectorXd softmax(const Eigen::VectorXd& logits);
SoftmaxCrossEntropy softmax_cross_entropy(const Tensor& logits, std::span<const int> labels);

// ---- init ---------------------------------------------------------------

// Uniform on [-a, a], a = sqrt(6 / (fan_in + fan_out)).
Tensor glorot_uniform(std::vector<Index> shape, Index fan_in, Index fan_out, Rng& rng);

}  // namespace sinceeg
