#include "sinceeg/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace sinceeg {

namespace {

struct ConvGeometry {
  Index batch, channels, height, width, out_channels, kh, kw, pad_top, pad_left;
  Index patch_rows() const { return channels * kh * kw; }
};

ConvGeometry conv_geometry(const Tensor& input, const Tensor& kernel) {
  if (input.rank() != 4) throw std::invalid_argument("conv2d: input must be [B x C x H x W], got " + input.shape_string());
  if (kernel.rank() != 4) throw std::invalid_argument("conv2d: kernel must be [O x C x kh x kw], got " + kernel.shape_string());
  if (kernel.dim(1) != input.dim(1)) {
    throw std::invalid_argument("conv2d: channel mismatch between input " + input.shape_string() + " and kernel " +
                                kernel.shape_string());
  }
  ConvGeometry g{input.dim(0), input.dim(1), input.dim(2), input.dim(3), kernel.dim(0), kernel.dim(2), kernel.dim(3), 0, 0};
  g.pad_top = (g.kh - 1) / 2;
  g.pad_left = (g.kw - 1) / 2;
  return g;
}

// Rows of output processed per im2col chunk; bounds the patch matrix size.
Index rows_per_chunk(const ConvGeometry& g) {
  constexpr Index budget = Index{1} << 20;
  return std::clamp<Index>(budget / std::max<Index>(1, g.patch_rows() * g.width), 1, g.height);
}

// cols((c*kh + i)*kw + j, (h - h0)*W + w) = x[c, h + i - pad_top, w + j - pad_left]
void im2col(const double* x, const ConvGeometry& g, Index h0, Index h1, RowMatrixXd& cols) {
  const Index n_cols = (h1 - h0) * g.width;
  cols.setZero(g.patch_rows(), n_cols);
  for (Index c = 0; c < g.channels; ++c) {
    const double* xc = x + c * g.height * g.width;
    for (Index i = 0; i < g.kh; ++i) {
      for (Index j = 0; j < g.kw; ++j) {
        const Index row = (c * g.kh + i) * g.kw + j;
        const Index dw = j - g.pad_left;
        const Index w0 = std::max<Index>(0, -dw);
        const Index w1 = std::min<Index>(g.width, g.width - dw);
        if (w1 <= w0) continue;
        for (Index h = h0; h < h1; ++h) {
          const Index src_h = h + i - g.pad_top;
          if (src_h < 0 || src_h >= g.height) continue;
          cols.row(row).segment((h - h0) * g.width + w0, w1 - w0) =
              Eigen::Map<const Eigen::RowVectorXd>(xc + src_h * g.width + w0 + dw, w1 - w0);
        }
      }
    }
  }
}

void col2im(const RowMatrixXd& cols, const ConvGeometry& g, Index h0, Index h1, double* dx) {
  for (Index c = 0; c < g.channels; ++c) {
    double* dxc = dx + c * g.height * g.width;
    for (Index i = 0; i < g.kh; ++i) {
      for (Index j = 0; j < g.kw; ++j) {
        const Index row = (c * g.kh + i) * g.kw + j;
        const Index dw = j - g.pad_left;
        const Index w0 = std::max<Index>(0, -dw);
        const Index w1 = std::min<Index>(g.width, g.width - dw);
        if (w1 <= w0) continue;
        for (Index h = h0; h < h1; ++h) {
          const Index src_h = h + i - g.pad_top;
          if (src_h < 0 || src_h >= g.height) continue;
          Eigen::Map<Eigen::RowVectorXd>(dxc + src_h * g.width + w0 + dw, w1 - w0) +=
              cols.row(row).segment((h - h0) * g.width + w0, w1 - w0);
        }
      }
    }
  }
}

void check_nchw(const Tensor& t, const char* what) {
  if (t.rank() != 4) throw std::invalid_argument(std::string(what) + ": expected [B x C x H x W], got " + t.shape_string());
}

}  // namespace

Tensor conv2d_forward(const Tensor& input, const Tensor& kernel, const Eigen::VectorXd& bias) {
  const ConvGeometry g = conv_geometry(input, kernel);
  if (bias.size() != g.out_channels) throw std::invalid_argument("conv2d: bias length must equal output channels");

  Tensor out({g.batch, g.out_channels, g.height, g.width});
  const auto weights = kernel.matrix(g.out_channels, g.patch_rows());
  const Index chunk = rows_per_chunk(g);
  const Index plane = g.height * g.width;
  RowMatrixXd cols;
  RowMatrixXd y;
  for (Index b = 0; b < g.batch; ++b) {
    const double* x = input.data() + b * g.channels * plane;
    double* yb = out.data() + b * g.out_channels * plane;
    for (Index h0 = 0; h0 < g.height; h0 += chunk) {
      const Index h1 = std::min(g.height, h0 + chunk);
      im2col(x, g, h0, h1, cols);
      y.noalias() = weights * cols;
      const Index n = (h1 - h0) * g.width;
      for (Index o = 0; o < g.out_channels; ++o) {
        Eigen::Map<Eigen::RowVectorXd>(yb + o * plane + h0 * g.width, n) = y.row(o).array() + bias[o];
      }
    }
  }
  return out;
}

Conv2dGrads conv2d_backward(const Tensor& upstream, const Tensor& input, const Tensor& kernel, bool need_input_grad) {
  const ConvGeometry g = conv_geometry(input, kernel);
  require_shape(upstream, {g.batch, g.out_channels, g.height, g.width}, "conv2d_backward upstream");

  Conv2dGrads grads;
  grads.kernel = Tensor(kernel.shape());
  grads.bias = Eigen::VectorXd::Zero(g.out_channels);
  if (need_input_grad) grads.input = Tensor(input.shape());

  const auto weights = kernel.matrix(g.out_channels, g.patch_rows());
  auto dweights = grads.kernel.matrix(g.out_channels, g.patch_rows());
  const Index chunk = rows_per_chunk(g);
  const Index plane = g.height * g.width;
  RowMatrixXd cols;
  RowMatrixXd up_chunk;
  RowMatrixXd dcols;
  for (Index b = 0; b < g.batch; ++b) {
    const double* x = input.data() + b * g.channels * plane;
    const double* ub = upstream.data() + b * g.out_channels * plane;
    for (Index h0 = 0; h0 < g.height; h0 += chunk) {
      const Index h1 = std::min(g.height, h0 + chunk);
      const Index n = (h1 - h0) * g.width;
      up_chunk.resize(g.out_channels, n);
      for (Index o = 0; o < g.out_channels; ++o) {
        up_chunk.row(o) = Eigen::Map<const Eigen::RowVectorXd>(ub + o * plane + h0 * g.width, n);
      }
      grads.bias += up_chunk.rowwise().sum();
      im2col(x, g, h0, h1, cols);
      dweights.noalias() += up_chunk * cols.transpose();
      if (need_input_grad) {
        dcols.noalias() = weights.transpose() * up_chunk;
        col2im(dcols, g, h0, h1, grads.input.data() + b * g.channels * plane);
      }
    }
  }
  return grads;
}

PoolResult maxpool2d_forward(const Tensor& input, Index pool_h, Index pool_w) {
  check_nchw(input, "maxpool2d");
  if (pool_h < 1 || pool_w < 1) throw std::invalid_argument("maxpool2d: pool size must be positive");
  const Index B = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
  if (pool_h > H || pool_w > W) {
    throw std::invalid_argument("maxpool2d: pool " + std::to_string(pool_h) + "x" + std::to_string(pool_w) +
                                " larger than input " + input.shape_string());
  }
  const Index Ho = (H + pool_h - 1) / pool_h;
  const Index Wo = (W + pool_w - 1) / pool_w;
  PoolResult r{Tensor({B, C, Ho, Wo}), std::vector<Index>(static_cast<std::size_t>(B * C * Ho * Wo))};
  Index out_i = 0;
  for (Index bc = 0; bc < B * C; ++bc) {
    const Index base = bc * H * W;
    for (Index ho = 0; ho < Ho; ++ho) {
      for (Index wo = 0; wo < Wo; ++wo, ++out_i) {
        double best = -std::numeric_limits<double>::infinity();
        Index best_i = -1;
        for (Index h = ho * pool_h; h < std::min(H, (ho + 1) * pool_h); ++h) {
          for (Index w = wo * pool_w; w < std::min(W, (wo + 1) * pool_w); ++w) {
            const Index idx = base + h * W + w;
            if (best_i < 0 || input[idx] > best) {
              best = input[idx];
              best_i = idx;
            }
          }
        }
        r.output[out_i] = best;
        r.argmax[static_cast<std::size_t>(out_i)] = best_i;
      }
    }
  }
  return r;
}

Tensor maxpool2d_backward(const Tensor& upstream, std::span<const Index> argmax, const std::vector<Index>& input_shape) {
  if (static_cast<Index>(argmax.size()) != upstream.size()) {
    throw std::invalid_argument("maxpool2d_backward: argmax size does not match upstream");
  }
  Tensor grad(input_shape);
  for (Index i = 0; i < upstream.size(); ++i) grad[argmax[static_cast<std::size_t>(i)]] += upstream[i];
  return grad;
}

Tensor batch_norm_forward(const Tensor& input, const Eigen::VectorXd& scale, const Eigen::VectorXd& shift,
                          BatchNormState& state, Mode mode, BatchNormCache* cache) {
  check_nchw(input, "batch_norm");
  const Index B = input.dim(0), C = input.dim(1), plane = input.dim(2) * input.dim(3);
  if (scale.size() != C || shift.size() != C || state.running_mean.size() != C) {
    throw std::invalid_argument("batch_norm: parameter length must equal channel count");
  }
  const Index n = B * plane;
  if (mode == Mode::train && n < 2) {
    throw std::invalid_argument("batch_norm: train mode needs at least 2 values per channel");
  }

  Eigen::VectorXd mean(C), inv_std(C);
  if (mode == Mode::train) {
    for (Index c = 0; c < C; ++c) {
      double sum = 0.0;
      for (Index b = 0; b < B; ++b) sum += input.vec().segment((b * C + c) * plane, plane).sum();
      const double mu = sum / static_cast<double>(n);
      double sq = 0.0;
      for (Index b = 0; b < B; ++b) {
        sq += (input.vec().segment((b * C + c) * plane, plane).array() - mu).square().sum();
      }
      const double var = sq / static_cast<double>(n);
      mean[c] = mu;
      inv_std[c] = 1.0 / std::sqrt(var + state.eps);
      const double unbiased = sq / static_cast<double>(n - 1);
      state.running_mean[c] = (1.0 - state.momentum) * state.running_mean[c] + state.momentum * mu;
      state.running_var[c] = (1.0 - state.momentum) * state.running_var[c] + state.momentum * unbiased;
    }
  } else {
    mean = state.running_mean;
    inv_std = (state.running_var.array() + state.eps).rsqrt();
  }

  Tensor out(input.shape());
  Tensor normalized(input.shape());
  for (Index b = 0; b < B; ++b) {
    for (Index c = 0; c < C; ++c) {
      const Index off = (b * C + c) * plane;
      normalized.vec().segment(off, plane) = (input.vec().segment(off, plane).array() - mean[c]) * inv_std[c];
      out.vec().segment(off, plane) = normalized.vec().segment(off, plane).array() * scale[c] + shift[c];
    }
  }
  if (cache) {
    cache->normalized = std::move(normalized);
    cache->inv_std = inv_std;
    cache->mode = mode;
  }
  return out;
}

BatchNormGrads batch_norm_backward(const Tensor& upstream, const BatchNormCache& cache, const Eigen::VectorXd& scale) {
  const Tensor& xhat = cache.normalized;
  require_shape(upstream, xhat.shape(), "batch_norm_backward upstream");
  const Index B = xhat.dim(0), C = xhat.dim(1), plane = xhat.dim(2) * xhat.dim(3);
  const double n = static_cast<double>(B * plane);

  BatchNormGrads g{Tensor(xhat.shape()), Eigen::VectorXd::Zero(C), Eigen::VectorXd::Zero(C)};
  for (Index c = 0; c < C; ++c) {
    double sum_up = 0.0, sum_up_xhat = 0.0;
    for (Index b = 0; b < B; ++b) {
      const Index off = (b * C + c) * plane;
      sum_up += upstream.vec().segment(off, plane).sum();
      sum_up_xhat += upstream.vec().segment(off, plane).dot(xhat.vec().segment(off, plane));
    }
    g.shift[c] = sum_up;
    g.scale[c] = sum_up_xhat;
    const double k = scale[c] * cache.inv_std[c];
    for (Index b = 0; b < B; ++b) {
      const Index off = (b * C + c) * plane;
      if (cache.mode == Mode::train) {
        g.input.vec().segment(off, plane) =
            k * (upstream.vec().segment(off, plane).array() - sum_up / n -
                 xhat.vec().segment(off, plane).array() * (sum_up_xhat / n));
      } else {
        g.input.vec().segment(off, plane) = k * upstream.vec().segment(off, plane);
      }
    }
  }
  return g;
}

Tensor relu_forward(const Tensor& input) {
  Tensor out(input.shape());
  out.vec() = input.vec().cwiseMax(0.0);
  return out;
}

Tensor relu_backward(const Tensor& upstream, const Tensor& input) {
  require_shape(upstream, input.shape(), "relu_backward upstream");
  Tensor g(input.shape());
  g.vec() = (input.vec().array() > 0.0).select(upstream.vec(), 0.0);
  return g;
}

Tensor dropout_forward(const Tensor& input, double rate, Mode mode, Rng& rng, Tensor& mask) {
  if (!(rate >= 0.0 && rate < 1.0)) throw std::invalid_argument("dropout: rate must be in [0, 1)");
  mask = Tensor::constant(input.shape(), 1.0);
  if (mode == Mode::eval || rate == 0.0) return input;
  const double keep_scale = 1.0 / (1.0 - rate);
  std::bernoulli_distribution drop(rate);
  for (Index i = 0; i < mask.size(); ++i) mask[i] = drop(rng) ? 0.0 : keep_scale;
  Tensor out(input.shape());
  out.vec() = input.vec().cwiseProduct(mask.vec());
  return out;
}

Tensor dropout_backward(const Tensor& upstream, const Tensor& mask) {
  require_shape(upstream, mask.shape(), "dropout_backward upstream");
  Tensor g(upstream.shape());
  g.vec() = upstream.vec().cwiseProduct(mask.vec());
  return g;
}

Tensor dense_forward(const Tensor& input, const Tensor& weight, const Eigen::VectorXd& bias) {
  if (input.rank() != 2 || weight.rank() != 2) throw std::invalid_argument("dense: input and weight must be 2-D");
  if (input.dim(1) != weight.dim(0)) {
    throw std::invalid_argument("dense: inner dimensions disagree: " + input.shape_string() + " vs " + weight.shape_string());
  }
  if (bias.size() != weight.dim(1)) throw std::invalid_argument("dense: bias length must equal output width");
  Tensor out({input.dim(0), weight.dim(1)});
  auto y = out.matrix();
  y.noalias() = input.matrix() * weight.matrix();
  y.rowwise() += bias.transpose();
  return out;
}

DenseGrads dense_backward(const Tensor& upstream, const Tensor& input, const Tensor& weight) {
  require_shape(upstream, {input.dim(0), weight.dim(1)}, "dense_backward upstream");
  DenseGrads g{Tensor(input.shape()), Tensor(weight.shape()), Eigen::VectorXd()};
  g.input.matrix().noalias() = upstream.matrix() * weight.matrix().transpose();
  g.weight.matrix().noalias() = input.matrix().transpose() * upstream.matrix();
  g.bias = upstream.matrix().colwise().sum().transpose();
  return g;
}

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  Eigen::VectorXd e = (logits.array() - logits.maxCoeff()).exp();
  return e / e.sum();
}

SoftmaxCrossEntropy softmax_cross_entropy(const Tensor& logits, std::span<const int> labels) {
  if (logits.rank() != 2) throw std::invalid_argument("softmax_cross_entropy: logits must be [B x K]");
  const Index B = logits.dim(0), K = logits.dim(1);
  if (static_cast<Index>(labels.size()) != B) throw std::invalid_argument("softmax_cross_entropy: one label per row");

  SoftmaxCrossEntropy r{0.0, Tensor({B, K}), Tensor({B, K})};
  for (Index b = 0; b < B; ++b) {
    const int label = labels[static_cast<std::size_t>(b)];
    if (label < 0 || label >= K) throw std::invalid_argument("softmax_cross_entropy: label out of range");
    const Eigen::RowVectorXd row = logits.matrix().row(b);
    const double m = row.maxCoeff();
    const double log_sum = std::log((row.array() - m).exp().sum()) + m;
    r.loss -= row[label] - log_sum;
    r.probabilities.matrix().row(b) = (row.array() - log_sum).exp();
    r.logit_grad.matrix().row(b) = r.probabilities.matrix().row(b) / static_cast<double>(B);
    r.logit_grad(b, label) -= 1.0 / static_cast<double>(B);
  }
  r.loss /= static_cast<double>(B);
  return r;
}

Tensor glorot_uniform(std::vector<Index> shape, Index fan_in, Index fan_out, Rng& rng) {
  if (fan_in < 1 || fan_out < 1) throw std::invalid_argument("glorot_uniform: fans must be >= 1");
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-a, a);
  Tensor t(std::move(shape));
  for (Index i = 0; i < t.size(); ++i) t[i] = dist(rng);
  return t;
}

}  // namespace sinceeg
