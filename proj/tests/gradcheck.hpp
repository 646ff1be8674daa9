#pragma once

// Central finite-difference checks shared by the unit tests and the
// acceptance runner. Every check uses the scalar loss sum(W * output) with a
// random W unless stated otherwise, so the upstream gradient is W.

#include "oracles.hpp"

#include "sinceeg/layers.hpp"
#include "sinceeg/model.hpp"
#include "sinceeg/sincconv.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>

namespace gradcheck {

using sinceeg::Index;
using sinceeg::Rng;
using sinceeg::Tensor;

struct Report {
  double max_rel = 0.0;
  Index checked = 0;
  std::string worst;

  void add(double analytic, double numeric, double scale, const std::string& what) {
    // Relative to the larger magnitude, with a floor tied to the gradient's
    // overall scale so entries that are zero up to rounding do not blow up.
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-3 * scale, 1e-300});
    const double rel = std::abs(analytic - numeric) / denom;
    ++checked;
    if (rel > max_rel) {
      max_rel = rel;
      worst = what;
    }
  }

  void merge(const Report& other) {
    checked += other.checked;
    if (other.max_rel > max_rel) {
      max_rel = other.max_rel;
      worst = other.worst;
    }
  }
};

inline Tensor random_tensor(std::vector<Index> shape, Rng& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  std::normal_distribution<double> n(0.0, scale);
  for (Index i = 0; i < t.size(); ++i) t[i] = n(rng);
  return t;
}

inline double weighted_sum(const Tensor& out, const Tensor& w) { return out.vec().dot(w.vec()); }

// FD over every element of `x`; loss(x) evaluated with x perturbed in place.
inline void check_tensor(Report& r, Tensor& x, const Tensor& analytic, const std::function<double()>& loss, double h,
                         const std::string& what) {
  const double scale = analytic.vec().cwiseAbs().maxCoeff();
  for (Index i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + h;
    const double up = loss();
    x[i] = saved - h;
    const double down = loss();
    x[i] = saved;
    r.add(analytic[i], (up - down) / (2.0 * h), scale, what + "[" + std::to_string(i) + "]");
  }
}

// Random valid filter parameters: f1 in [0.01, 0.3], band in [0.005, 0.1],
// kept away from the clamps so the loss is smooth at the draw.
inline sinceeg::FilterParams random_filter(Rng& rng) {
  std::uniform_real_distribution<double> lo(0.01, 0.3);
  std::uniform_real_distribution<double> bw(0.005, 0.1);
  std::bernoulli_distribution sign(0.5);
  return {(sign(rng) ? 1.0 : -1.0) * lo(rng), (sign(rng) ? 1.0 : -1.0) * bw(rng)};
}

// Tap-wise derivatives of the windowed kernel vs FD of make_kernel.
inline Report kernel_taps(int draws, std::uint64_t seed) {
  Report r;
  Rng rng(seed);
  std::uniform_int_distribution<Index> len(17, 129);
  std::uniform_real_distribution<double> f(0.01, 0.45);
  for (int d = 0; d < draws; ++d) {
    const Eigen::VectorXd w = sinceeg::hamming_window(len(rng));
    double f1 = f(rng);
    double f2 = f(rng);
    if (f1 > f2) std::swap(f1, f2);
    const sinceeg::KernelGrads g = sinceeg::kernel_grads(f1, f2, w);
    const double h = 1e-6;
    const Eigen::VectorXd d2 = (sinceeg::make_kernel(f1, f2 + h, w) - sinceeg::make_kernel(f1, f2 - h, w)) / (2 * h);
    const Eigen::VectorXd d1 = (sinceeg::make_kernel(f1 + h, f2, w) - sinceeg::make_kernel(f1 - h, f2, w)) / (2 * h);
    const double s2 = g.d_f2.cwiseAbs().maxCoeff();
    const double s1 = g.d_f1.cwiseAbs().maxCoeff();
    for (Index k = 0; k < w.size(); ++k) {
      r.add(g.d_f2[k], d2[k], s2, "dg/df2");
      r.add(g.d_f1[k], d1[k], s1, "dg/df1");
    }
  }
  return r;
}

// SincConv raw-parameter and cut-off gradients against FD of sum(W * forward).
inline Report sincconv_params(int draws, std::uint64_t seed) {
  Report r;
  Rng rng(seed);
  std::uniform_int_distribution<Index> len(9, 65);
  std::uniform_int_distribution<Index> nf(1, 4);
  std::uniform_int_distribution<Index> nb(1, 3);
  for (int d = 0; d < draws; ++d) {
    const Index L = len(rng);
    const Index F = nf(rng);
    const Index B = nb(rng);
    const Index T = L + 20;
    std::vector<sinceeg::FilterParams> params;
    for (Index i = 0; i < F; ++i) params.push_back(random_filter(rng));
    sinceeg::Filterbank bank(params, L, 1.0, 0.001);
    const Tensor x = random_tensor({B, T}, rng);
    const Tensor w = random_tensor({B, F, T}, rng);
    const auto grads = sinceeg::sincconv_backward(w, x, bank, false);
    auto loss = [&] { return weighted_sum(sinceeg::sincconv_forward(x, bank), w); };
    const double h = 1e-6;
    double scale = 0.0;
    for (const auto& g : grads.params) scale = std::max({scale, std::abs(g.d_low_raw), std::abs(g.d_band_raw)});
    for (Index i = 0; i < F; ++i) {
      auto& p = bank.params()[static_cast<std::size_t>(i)];
      const auto& g = grads.params[static_cast<std::size_t>(i)];
      for (double* raw : {&p.f_low_raw, &p.band_raw}) {
        const double saved = *raw;
        *raw = saved + h;
        const double up = loss();
        *raw = saved - h;
        const double down = loss();
        *raw = saved;
        const bool is_low = raw == &p.f_low_raw;
        r.add(is_low ? g.d_low_raw : g.d_band_raw, (up - down) / (2 * h), scale, is_low ? "d_low_raw" : "d_band_raw");
      }
      // Cut-off gradients directly: rebuild the kernel with f1/f2 nudged.
      const sinceeg::Cutoffs c = bank.cutoffs(i);
      auto loss_cut = [&](double f1, double f2) {
        sinceeg::RowMatrixXd k = bank.kernels();
        k.row(i) = sinceeg::make_kernel(f1, f2, bank.window()).transpose();
        return weighted_sum(sinceeg::fir_bank_forward(x, k), w);
      };
      const double n2 = (loss_cut(c.f1, c.f2 + h) - loss_cut(c.f1, c.f2 - h)) / (2 * h);
      const double n1 = (loss_cut(c.f1 + h, c.f2) - loss_cut(c.f1 - h, c.f2)) / (2 * h);
      const double cs = std::max(std::abs(g.d_f1), std::abs(g.d_f2));
      r.add(g.d_f2, n2, cs, "d_f2");
      r.add(g.d_f1, n1, cs, "d_f1");
    }
  }
  return r;
}

inline Report fir_signal(std::uint64_t seed) {
  Rng rng(seed);
  Report r;
  const sinceeg::RowMatrixXd k = random_tensor({3, 7}, rng).matrix();
  Tensor x = random_tensor({2, 20}, rng);
  const Tensor w = random_tensor({2, 3, 20}, rng);
  const auto g = sinceeg::fir_bank_backward(w, x, k);
  check_tensor(r, x, g.signal, [&] { return weighted_sum(sinceeg::fir_bank_forward(x, k), w); }, 1e-6, "fir.signal");
  sinceeg::RowMatrixXd km = k;
  Tensor kt({3, 7}, Eigen::Map<const Eigen::VectorXd>(km.data(), km.size()));
  Tensor ga({3, 7}, Eigen::Map<const Eigen::VectorXd>(g.kernels.data(), g.kernels.size()));
  check_tensor(r, kt, ga, [&] { return weighted_sum(sinceeg::fir_bank_forward(x, kt.matrix()), w); }, 1e-6, "fir.kernel");
  return r;
}

inline Report conv2d(std::uint64_t seed) {
  Rng rng(seed);
  Report r;
  Tensor x = random_tensor({2, 2, 5, 6}, rng);
  Tensor k = random_tensor({3, 2, 3, 2}, rng);
  Tensor b = random_tensor({3}, rng);
  const Tensor w = random_tensor({2, 3, 5, 6}, rng);
  const auto g = sinceeg::conv2d_backward(w, x, k);
  auto loss = [&] { return weighted_sum(sinceeg::conv2d_forward(x, k, b.vec()), w); };
  check_tensor(r, x, g.input, loss, 1e-6, "conv2d.input");
  check_tensor(r, k, g.kernel, loss, 1e-6, "conv2d.kernel");
  check_tensor(r, b, Tensor({3}, g.bias), loss, 1e-6, "conv2d.bias");
  return r;
}

inline Report batch_norm(std::uint64_t seed) {
  Rng rng(seed);
  Report r;
  Tensor x = random_tensor({3, 2, 2, 3}, rng, 2.0);
  Tensor scale = random_tensor({2}, rng);
  Tensor shift = random_tensor({2}, rng);
  const Tensor w = random_tensor({3, 2, 2, 3}, rng);
  for (sinceeg::Mode mode : {sinceeg::Mode::train, sinceeg::Mode::eval}) {
    sinceeg::BatchNormState state(2);
    state.running_mean << 0.3, -0.2;
    state.running_var << 1.7, 0.6;
    auto loss = [&] {
      sinceeg::BatchNormState s = state;
      return weighted_sum(sinceeg::batch_norm_forward(x, scale.vec(), shift.vec(), s, mode), w);
    };
    sinceeg::BatchNormState s = state;
    sinceeg::BatchNormCache cache;
    sinceeg::batch_norm_forward(x, scale.vec(), shift.vec(), s, mode, &cache);
    const auto g = sinceeg::batch_norm_backward(w, cache, scale.vec());
    const std::string tag = mode == sinceeg::Mode::train ? "bn.train." : "bn.eval.";
    check_tensor(r, x, g.input, loss, 1e-6, tag + "input");
    check_tensor(r, scale, Tensor({2}, g.scale), loss, 1e-6, tag + "scale");
    check_tensor(r, shift, Tensor({2}, g.shift), loss, 1e-6, tag + "shift");
  }
  return r;
}

inline Report maxpool(std::uint64_t seed) {
  Rng rng(seed);
  Report r;
  Tensor x = random_tensor({2, 2, 5, 7}, rng);
  const auto pooled = sinceeg::maxpool2d_forward(x, 2, 3);
  const Tensor w = random_tensor(pooled.output.shape(), rng);
  const Tensor g = sinceeg::maxpool2d_backward(w, pooled.argmax, x.shape());
  check_tensor(r, x, g, [&] { return weighted_sum(sinceeg::maxpool2d_forward(x, 2, 3).output, w); }, 1e-6, "maxpool");
  return r;
}

inline Report relu(std::uint64_t seed) {
  Rng rng(seed);
  Report r;
  Tensor x = random_tensor({4, 9}, rng);
  const Tensor w = random_tensor({4, 9}, rng);
  const Tensor g = sinceeg::relu_backward(w, x);
  check_tensor(r, x, g, [&] { return weighted_sum(sinceeg::relu_forward(x), w); }, 1e-6, "relu");
  return r;
}

inline Report dropout(std::uint64_t seed) {
  Rng rng(seed);
  Report r;
  Tensor x = random_tensor({4, 9}, rng);
  const Tensor w = random_tensor({4, 9}, rng);
  Tensor mask;
  Rng drop(seed + 1);
  sinceeg::dropout_forward(x, 0.5, sinceeg::Mode::train, drop, mask);
  const Tensor g = sinceeg::dropout_backward(w, mask);
  // With the mask fixed the layer is linear: out = x * mask.
  check_tensor(r, x, g, [&] { return x.vec().cwiseProduct(mask.vec()).dot(w.vec()); }, 1e-6, "dropout");
  return r;
}

inline Report dense(std::uint64_t seed) {
  Rng rng(seed);
  Report r;
  Tensor x = random_tensor({3, 5}, rng);
  Tensor wt = random_tensor({5, 2}, rng);
  Tensor b = random_tensor({2}, rng);
  const Tensor w = random_tensor({3, 2}, rng);
  const auto g = sinceeg::dense_backward(w, x, wt);
  auto loss = [&] { return weighted_sum(sinceeg::dense_forward(x, wt, b.vec()), w); };
  check_tensor(r, x, g.input, loss, 1e-6, "dense.input");
  check_tensor(r, wt, g.weight, loss, 1e-6, "dense.weight");
  check_tensor(r, b, Tensor({2}, g.bias), loss, 1e-6, "dense.bias");
  return r;
}

inline Report softmax_ce(std::uint64_t seed) {
  Rng rng(seed);
  Report r;
  Tensor logits = random_tensor({5, 4}, rng, 2.0);
  const std::vector<int> labels = {0, 3, 1, 2, 3};
  const auto res = sinceeg::softmax_cross_entropy(logits, labels);
  check_tensor(r, logits, res.logit_grad, [&] { return sinceeg::softmax_cross_entropy(logits, labels).loss; }, 1e-6,
               "softmax_ce");
  return r;
}

inline sinceeg::ArchConfig miniature(sinceeg::Arch arch) {
  sinceeg::ArchConfig c;
  c.arch = arch;
  c.n_filters = 4;
  c.kernel_len = 17;
  c.sample_rate = 100.0;
  c.input_len = 32;
  c.blocks = {{{3, 3, 3, 2, 2}, {4, 2, 3, 2, 2}, {4, 1, 2, 1, 2}}};
  c.fc_units = 8;
  c.dropout = 0.0;
  return c;
}

// Softmax cross-entropy of the whole network, batch norm in eval mode with
// non-trivial running statistics, dropout off.
inline Report model_end_to_end(sinceeg::Arch arch, std::uint64_t seed, Index batch = 8) {
  Rng rng(seed);
  sinceeg::Model model(miniature(arch), seed);
  for (auto& bn : model.batch_norm_states()) {
    std::uniform_real_distribution<double> u(0.5, 1.5);
    for (Index i = 0; i < bn.running_mean.size(); ++i) {
      bn.running_mean[i] = u(rng) - 1.0;
      bn.running_var[i] = u(rng);
    }
  }
  // Random BN affine and biases so no parameter sits at a symmetric point.
  for (auto& p : model.parameters()) {
    if (p.name.find("bias") != std::string::npos || p.name.find("bn_") != std::string::npos) {
      p.value.vec() += random_tensor(p.value.shape(), rng, 0.1).vec();
    }
  }
  const Tensor x = random_tensor({batch, 32}, rng);
  std::vector<int> labels;
  for (Index i = 0; i < batch; ++i) labels.push_back(static_cast<int>(i % 4));

  auto loss = [&] {
    return sinceeg::softmax_cross_entropy(model.forward(x, sinceeg::Mode::eval), labels).loss;
  };
  const auto res = sinceeg::softmax_cross_entropy(model.forward(x, sinceeg::Mode::eval), labels);
  model.backward(res.logit_grad);

  Report r;
  for (auto& p : model.parameters()) {
    const Tensor analytic = p.grad;
    check_tensor(r, p.value, analytic, loss, 1e-6, p.name);
  }
  return r;
}

}  // namespace gradcheck
