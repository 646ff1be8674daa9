#pragma once

#include "sinceeg/tensor.hpp"

#include <Eigen/Core>

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace sinceeg {

// Unconstrained learnable parameters of one band-pass filter, in normalized
// frequency units (Hz / sample_rate).
struct FilterParams {
  double f_low_raw = 0.0;
  double band_raw = 0.0;
};

// Effective cut-offs derived from FilterParams. Always f1 < f2 <= 0.5.
struct Cutoffs {
  double f1 = 0.0;
  double f2 = 0.0;
};

// Partial derivatives of the effective cut-offs with respect to the raw
// parameters (zero where a clamp is active).
struct CutoffJacobian {
  double df1_dlow = 0.0;
  double df2_dlow = 0.0;
  double df2_dband = 0.0;
};

inline double sinc(double x) { return x == 0.0 ? 1.0 : std::sin(x) / x; }

// Hamming taps w[k] = 0.54 - 0.46 cos(2 pi k / (length - 1)).
template <typename Scalar = double>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> hamming_window(Index length) {
  if (length < 2) throw std::invalid_argument("hamming_window: length must be >= 2");
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> w(length);
  const Scalar denom = static_cast<Scalar>(length - 1);
  for (Index k = 0; k < length; ++k) {
    w[k] = Scalar(0.54) - Scalar(0.46) * std::cos(Scalar(2) * std::numbers::pi_v<Scalar> * Scalar(k) / denom);
  }
  return w;
}

// Symmetric time index of tap k; fractional for even lengths.
inline double tap_time(Index k, Index kernel_len) { return static_cast<double>(k) - 0.5 * static_cast<double>(kernel_len - 1); }

// Windowed band-pass taps g[k] = (2 f2 sinc(2 pi f2 n) - 2 f1 sinc(2 pi f1 n)) w[k].
template <typename Scalar = double>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> make_kernel(Scalar f1, Scalar f2,
                                                     const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& window) {
  const Index len = window.size();
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> g(len);
  constexpr Scalar two_pi = Scalar(2) * std::numbers::pi_v<Scalar>;
  for (Index k = 0; k < len; ++k) {
    const Scalar n = static_cast<Scalar>(tap_time(k, len));
    Scalar bracket;
    if (n == Scalar(0)) {
      bracket = Scalar(2) * (f2 - f1);
    } else {
      bracket = (std::sin(two_pi * f2 * n) - std::sin(two_pi * f1 * n)) / (std::numbers::pi_v<Scalar> * n);
    }
    g[k] = bracket * window[k];
  }
  return g;
}

struct KernelGrads {
  Eigen::VectorXd d_f1;
  Eigen::VectorXd d_f2;
};

// Tap-wise derivatives of make_kernel with respect to the effective cut-offs.
KernelGrads kernel_grads(double f1, double f2, const Eigen::VectorXd& window);

class Filterbank {
 public:
  Filterbank(std::vector<FilterParams> params, Index kernel_len, double sample_rate, double min_band_hz = 1.0);

  // Log-spaced lower cut-offs over [1 Hz, nyquist - 2 Hz], bandwidth init_band_hz.
  static Filterbank spread(Index n_filters, Index kernel_len, double sample_rate, double min_band_hz = 1.0,
                           double init_band_hz = 4.0);
  // Raw parameters that reproduce the given effective cut-offs (Hz).
  static Filterbank from_cutoffs_hz(const std::vector<Cutoffs>& cutoffs_hz, Index kernel_len, double sample_rate,
                                    double min_band_hz = 1.0);

  Index size() const { return static_cast<Index>(params_.size()); }
  Index kernel_len() const { return window_.size(); }
  double sample_rate() const { return sample_rate_; }
  double min_band() const { return min_band_; }
  double min_band_hz() const { return min_band_ * sample_rate_; }
  const Eigen::VectorXd& window() const { return window_; }

  const std::vector<FilterParams>& params() const { return params_; }
  std::vector<FilterParams>& params() { return params_; }

  Cutoffs cutoffs(Index i) const;
  CutoffJacobian cutoff_jacobian(Index i) const;
  // Cut-offs in Hz.
  Cutoffs cutoffs_hz(Index i) const;

  Eigen::VectorXd kernel(Index i) const;
  // n_filters x kernel_len.
  RowMatrixXd kernels() const;

 private:
  std::vector<FilterParams> params_;
  Eigen::VectorXd window_;
  double sample_rate_;
  double min_band_;
};

Cutoffs effective_cutoffs(const FilterParams& p, double min_band);
CutoffJacobian effective_cutoff_jacobian(const FilterParams& p, double min_band);

// Same-length cross-correlation of every row of signal [B x T] with every
// kernel row [F x L]; left zero-padding (L-1)/2. Returns [B x F x T].
Tensor fir_bank_forward(const Tensor& signal, const RowMatrixXd& kernels);

struct FirBankGrads {
  Tensor signal;          // [B x T], empty when not requested
  RowMatrixXd kernels;    // [F x L]
};

FirBankGrads fir_bank_backward(const Tensor& upstream, const Tensor& signal, const RowMatrixXd& kernels,
                               bool need_signal_grad = true);

Tensor sincconv_forward(const Tensor& signal, const Filterbank& bank);

struct FilterParamGrad {
  double d_f1 = 0.0;
  double d_f2 = 0.0;
  double d_low_raw = 0.0;
  double d_band_raw = 0.0;
};

struct SincConvGrads {
  Tensor signal;
  std::vector<FilterParamGrad> params;
};

SincConvGrads sincconv_backward(const Tensor& upstream, const Tensor& signal, const Filterbank& bank,
                                bool need_signal_grad = true);

// Chain rule from per-tap kernel gradients [F x L] to cut-off and raw gradients.
std::vector<FilterParamGrad> filter_param_grads(const RowMatrixXd& kernel_grad, const Filterbank& bank);

// |DFT| of the zero-padded kernel, bins 0..n_fft/2.
Eigen::VectorXd frequency_response(const Eigen::VectorXd& kernel, Index n_fft);

// Physical frequency of each bin returned by frequency_response.
Eigen::VectorXd frequency_grid(Index n_fft, double sample_rate);

}  // namespace sinceeg
