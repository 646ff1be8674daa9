#include "sinceeg/sincconv.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <complex>

namespace sinceeg {

namespace {

double signum(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

// patches(k, t) = x[t + k - pad], zero outside the signal.
void fill_patches(const double* x, Index time, Index kernel_len, RowMatrixXd& patches) {
  const Index pad = (kernel_len - 1) / 2;
  patches.setZero(kernel_len, time);
  for (Index k = 0; k < kernel_len; ++k) {
    const Index shift = k - pad;
    const Index t0 = std::max<Index>(0, -shift);
    const Index t1 = std::min<Index>(time, time - shift);
    if (t1 > t0) patches.row(k).segment(t0, t1 - t0) = Eigen::Map<const Eigen::RowVectorXd>(x + t0 + shift, t1 - t0);
  }
}

}  // namespace

KernelGrads kernel_grads(double f1, double f2, const Eigen::VectorXd& window) {
  const Index len = window.size();
  KernelGrads g{Eigen::VectorXd(len), Eigen::VectorXd(len)};
  constexpr double two_pi = 2.0 * std::numbers::pi;
  for (Index k = 0; k < len; ++k) {
    const double n = tap_time(k, len);
    g.d_f2[k] = 2.0 * std::cos(two_pi * f2 * n) * window[k];
    g.d_f1[k] = -2.0 * std::cos(two_pi * f1 * n) * window[k];
  }
  return g;
}

Cutoffs effective_cutoffs(const FilterParams& p, double min_band) {
  const double f1 = std::min(std::abs(p.f_low_raw), 0.5 - min_band);
  const double f2 = std::min(f1 + std::abs(p.band_raw) + min_band, 0.5);
  return {f1, f2};
}

CutoffJacobian effective_cutoff_jacobian(const FilterParams& p, double min_band) {
  CutoffJacobian j;
  const bool low_free = std::abs(p.f_low_raw) < 0.5 - min_band;
  j.df1_dlow = low_free ? signum(p.f_low_raw) : 0.0;
  const double f1 = std::min(std::abs(p.f_low_raw), 0.5 - min_band);
  const bool high_free = f1 + std::abs(p.band_raw) + min_band < 0.5;
  if (high_free) {
    j.df2_dlow = j.df1_dlow;
    j.df2_dband = signum(p.band_raw);
  }
  return j;
}

Filterbank::Filterbank(std::vector<FilterParams> params, Index kernel_len, double sample_rate, double min_band_hz)
    : params_(std::move(params)), sample_rate_(sample_rate), min_band_(min_band_hz / sample_rate) {
  if (params_.empty()) throw std::invalid_argument("Filterbank: need at least one filter");
  if (kernel_len < 3) throw std::invalid_argument("Filterbank: kernel_len must be >= 3");
  if (!(sample_rate > 0.0)) throw std::invalid_argument("Filterbank: sample_rate must be positive");
  if (!(min_band_ >= 0.0 && min_band_ < 0.5)) throw std::invalid_argument("Filterbank: min_band out of range");
  window_ = hamming_window(kernel_len);
}

Filterbank Filterbank::spread(Index n_filters, Index kernel_len, double sample_rate, double min_band_hz,
                              double init_band_hz) {
  if (n_filters < 1) throw std::invalid_argument("Filterbank::spread: n_filters must be >= 1");
  const double lo = 1.0;
  const double hi = std::max(lo, 0.5 * sample_rate - 2.0);
  std::vector<FilterParams> params(static_cast<std::size_t>(n_filters));
  for (Index i = 0; i < n_filters; ++i) {
    const double frac = n_filters == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(n_filters - 1);
    const double f1_hz = lo * std::pow(hi / lo, frac);
    params[static_cast<std::size_t>(i)].f_low_raw = f1_hz / sample_rate;
    params[static_cast<std::size_t>(i)].band_raw = std::max(init_band_hz - min_band_hz, 0.0) / sample_rate;
  }
  return Filterbank(std::move(params), kernel_len, sample_rate, min_band_hz);
}

Filterbank Filterbank::from_cutoffs_hz(const std::vector<Cutoffs>& cutoffs_hz, Index kernel_len, double sample_rate,
                                       double min_band_hz) {
  std::vector<FilterParams> params;
  for (const Cutoffs& c : cutoffs_hz) {
    if (!(c.f1 >= 0.0 && c.f2 - c.f1 >= min_band_hz - 1e-9 && c.f2 <= 0.5 * sample_rate + 1e-9)) {
      throw std::invalid_argument("Filterbank::from_cutoffs_hz: cut-offs violate 0 <= f1, f2 - f1 >= min_band, f2 <= nyquist");
    }
    params.push_back({c.f1 / sample_rate, std::max(0.0, (c.f2 - c.f1 - min_band_hz) / sample_rate)});
  }
  return Filterbank(std::move(params), kernel_len, sample_rate, min_band_hz);
}

Cutoffs Filterbank::cutoffs(Index i) const { return effective_cutoffs(params_.at(static_cast<std::size_t>(i)), min_band_); }

CutoffJacobian Filterbank::cutoff_jacobian(Index i) const {
  return effective_cutoff_jacobian(params_.at(static_cast<std::size_t>(i)), min_band_);
}

Cutoffs Filterbank::cutoffs_hz(Index i) const {
  const Cutoffs c = cutoffs(i);
  return {c.f1 * sample_rate_, c.f2 * sample_rate_};
}

Eigen::VectorXd Filterbank::kernel(Index i) const {
  const Cutoffs c = cutoffs(i);
  return make_kernel(c.f1, c.f2, window_);
}

RowMatrixXd Filterbank::kernels() const {
  RowMatrixXd k(size(), kernel_len());
  for (Index i = 0; i < size(); ++i) k.row(i) = kernel(i).transpose();
  return k;
}

Tensor fir_bank_forward(const Tensor& signal, const RowMatrixXd& kernels) {
  if (signal.rank() != 2) throw std::invalid_argument("fir_bank_forward: signal must be [batch x time]");
  const Index batch = signal.dim(0);
  const Index time = signal.dim(1);
  const Index n_filters = kernels.rows();
  const Index len = kernels.cols();
  if (time < len) throw std::invalid_argument("fir_bank_forward: signal shorter than kernel");

  Tensor out({batch, n_filters, time});
  RowMatrixXd patches;
  for (Index b = 0; b < batch; ++b) {
    fill_patches(signal.data() + b * time, time, len, patches);
    Eigen::Map<RowMatrixXd>(out.data() + b * n_filters * time, n_filters, time).noalias() = kernels * patches;
  }
  return out;
}

FirBankGrads fir_bank_backward(const Tensor& upstream, const Tensor& signal, const RowMatrixXd& kernels,
                               bool need_signal_grad) {
  if (signal.rank() != 2) throw std::invalid_argument("fir_bank_backward: signal must be [batch x time]");
  const Index batch = signal.dim(0);
  const Index time = signal.dim(1);
  const Index n_filters = kernels.rows();
  const Index len = kernels.cols();
  require_shape(upstream, {batch, n_filters, time}, "fir_bank_backward upstream");

  FirBankGrads grads;
  grads.kernels = RowMatrixXd::Zero(n_filters, len);
  if (need_signal_grad) grads.signal = Tensor({batch, time});

  const Index pad = (len - 1) / 2;
  RowMatrixXd patches;
  RowMatrixXd patch_grad;
  for (Index b = 0; b < batch; ++b) {
    Eigen::Map<const RowMatrixXd> up(upstream.data() + b * n_filters * time, n_filters, time);
    fill_patches(signal.data() + b * time, time, len, patches);
    grads.kernels.noalias() += up * patches.transpose();
    if (need_signal_grad) {
      patch_grad.noalias() = kernels.transpose() * up;
      double* dx = grads.signal.data() + b * time;
      for (Index k = 0; k < len; ++k) {
        const Index shift = k - pad;
        const Index t0 = std::max<Index>(0, -shift);
        const Index t1 = std::min<Index>(time, time - shift);
        if (t1 > t0) {
          Eigen::Map<Eigen::RowVectorXd>(dx + t0 + shift, t1 - t0) += patch_grad.row(k).segment(t0, t1 - t0);
        }
      }
    }
  }
  return grads;
}

Tensor sincconv_forward(const Tensor& signal, const Filterbank& bank) { return fir_bank_forward(signal, bank.kernels()); }

std::vector<FilterParamGrad> filter_param_grads(const RowMatrixXd& kernel_grad, const Filterbank& bank) {
  if (kernel_grad.rows() != bank.size() || kernel_grad.cols() != bank.kernel_len()) {
    throw std::invalid_argument("filter_param_grads: kernel gradient shape mismatch");
  }
  std::vector<FilterParamGrad> out(static_cast<std::size_t>(bank.size()));
  for (Index i = 0; i < bank.size(); ++i) {
    const Cutoffs c = bank.cutoffs(i);
    const KernelGrads kg = kernel_grads(c.f1, c.f2, bank.window());
    const CutoffJacobian j = bank.cutoff_jacobian(i);
    FilterParamGrad& g = out[static_cast<std::size_t>(i)];
    g.d_f1 = kernel_grad.row(i).dot(kg.d_f1.transpose());
    g.d_f2 = kernel_grad.row(i).dot(kg.d_f2.transpose());
    g.d_low_raw = g.d_f1 * j.df1_dlow + g.d_f2 * j.df2_dlow;
    g.d_band_raw = g.d_f2 * j.df2_dband;
  }
  return out;
}

SincConvGrads sincconv_backward(const Tensor& upstream, const Tensor& signal, const Filterbank& bank,
                                bool need_signal_grad) {
  FirBankGrads fg = fir_bank_backward(upstream, signal, bank.kernels(), need_signal_grad);
  return {std::move(fg.signal), filter_param_grads(fg.kernels, bank)};
}

Eigen::VectorXd frequency_response(const Eigen::VectorXd& kernel, Index n_fft) {
  if (n_fft < kernel.size()) throw std::invalid_argument("frequency_response: n_fft must be >= kernel length");
  std::vector<double> padded(static_cast<std::size_t>(n_fft), 0.0);
  std::copy(kernel.data(), kernel.data() + kernel.size(), padded.begin());
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> spectrum;
  fft.fwd(spectrum, padded);
  const Index bins = n_fft / 2 + 1;
  Eigen::VectorXd mag(bins);
  for (Index b = 0; b < bins; ++b) mag[b] = std::abs(spectrum[static_cast<std::size_t>(b)]);
  return mag;
}

Eigen::VectorXd frequency_grid(Index n_fft, double sample_rate) {
  const Index bins = n_fft / 2 + 1;
  Eigen::VectorXd f(bins);
  for (Index b = 0; b < bins; ++b) f[b] = static_cast<double>(b) * sample_rate / static_cast<double>(n_fft);
  return f;
}

}  // namespace sinceeg
