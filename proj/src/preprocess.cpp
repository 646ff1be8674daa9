#include "sinceeg/preprocess.hpp"

#include "sinceeg/fingerprint.hpp"
#include "sinceeg/sincconv.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sinceeg {

const char* to_string(Emotion e) { return kEmotionNames.at(static_cast<std::size_t>(e)); }

const char* to_string(Cohort c) { return c == Cohort::td ? "td" : "asd"; }

Emotion parse_emotion(const std::string& name) {
  for (int i = 0; i < kNumEmotions; ++i) {
    if (name == kEmotionNames[static_cast<std::size_t>(i)]) return static_cast<Emotion>(i);
  }
  throw std::invalid_argument("unknown emotion '" + name + "'");
}

Cohort parse_cohort(const std::string& name) {
  if (name == "td" || name == "TD") return Cohort::td;
  if (name == "asd" || name == "ASD") return Cohort::asd;
  throw std::invalid_argument("unknown cohort '" + name + "' (expected td or asd)");
}

Eigen::VectorXd channel_average(const Eigen::MatrixXd& samples) {
  if (samples.rows() < 1) throw std::invalid_argument("channel_average: need at least one channel");
  return samples.colwise().mean().transpose();
}

namespace {

Eigen::VectorXd unit_lowpass(double cutoff, const Eigen::VectorXd& window) {
  Eigen::VectorXd h = make_kernel(0.0, cutoff, window);
  return h / h.sum();
}

// Causal FIR with zero initial state.
Eigen::VectorXd lfilter(const Eigen::VectorXd& h, const Eigen::VectorXd& x) {
  const Index n = x.size(), taps = h.size();
  Eigen::VectorXd y = Eigen::VectorXd::Zero(n);
  for (Index i = 0; i < n; ++i) {
    const Index k_max = std::min(taps - 1, i);
    double acc = 0.0;
    for (Index k = 0; k <= k_max; ++k) acc += h[k] * x[i - k];
    y[i] = acc;
  }
  return y;
}

}  // namespace

Eigen::VectorXd bandpass_kernel(double sample_rate, double low_hz, double high_hz, Index taps) {
  if (!(low_hz > 0.0 && low_hz < high_hz && high_hz < 0.5 * sample_rate)) {
    throw std::invalid_argument("bandpass: need 0 < low_hz < high_hz < sample_rate/2");
  }
  if (taps < 3 || taps % 2 == 0) throw std::invalid_argument("bandpass: taps must be odd and >= 3");
  const Eigen::VectorXd w = hamming_window(taps);
  return unit_lowpass(high_hz / sample_rate, w) - unit_lowpass(low_hz / sample_rate, w);
}

Eigen::VectorXd bandpass_fir(const Eigen::VectorXd& sequence, double sample_rate, double low_hz, double high_hz,
                             Index taps) {
  const Eigen::VectorXd h = bandpass_kernel(sample_rate, low_hz, high_hz, taps);
  const Index n = sequence.size();
  if (n < 2) throw std::invalid_argument("bandpass: sequence too short");
  const Index pad = std::min<Index>(3 * taps, n - 1);

  Eigen::VectorXd ext(n + 2 * pad);
  for (Index i = 0; i < pad; ++i) {
    ext[i] = 2.0 * sequence[0] - sequence[pad - i];
    ext[pad + n + i] = 2.0 * sequence[n - 1] - sequence[n - 2 - i];
  }
  ext.segment(pad, n) = sequence;

  Eigen::VectorXd y = lfilter(h, ext);
  y.reverseInPlace();
  y = lfilter(h, y);
  y.reverseInPlace();
  return y.segment(pad, n);
}

Eigen::VectorXd amplitude_normalize(const Eigen::VectorXd& sequence) {
  if (sequence.size() < 2) throw std::invalid_argument("amplitude_normalize: need at least 2 samples");
  const double mean = sequence.mean();
  const Eigen::ArrayXd centered = sequence.array() - mean;
  const double sd = std::sqrt(centered.square().mean());
  return (centered / std::max(sd, 1e-12)).matrix();
}

ZcaTransform ZcaTransform::fit(const Eigen::MatrixXd& data, double eps) {
  if (data.rows() < 2) throw std::invalid_argument("zca: need at least 2 trials");
  if (!data.allFinite()) throw std::invalid_argument("zca: input contains non-finite values");
  ZcaTransform z;
  z.mean = data.colwise().mean();
  const Eigen::MatrixXd centered = data.rowwise() - z.mean;
  const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(data.rows() - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) throw std::runtime_error("zca: eigendecomposition failed");
  const Eigen::VectorXd lambda = eig.eigenvalues().cwiseMax(0.0);
  const Eigen::VectorXd scale = (lambda.array() + eps).rsqrt();
  const Eigen::MatrixXd& E = eig.eigenvectors();
  z.transform = E * scale.asDiagonal() * E.transpose();
  // Exact symmetry; the product above is symmetric only up to rounding.
  z.transform = 0.5 * (z.transform + z.transform.transpose()).eval();
  return z;
}

Eigen::MatrixXd ZcaTransform::apply(const Eigen::MatrixXd& rows) const {
  if (rows.cols() != mean.size()) throw std::invalid_argument("zca: feature count mismatch");
  return (rows.rowwise() - mean) * transform;
}

Eigen::VectorXd ZcaTransform::apply(const Eigen::VectorXd& sequence) const {
  if (sequence.size() != mean.size()) throw std::invalid_argument("zca: feature count mismatch");
  return transform * (sequence - mean.transpose());
}

ZcaResult zca_whiten(const Eigen::MatrixXd& data, double eps) {
  const ZcaTransform z = ZcaTransform::fit(data, eps);
  return {z.apply(data), z.transform};
}

PreprocessConfig PreprocessConfig::paper_scale() { return {}; }

PreprocessConfig PreprocessConfig::desk_scale() {
  PreprocessConfig c;
  c.taps = 63;
  return c;
}

std::string PreprocessConfig::fingerprint() const {
  nlohmann::json j = *this;
  j["pipeline"] = {"channel_average", "bandpass_fir", "amplitude_normalize", "zca_whiten"};
  return sinceeg::fingerprint(j);
}

void to_json(nlohmann::json& j, const PreprocessConfig& c) {
  j = {{"low_hz", c.low_hz}, {"high_hz", c.high_hz}, {"taps", c.taps}, {"zca", c.zca}, {"zca_eps", c.zca_eps}};
}

void from_json(const nlohmann::json& j, PreprocessConfig& c) {
  c.low_hz = j.at("low_hz").get<double>();
  c.high_hz = j.at("high_hz").get<double>();
  c.taps = j.at("taps").get<Index>();
  c.zca = j.at("zca").get<bool>();
  c.zca_eps = j.at("zca_eps").get<double>();
}

Eigen::VectorXd preprocess_trial(const TrialRecord& trial, const PreprocessConfig& config) {
  return amplitude_normalize(
      bandpass_fir(channel_average(trial), trial.sample_rate, config.low_hz, config.high_hz, config.taps));
}

}  // namespace sinceeg
