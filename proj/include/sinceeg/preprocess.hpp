#pragma once

#include "sinceeg/tensor.hpp"

#include "json.hpp"

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <string>

namespace sinceeg {

enum class Emotion : std::uint8_t { happy = 0, sad = 1, angry = 2, fear = 3 };
inline constexpr int kNumEmotions = 4;
inline constexpr std::array<const char*, kNumEmotions> kEmotionNames = {"happy", "sad", "angry", "fear"};

enum class Cohort : std::uint8_t { td = 0, asd = 1 };

const char* to_string(Emotion e);
const char* to_string(Cohort c);
Emotion parse_emotion(const std::string& name);
Cohort parse_cohort(const std::string& name);

// One EEG trial; samples are channels x time in microvolts.
struct TrialRecord {
  Eigen::MatrixXd samples;
  Emotion label = Emotion::happy;
  std::uint32_t participant_id = 0;
  Cohort cohort = Cohort::td;
  double sample_rate = 500.0;

  Index channels() const { return samples.rows(); }
  Index time() const { return samples.cols(); }
};

// Mean across channels per time point.
Eigen::VectorXd channel_average(const Eigen::MatrixXd& samples);
inline Eigen::VectorXd channel_average(const TrialRecord& trial) { return channel_average(trial.samples); }

// Hamming-windowed band-pass taps built as the difference of two unit-DC-gain
// windowed-sinc low-passes, so the DC gain is exactly zero.
Eigen::VectorXd bandpass_kernel(double sample_rate, double low_hz, double high_hz, Index taps);

// Zero-phase FIR band-pass: filter, reverse, filter, reverse, with odd
// extension at both ends. Output has the input's length.
Eigen::VectorXd bandpass_fir(const Eigen::VectorXd& sequence, double sample_rate, double low_hz, double high_hz,
                             Index taps);

// Per-sequence z-score with a 1e-12 floor on the standard deviation.
Eigen::VectorXd amplitude_normalize(const Eigen::VectorXd& sequence);

// Zero-phase component analysis fitted on rows of data (one trial per row).
struct ZcaTransform {
  Eigen::RowVectorXd mean;
  Eigen::MatrixXd transform;  // symmetric, time x time

  static ZcaTransform fit(const Eigen::MatrixXd& data, double eps = 1e-5);
  Eigen::MatrixXd apply(const Eigen::MatrixXd& rows) const;
  Eigen::VectorXd apply(const Eigen::VectorXd& sequence) const;
};

struct ZcaResult {
  Eigen::MatrixXd whitened;
  Eigen::MatrixXd transform;
};

ZcaResult zca_whiten(const Eigen::MatrixXd& data, double eps = 1e-5);

struct PreprocessConfig {
  double low_hz = 0.5;
  double high_hz = 45.0;
  Index taps = 501;
  bool zca = false;
  double zca_eps = 1e-5;

  // 501 taps at 500 Hz input.
  static PreprocessConfig paper_scale();
  // 63 taps; 0.5 s epochs at 250 Hz are too short for longer filters.
  static PreprocessConfig desk_scale();

  std::string fingerprint() const;
};

void to_json(nlohmann::json& j, const PreprocessConfig& c);
void from_json(const nlohmann::json& j, PreprocessConfig& c);

// channel_average -> bandpass_fir -> amplitude_normalize. ZCA is fitted per
// training fold and applied separately.
Eigen::VectorXd preprocess_trial(const TrialRecord& trial, const PreprocessConfig& config);

}  // namespace sinceeg
