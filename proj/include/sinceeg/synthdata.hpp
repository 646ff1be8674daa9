#pragma once

#include "sinceeg/errors.hpp"
#include "sinceeg/layers.hpp"
#include "sinceeg/preprocess.hpp"

#include "json.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace sinceeg {

struct EegBand {
  std::string name;
  double lo_hz;
  double hi_hz;
};

// delta 1-4, theta 4-8, alpha_lo 8-9, alpha_hi 9-13, beta 13-30, gamma 30-45 Hz.
const std::vector<EegBand>& eeg_bands();
const EegBand& eeg_band(const std::string& name);

struct ErpSignature {
  double latency_ms = 150.0;
  double width_ms = 40.0;  // Gaussian standard deviation
  double amplitude = 64.0;
  std::string carrier_band = "theta";
};

struct CohortSpec {
  Index n_participants = 4;
  Index trials_per_participant = 48;
  Index channels = 32;
  double sample_rate = 500.0;
  double epoch_seconds = 2.0;
  std::map<std::string, double> band_amplitudes;
  // Multiplicative factors in (0, 1]; "alpha" expands to alpha_lo + alpha_hi.
  std::map<std::string, double> suppression;
  std::array<ErpSignature, kNumEmotions> erp;
  double noise_level = 4.0;
  double phase_jitter = 0.3;       // radians, per channel
  double latency_jitter_ms = 15.0;
  // Suppressed bands also attenuate ERP bursts whose carrier lies in them.
  bool suppress_erp_carriers = true;
  std::uint64_t seed = 1;

  // 500 Hz, 2 s epochs, 32 channels.
  static CohortSpec paper_scale();
  // 250 Hz, 0.5 s epochs.
  static CohortSpec desk_scale();

  Index time_samples() const;
  double suppression_factor(const std::string& band) const;
  void validate() const;
};

void to_json(nlohmann::json& j, const CohortSpec& s);
void from_json(const nlohmann::json& j, CohortSpec& s);

// Parses "alpha_hi=0.6,beta=0.6".
std::map<std::string, double> parse_band_factors(const std::string& text);

struct Dataset {
  nlohmann::json manifest;
  std::vector<TrialRecord> trials;
};

// Draws happen in a fixed order that does not depend on amplitudes or
// suppression, so two specs differing only in those produce paired noise.
TrialRecord gen_trial(const CohortSpec& spec, Emotion emotion, Cohort cohort, std::uint32_t participant_id, Rng& rng);

// Per-participant streams derived from spec.seed; labels balanced and shuffled.
// Output does not depend on jobs.
Dataset gen_cohort(const CohortSpec& spec, Cohort cohort, int jobs = 1);

inline constexpr std::uint16_t kDatasetVersion = 1;

// "EEGD", u16 version, u32 manifest length, JSON manifest, then per trial:
// u32 participant, u8 label, u8 cohort, channels*time f32 (little-endian).
void write_dataset(const Dataset& dataset, const std::filesystem::path& path);
// Throws FormatError; never returns a partial dataset.
Dataset read_dataset(const std::filesystem::path& path);

// One row per sample: participant,trial,label,cohort,channel,t_index,value
void export_csv(const Dataset& dataset, const std::filesystem::path& path);

// Trial indices grouped by participant id, in file order.
std::map<std::uint32_t, std::vector<std::size_t>> trials_by_participant(const Dataset& dataset);

}  // namespace sinceeg
