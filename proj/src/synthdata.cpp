#include "sinceeg/synthdata.hpp"

#include "binary_io.hpp"
#include "sinceeg/fingerprint.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>
#include <sstream>
#include <thread>

namespace sinceeg {

const std::vector<EegBand>& eeg_bands() {
  static const std::vector<EegBand> bands = {{"delta", 1.0, 4.0},    {"theta", 4.0, 8.0},  {"alpha_lo", 8.0, 9.0},
                                             {"alpha_hi", 9.0, 13.0}, {"beta", 13.0, 30.0}, {"gamma", 30.0, 45.0}};
  return bands;
}

const EegBand& eeg_band(const std::string& name) {
  for (const auto& b : eeg_bands()) {
    if (b.name == name) return b;
  }
  throw std::invalid_argument("unknown EEG band '" + name + "'");
}

CohortSpec CohortSpec::paper_scale() {
  CohortSpec s;
  s.band_amplitudes = {{"delta", 4.0}, {"theta", 4.0}, {"alpha_lo", 4.0}, {"alpha_hi", 6.0}, {"beta", 4.0}, {"gamma", 2.0}};
  s.erp = {{{150.0, 40.0, 64.0, "theta"}, {225.0, 40.0, 64.0, "alpha_hi"}, {300.0, 40.0, 64.0, "beta"},
            {375.0, 40.0, 64.0, "gamma"}}};
  return s;
}

CohortSpec CohortSpec::desk_scale() {
  CohortSpec s = paper_scale();
  s.sample_rate = 250.0;
  s.epoch_seconds = 0.5;
  return s;
}

Index CohortSpec::time_samples() const { return static_cast<Index>(std::lround(epoch_seconds * sample_rate)); }

double CohortSpec::suppression_factor(const std::string& band) const {
  auto it = suppression.find(band);
  if (it != suppression.end()) return it->second;
  if (band == "alpha_lo" || band == "alpha_hi") {
    it = suppression.find("alpha");
    if (it != suppression.end()) return it->second;
  }
  return 1.0;
}

void CohortSpec::validate() const {
  if (n_participants < 0) throw std::invalid_argument("cohort: n_participants must be >= 0");
  if (trials_per_participant < 0 || trials_per_participant % kNumEmotions != 0) {
    throw std::invalid_argument("cohort: trials_per_participant must be a multiple of 4");
  }
  if (channels < 1) throw std::invalid_argument("cohort: channels must be >= 1");
  if (!(sample_rate > 0.0) || !(epoch_seconds > 0.0) || time_samples() < 2) {
    throw std::invalid_argument("cohort: sample_rate and epoch_seconds must give at least 2 samples");
  }
  for (const auto& [band, amp] : band_amplitudes) {
    eeg_band(band);
    if (!(amp >= 0.0)) throw std::invalid_argument("cohort: band amplitude must be >= 0");
  }
  for (const auto& [band, factor] : suppression) {
    if (band != "alpha") eeg_band(band);
    if (!(factor > 0.0 && factor <= 1.0)) throw std::invalid_argument("cohort: suppression factors must be in (0, 1]");
  }
  for (const auto& e : erp) {
    eeg_band(e.carrier_band);
    if (e.latency_ms < 0.0 || e.latency_ms > 1000.0 * epoch_seconds) {
      throw std::invalid_argument("cohort: ERP latency outside the epoch");
    }
    if (!(e.width_ms > 0.0) || !(e.amplitude >= 0.0)) throw std::invalid_argument("cohort: invalid ERP width/amplitude");
  }
  if (!(noise_level >= 0.0) || !(phase_jitter >= 0.0) || !(latency_jitter_ms >= 0.0)) {
    throw std::invalid_argument("cohort: noise and jitter must be >= 0");
  }
}

void to_json(nlohmann::json& j, const CohortSpec& s) {
  nlohmann::json erp = nlohmann::json::array();
  for (std::size_t i = 0; i < s.erp.size(); ++i) {
    const auto& e = s.erp[i];
    erp.push_back({{"emotion", kEmotionNames[i]},
                   {"latency_ms", e.latency_ms},
                   {"width_ms", e.width_ms},
                   {"amplitude", e.amplitude},
                   {"carrier_band", e.carrier_band}});
  }
  j = {{"n_participants", s.n_participants},
       {"trials_per_participant", s.trials_per_participant},
       {"channels", s.channels},
       {"sample_rate", s.sample_rate},
       {"epoch_seconds", s.epoch_seconds},
       {"band_amplitudes", s.band_amplitudes},
       {"suppression", s.suppression},
       {"erp_signatures", erp},
       {"noise_level", s.noise_level},
       {"phase_jitter", s.phase_jitter},
       {"latency_jitter_ms", s.latency_jitter_ms},
       {"suppress_erp_carriers", s.suppress_erp_carriers},
       {"seed", s.seed}};
}

void from_json(const nlohmann::json& j, CohortSpec& s) {
  s.n_participants = j.at("n_participants").get<Index>();
  s.trials_per_participant = j.at("trials_per_participant").get<Index>();
  s.channels = j.at("channels").get<Index>();
  s.sample_rate = j.at("sample_rate").get<double>();
  s.epoch_seconds = j.at("epoch_seconds").get<double>();
  s.band_amplitudes = j.at("band_amplitudes").get<std::map<std::string, double>>();
  s.suppression = j.at("suppression").get<std::map<std::string, double>>();
  const auto& erp = j.at("erp_signatures");
  if (erp.size() != s.erp.size()) throw std::invalid_argument("cohort: expected one ERP signature per emotion");
  for (std::size_t i = 0; i < s.erp.size(); ++i) {
    s.erp[i] = {erp[i].at("latency_ms").get<double>(), erp[i].at("width_ms").get<double>(),
                erp[i].at("amplitude").get<double>(), erp[i].at("carrier_band").get<std::string>()};
  }
  s.noise_level = j.at("noise_level").get<double>();
  s.phase_jitter = j.at("phase_jitter").get<double>();
  s.latency_jitter_ms = j.at("latency_jitter_ms").get<double>();
  s.suppress_erp_carriers = j.at("suppress_erp_carriers").get<bool>();
  s.seed = j.at("seed").get<std::uint64_t>();
}

std::map<std::string, double> parse_band_factors(const std::string& text) {
  std::map<std::string, double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("expected band=factor, got '" + item + "'");
    const std::string band = item.substr(0, eq);
    if (band != "alpha") eeg_band(band);
    std::size_t used = 0;
    const double value = std::stod(item.substr(eq + 1), &used);
    if (used != item.size() - eq - 1) throw std::invalid_argument("bad factor in '" + item + "'");
    out[band] = value;
  }
  return out;
}

namespace {

// Voss-McCartney: rows refreshed at octave-spaced rates plus a white row.
Eigen::VectorXd pink_noise(Index n, Rng& rng) {
  constexpr int kRows = 16;
  std::normal_distribution<double> normal(0.0, 1.0);
  std::array<double, kRows> rows{};
  for (double& r : rows) r = normal(rng);
  double sum = 0.0;
  for (double r : rows) sum += r;
  Eigen::VectorXd out(n);
  for (Index i = 0; i < n; ++i) {
    const auto counter = static_cast<std::uint64_t>(i + 1);
    const int row = std::min(std::countr_zero(counter), kRows - 1);
    const double fresh = normal(rng);
    sum += fresh - rows[static_cast<std::size_t>(row)];
    rows[static_cast<std::size_t>(row)] = fresh;
    out[i] = (sum + normal(rng)) / std::sqrt(static_cast<double>(kRows + 1));
  }
  return out;
}

}  // namespace

TrialRecord gen_trial(const CohortSpec& spec, Emotion emotion, Cohort cohort, std::uint32_t participant_id, Rng& rng) {
  const Index T = spec.time_samples();
  const Index C = spec.channels;
  const double sr = spec.sample_rate;
  constexpr double two_pi = 2.0 * std::numbers::pi;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  TrialRecord trial;
  trial.samples = Eigen::MatrixXd::Zero(C, T);
  trial.label = emotion;
  trial.participant_id = participant_id;
  trial.cohort = cohort;
  trial.sample_rate = sr;

  const Eigen::ArrayXd t = Eigen::ArrayXd::LinSpaced(T, 0.0, static_cast<double>(T - 1)) / sr;

  for (const EegBand& band : eeg_bands()) {
    const double f = band.lo_hz + (band.hi_hz - band.lo_hz) * unit(rng);
    const double phase = two_pi * unit(rng);
    const auto amp_it = spec.band_amplitudes.find(band.name);
    const double amp = (amp_it == spec.band_amplitudes.end() ? 0.0 : amp_it->second) * spec.suppression_factor(band.name);
    for (Index c = 0; c < C; ++c) {
      const double jitter = spec.phase_jitter * normal(rng);
      trial.samples.row(c).array() += amp * (two_pi * f * t + phase + jitter).sin();
    }
  }

  const ErpSignature& erp = spec.erp[static_cast<std::size_t>(emotion)];
  const EegBand& carrier = eeg_band(erp.carrier_band);
  const double f_c = 0.5 * (carrier.lo_hz + carrier.hi_hz);
  const double latency = (erp.latency_ms + spec.latency_jitter_ms * normal(rng)) / 1000.0;
  const double sigma = erp.width_ms / 1000.0;
  const double erp_amp = erp.amplitude * (spec.suppress_erp_carriers ? spec.suppression_factor(carrier.name) : 1.0);
  const Eigen::ArrayXd burst =
      (-(t - latency).square() / (2.0 * sigma * sigma)).exp() * (two_pi * f_c * (t - latency)).cos();
  for (Index c = 0; c < C; ++c) {
    const double gain = 1.0 + 0.1 * normal(rng);
    trial.samples.row(c).array() += erp_amp * gain * burst.transpose();
  }

  for (Index c = 0; c < C; ++c) trial.samples.row(c) += spec.noise_level * pink_noise(T, rng).transpose();

  // Stored as f32 on disk; keep the in-memory trial on the same grid.
  trial.samples = trial.samples.cast<float>().cast<double>();
  return trial;
}

Dataset gen_cohort(const CohortSpec& spec, Cohort cohort, int jobs) {
  spec.validate();
  const auto n = static_cast<std::size_t>(spec.n_participants);
  std::vector<std::vector<TrialRecord>> per_participant(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t p = next++; p < n; p = next++) {
      Rng rng(mix_seed(spec.seed, p));
      std::vector<Emotion> labels;
      for (Index i = 0; i < spec.trials_per_participant; ++i) labels.push_back(static_cast<Emotion>(i % kNumEmotions));
      std::shuffle(labels.begin(), labels.end(), rng);
      for (Emotion e : labels) per_participant[p].push_back(gen_trial(spec, e, cohort, static_cast<std::uint32_t>(p), rng));
    }
  };
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
  }
  Dataset ds;
  ds.trials.reserve(n * static_cast<std::size_t>(spec.trials_per_participant));
  for (auto& trials : per_participant) std::move(trials.begin(), trials.end(), std::back_inserter(ds.trials));
  ds.manifest = {{"format", "EEGD"},
                 {"format_version", kDatasetVersion},
                 {"cohort", to_string(cohort)},
                 {"spec", spec},
                 {"n_trials", ds.trials.size()},
                 {"channels", spec.channels},
                 {"time", spec.time_samples()},
                 {"sample_rate", spec.sample_rate},
                 {"emotions", kEmotionNames}};
  return ds;
}

namespace {

constexpr char kMagic[4] = {'E', 'E', 'G', 'D'};

}  // namespace

void write_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  nlohmann::json manifest = dataset.manifest;
  manifest["format_version"] = kDatasetVersion;
  manifest["n_trials"] = dataset.trials.size();
  Index channels = manifest.value("channels", Index{0});
  Index time = manifest.value("time", Index{0});
  if (!dataset.trials.empty()) {
    channels = dataset.trials.front().channels();
    time = dataset.trials.front().time();
    manifest["sample_rate"] = dataset.trials.front().sample_rate;
  }
  manifest["channels"] = channels;
  manifest["time"] = time;
  for (const TrialRecord& tr : dataset.trials) {
    if (tr.channels() != channels || tr.time() != time) {
      throw std::invalid_argument("write_dataset: all trials must share channels and length");
    }
  }
  const std::string text = manifest.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError(FormatErrc::io_error, "cannot open " + path.string() + " for writing");
  out.write(kMagic, 4);
  detail::write_le<std::uint16_t>(out, kDatasetVersion);
  detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(text.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const TrialRecord& tr : dataset.trials) {
    detail::write_le<std::uint32_t>(out, tr.participant_id);
    detail::write_le<std::uint8_t>(out, static_cast<std::uint8_t>(tr.label));
    detail::write_le<std::uint8_t>(out, static_cast<std::uint8_t>(tr.cohort));
    for (Index c = 0; c < channels; ++c) {
      for (Index i = 0; i < time; ++i) detail::write_le<float>(out, static_cast<float>(tr.samples(c, i)));
    }
  }
  out.flush();
  if (!out) throw FormatError(FormatErrc::io_error, "write failed for " + path.string());
}

Dataset read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(FormatErrc::io_error, "cannot open dataset " + path.string());
  char magic[4];
  detail::read_exact(in, magic, 4, "magic");
  if (!std::equal(magic, magic + 4, kMagic)) throw FormatError(FormatErrc::bad_magic, path.string() + " is not an EEGD file");
  const auto version = detail::read_le<std::uint16_t>(in, "version");
  if (version != kDatasetVersion) {
    throw FormatError(FormatErrc::version_mismatch, "dataset version " + std::to_string(version) + " unsupported");
  }
  const auto len = detail::read_le<std::uint32_t>(in, "manifest length");
  std::string text(len, '\0');
  detail::read_exact(in, text.data(), len, "manifest");

  Dataset ds;
  Index n_trials = 0, channels = 0, time = 0;
  double sample_rate = 0.0;
  try {
    ds.manifest = nlohmann::json::parse(text);
    n_trials = ds.manifest.at("n_trials").get<Index>();
    channels = ds.manifest.at("channels").get<Index>();
    time = ds.manifest.at("time").get<Index>();
    sample_rate = ds.manifest.value("sample_rate", 0.0);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(FormatErrc::bad_header, std::string("dataset manifest: ") + e.what());
  }
  if (n_trials < 0 || (n_trials > 0 && (channels < 1 || time < 1))) {
    throw FormatError(FormatErrc::bad_header, "dataset manifest has invalid dimensions");
  }

  std::vector<float> buf(static_cast<std::size_t>(channels * time));
  ds.trials.reserve(static_cast<std::size_t>(n_trials));
  for (Index n = 0; n < n_trials; ++n) {
    TrialRecord tr;
    tr.participant_id = detail::read_le<std::uint32_t>(in, "participant id");
    const auto label = detail::read_le<std::uint8_t>(in, "label");
    const auto cohort = detail::read_le<std::uint8_t>(in, "cohort");
    if (label >= kNumEmotions || cohort > 1) throw FormatError(FormatErrc::bad_header, "invalid label or cohort byte");
    tr.label = static_cast<Emotion>(label);
    tr.cohort = static_cast<Cohort>(cohort);
    tr.sample_rate = sample_rate;
    tr.samples.resize(channels, time);
    for (Index c = 0; c < channels; ++c) {
      for (Index i = 0; i < time; ++i) tr.samples(c, i) = detail::read_le<float>(in, "samples");
    }
    ds.trials.push_back(std::move(tr));
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw FormatError(FormatErrc::bad_header, "trailing bytes after the last trial");
  }
  return ds;
}

void export_csv(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw FormatError(FormatErrc::io_error, "cannot open " + path.string() + " for writing");
  out << "participant,trial,label,cohort,channel,t_index,value\n";
  out.precision(9);
  for (std::size_t n = 0; n < dataset.trials.size(); ++n) {
    const TrialRecord& tr = dataset.trials[n];
    for (Index c = 0; c < tr.channels(); ++c) {
      for (Index i = 0; i < tr.time(); ++i) {
        out << tr.participant_id << ',' << n << ',' << to_string(tr.label) << ',' << to_string(tr.cohort) << ',' << c
            << ',' << i << ',' << tr.samples(c, i) << '\n';
      }
    }
  }
}

std::map<std::uint32_t, std::vector<std::size_t>> trials_by_participant(const Dataset& dataset) {
  std::map<std::uint32_t, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < dataset.trials.size(); ++i) groups[dataset.trials[i].participant_id].push_back(i);
  return groups;
}

}  // namespace sinceeg
