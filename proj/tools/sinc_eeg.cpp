#include "sinceeg/checkpoint.hpp"
#include "sinceeg/errors.hpp"
#include "sinceeg/fingerprint.hpp"
#include "sinceeg/spectra.hpp"
#include "sinceeg/synthdata.hpp"
#include "sinceeg/trainer.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace sinceeg;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

enum class LogLevel { quiet, info, debug };

LogLevel log_level() {
  static const LogLevel level = [] {
    const char* env = std::getenv("SINC_EEG_LOG");
    if (env == nullptr) return LogLevel::info;
    const std::string v = env;
    if (v == "quiet" || v == "0" || v == "error") return LogLevel::quiet;
    if (v == "debug" || v == "2") return LogLevel::debug;
    return LogLevel::info;
  }();
  return level;
}

void log(LogLevel level, const std::string& msg) {
  if (level <= log_level()) std::cerr << "[sinc_eeg] " << msg << '\n';
}

class FileNotFound : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void require_file(const fs::path& path) {
  if (!fs::exists(path)) throw FileNotFound("file not found: " + path.string());
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw FormatError(FormatErrc::io_error, "cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
}

json read_json(const fs::path& path) {
  require_file(path);
  std::ifstream in(path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(FormatErrc::bad_header, path.string() + ": " + e.what());
  }
}

void make_out_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw FormatError(FormatErrc::io_error, "cannot create directory " + dir.string());
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

json base_manifest(const std::string& command, const std::vector<std::string>& argv) {
  return {{"command", command}, {"argv", argv}, {"tool_version", 1}};
}

// --- gen -------------------------------------------------------------------

struct GenOptions {
  fs::path out;
  std::string cohort = "td";
  Index participants = 4;
  std::uint64_t seed = 1;
  std::optional<std::uint64_t> paired_seed;
  std::string suppress;
  bool paper_scale = false;
  int jobs = 1;
  bool csv = false;
};

int cmd_gen(const GenOptions& o, const std::vector<std::string>& argv) {
  const auto t0 = std::chrono::steady_clock::now();
  CohortSpec spec = o.paper_scale ? CohortSpec::paper_scale() : CohortSpec::desk_scale();
  spec.n_participants = o.participants;
  spec.seed = o.paired_seed.value_or(o.seed);
  if (!o.suppress.empty()) spec.suppression = parse_band_factors(o.suppress);
  const Cohort cohort = parse_cohort(o.cohort);

  make_out_dir(o.out);
  const Dataset ds = gen_cohort(spec, cohort, o.jobs);
  const fs::path data_path = o.out / "dataset.eegd";
  write_dataset(ds, data_path);
  if (o.csv) export_csv(ds, o.out / "dataset.csv");

  json manifest = base_manifest("gen", argv);
  manifest["config"] = {{"cohort", o.cohort}, {"spec", spec}, {"jobs", o.jobs}};
  manifest["seeds"] = {{"seed", spec.seed}};
  manifest["artifacts"] = {{"dataset", data_path.filename().string()}};
  manifest["dataset_fingerprint"] = file_fingerprint(data_path);
  manifest["timings"] = {{"total_seconds", seconds_since(t0)}};
  write_json(o.out / "manifest.json", manifest);

  std::array<Index, kNumEmotions> counts{};
  for (const auto& t : ds.trials) ++counts[static_cast<std::size_t>(t.label)];
  std::cout << "wrote " << data_path.string() << ": " << ds.trials.size() << " trials, " << spec.n_participants
            << " participants, cohort " << o.cohort << ", " << spec.time_samples() << " samples @ " << spec.sample_rate
            << " Hz\n";
  std::cout << "balance:";
  for (int k = 0; k < kNumEmotions; ++k) std::cout << ' ' << kEmotionNames[static_cast<std::size_t>(k)] << '=' << counts[static_cast<std::size_t>(k)];
  std::cout << "\nbands:";
  for (const EegBand& b : eeg_bands()) {
    const auto it = spec.band_amplitudes.find(b.name);
    const double amp = it == spec.band_amplitudes.end() ? 0.0 : it->second;
    std::cout << ' ' << b.name << '=' << amp << "x" << spec.suppression_factor(b.name);
  }
  std::cout << '\n';
  return kExitOk;
}

// --- train -----------------------------------------------------------------

struct TrainOptions {
  fs::path dataset;
  fs::path out;
  std::uint64_t seed = 1;
  int jobs = 1;
  std::string arch = "sincnet";
  bool paper_scale = false;
  std::optional<double> lr;
  std::optional<double> weight_decay;
  std::optional<Index> epochs;
  std::optional<Index> batch_size;
  std::vector<std::uint32_t> participants;
  bool checkpoints = false;
  bool zca = false;
};

std::string fold_stem(std::uint32_t participant, Index fold) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "p%03u_f%02lld", participant, static_cast<long long>(fold));
  return buf;
}

int cmd_train(const TrainOptions& o, const std::vector<std::string>& argv) {
  const auto t0 = std::chrono::steady_clock::now();
  TrainConfig config = o.paper_scale ? TrainConfig::paper_scale() : TrainConfig::desk_scale_config();
  config.seed = o.seed;
  config.arch.arch = parse_arch(o.arch);
  if (o.lr) config.lr = *o.lr;
  if (o.weight_decay) config.weight_decay = *o.weight_decay;
  if (o.epochs) config.epochs = *o.epochs;
  if (o.batch_size) config.batch_size = *o.batch_size;
  config.preprocess.zca = o.zca;
  config.validate();
  if (!(config.lr > 0.0)) throw std::invalid_argument("--lr must be positive");
  if (o.paper_scale) {
    log(LogLevel::quiet, "warning: paper-scale configuration (100 filters x 250 taps, 400 epochs) takes hours per participant");
  }

  require_file(o.dataset);
  const Dataset ds = read_dataset(o.dataset);
  const auto t_loaded = std::chrono::steady_clock::now();

  make_out_dir(o.out / "folds");
  if (o.checkpoints) make_out_dir(o.out / "checkpoints");

  LotoOptions loto;
  loto.jobs = o.jobs;
  loto.participants = o.participants;
  loto.keep_models = o.checkpoints;
  std::size_t done = 0;
  loto.on_fold = [&](const FoldOutput& f) {
    const FoldResult& r = f.result;
    const std::string stem = fold_stem(r.participant, r.fold);
    write_json(o.out / "folds" / (stem + ".json"), r);
    if (f.model) {
      write_checkpoint(o.out / "checkpoints" / (stem + ".snck"), *f.model, fold_seed(config.seed, r.participant, r.fold),
                       {{"participant", r.participant}, {"fold", r.fold}, {"preprocess", config.preprocess.fingerprint()}});
    }
    ++done;
    log(LogLevel::debug, "fold " + stem + " true=" + kEmotionNames[static_cast<std::size_t>(r.true_label)] +
                             " predicted=" + kEmotionNames[static_cast<std::size_t>(r.predicted)]);
    if (done % 48 == 0) log(LogLevel::info, std::to_string(done) + " folds done");
  };
  const std::vector<FoldResult> results = run_loto(config, ds, loto);
  if (results.empty()) throw std::invalid_argument("no participants selected");

  write_aggregate_csv(o.out / "aggregate.csv", results);
  const ConfusionMatrix cm = confusion_matrix(results);
  write_confusion_csv(o.out / "confusion.csv", cm);

  json counts = json::object();
  for (const auto& c : Model(config.arch, 0).parameter_counts()) counts[c.layer] = c.count;
  json artifacts = {{"folds", "folds/"}, {"aggregate", "aggregate.csv"}, {"confusion", "confusion.csv"}};
  if (o.checkpoints) artifacts["checkpoints"] = "checkpoints/";
  json manifest = base_manifest("train", argv);
  manifest["config"] = config;
  manifest["config"]["jobs"] = o.jobs;
  manifest["config"]["participants"] = o.participants;
  manifest["parameter_counts"] = counts;
  manifest["seeds"] = {{"seed", config.seed}, {"fold_seed", "mix(mix(seed, participant), fold)"}};
  manifest["dataset"] = {{"path", fs::absolute(o.dataset).string()}, {"fingerprint", file_fingerprint(o.dataset)}};
  manifest["artifacts"] = artifacts;
  manifest["accuracy"] = accuracy(cm);
  manifest["n_folds"] = results.size();
  manifest["timings"] = {{"load_seconds", std::chrono::duration<double>(t_loaded - t0).count()},
                         {"total_seconds", seconds_since(t0)}};
  write_json(o.out / "manifest.json", manifest);

  std::cout << results.size() << " folds, accuracy " << accuracy(cm) << '\n';
  std::cout << "confusion (rows true, columns predicted: happy sad angry fear)\n" << cm << '\n';
  return kExitOk;
}

// --- shared loading for inspect / compare ----------------------------------

struct Unit {
  std::string label;
  Eigen::VectorXd psd;
};

struct UnitSet {
  double sample_rate = 0.0;
  std::vector<Unit> units;
};

void merge_rate(UnitSet& set, double sr) {
  if (set.sample_rate == 0.0) set.sample_rate = sr;
  if (set.sample_rate != sr) throw std::invalid_argument("models disagree on sample rate");
}

// One unit per participant: the mean PSD of that participant's fold models.
void load_run(const fs::path& dir, Index n_fft, UnitSet& set) {
  const json manifest = read_json(dir / "manifest.json");
  const TrainConfig config = manifest.at("config").get<TrainConfig>();
  merge_rate(set, config.arch.sample_rate);

  std::map<std::uint32_t, std::pair<Eigen::VectorXd, Index>> acc;
  const fs::path ckpt_dir = dir / "checkpoints";
  const fs::path fold_dir = dir / "folds";
  require_file(fold_dir);
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(fold_dir)) {
    if (e.path().extension() == ".json") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  for (const fs::path& f : files) {
    const FoldResult r = read_json(f).get<FoldResult>();
    Eigen::VectorXd psd;
    const fs::path ckpt = ckpt_dir / (f.stem().string() + ".snck");
    if (fs::exists(ckpt)) {
      psd = filter_psd(read_checkpoint(ckpt).model.front_kernels(), n_fft);
    } else if (!r.filters_hz.empty()) {
      psd = filter_psd(Filterbank::from_cutoffs_hz(r.filters_hz, config.arch.kernel_len, config.arch.sample_rate), n_fft);
    } else {
      throw FileNotFound("file not found: " + ckpt.string() + " (cnn runs need --checkpoints)");
    }
    auto& [sum, n] = acc[r.participant];
    if (n == 0) sum = Eigen::VectorXd::Zero(psd.size());
    sum += psd;
    ++n;
  }
  if (acc.empty()) throw FileNotFound("file not found: no fold results in " + fold_dir.string());
  for (const auto& [pid, sn] : acc) {
    set.units.push_back({dir.filename().string() + ":p" + std::to_string(pid), sn.first / static_cast<double>(sn.second)});
  }
}

void load_checkpoint_unit(const fs::path& path, Index n_fft, UnitSet& set) {
  require_file(path);
  const Checkpoint c = read_checkpoint(path);
  merge_rate(set, c.model.config().sample_rate);
  set.units.push_back({path.stem().string(), filter_psd(c.model.front_kernels(), n_fft)});
}

Index check_n_fft(Index n_fft) {
  if (n_fft < 8) throw std::invalid_argument("--n-fft must be >= 8");
  return n_fft;
}

// --- inspect ---------------------------------------------------------------

struct InspectOptions {
  std::vector<fs::path> runs;
  std::vector<fs::path> checkpoints;
  bool fresh = false;
  bool paper_scale = false;
  fs::path out;
  std::string bands = "9-13,13-30";
  Index n_fft = 4096;
  bool svg = false;
};

int cmd_inspect(const InspectOptions& o, const std::vector<std::string>& argv) {
  const auto t0 = std::chrono::steady_clock::now();
  const Index n_fft = check_n_fft(o.n_fft);
  const std::vector<NamedBand> bands = parse_bands(o.bands);
  if (o.runs.empty() && o.checkpoints.empty() && !o.fresh) {
    throw std::invalid_argument("inspect needs --run, --checkpoint or --fresh");
  }
  UnitSet set;
  for (const auto& r : o.runs) load_run(r, n_fft, set);
  for (const auto& c : o.checkpoints) load_checkpoint_unit(c, n_fft, set);
  if (o.fresh) {
    const ArchConfig arch = o.paper_scale ? ArchConfig::paper_scale() : ArchConfig::desk_scale();
    merge_rate(set, arch.sample_rate);
    set.units.push_back({"fresh", filter_psd(Filterbank::spread(arch.n_filters, arch.kernel_len, arch.sample_rate), n_fft)});
  }

  make_out_dir(o.out);
  const Eigen::VectorXd freq = frequency_grid(n_fft, set.sample_rate);
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(freq.size());
  for (const Unit& u : set.units) mean += u.psd;
  mean /= static_cast<double>(set.units.size());

  {
    std::ofstream csv(o.out / "psd.csv");
    if (!csv) throw FormatError(FormatErrc::io_error, "cannot write " + (o.out / "psd.csv").string());
    csv.precision(17);
    csv << "freq";
    for (const Unit& u : set.units) csv << ',' << u.label;
    csv << ",mean\n";
    for (Index i = 0; i < freq.size(); ++i) {
      csv << freq[i];
      for (const Unit& u : set.units) csv << ',' << u.psd[i];
      csv << ',' << mean[i] << '\n';
    }
  }
  {
    std::ofstream csv(o.out / "band_powers.csv");
    if (!csv) throw FormatError(FormatErrc::io_error, "cannot write " + (o.out / "band_powers.csv").string());
    csv.precision(17);
    csv << "model";
    for (const NamedBand& b : bands) csv << ',' << b.name;
    csv << '\n';
    std::cout << "model";
    for (const NamedBand& b : bands) std::cout << '\t' << b.name;
    std::cout << '\n';
    auto emit = [&](const std::string& label, const Eigen::VectorXd& psd) {
      csv << label;
      std::cout << label;
      for (const NamedBand& b : bands) {
        const double p = band_power(freq, psd, b.lo_hz, b.hi_hz);
        csv << ',' << p;
        std::cout << '\t' << p;
      }
      csv << '\n';
      std::cout << '\n';
    };
    for (const Unit& u : set.units) emit(u.label, u.psd);
    emit("mean", mean);
  }
  json artifacts = {{"psd", "psd.csv"}, {"band_powers", "band_powers.csv"}};
  if (o.svg) {
    PsdReport report;
    report.freq_grid = freq;
    report.mean_psd_a = mean;
    report.mean_psd_b = mean;
    write_psd_svg(o.out / "psd.svg", report, "mean", "mean");
    artifacts["svg"] = "psd.svg";
  }

  json inputs = json::array();
  for (const auto& r : o.runs) inputs.push_back({{"run", fs::absolute(r).string()}, {"fingerprint", file_fingerprint(r / "manifest.json")}});
  for (const auto& c : o.checkpoints) inputs.push_back({{"checkpoint", fs::absolute(c).string()}, {"fingerprint", file_fingerprint(c)}});
  json manifest = base_manifest("inspect", argv);
  manifest["config"] = {{"bands", o.bands}, {"n_fft", n_fft}, {"fresh", o.fresh}, {"paper_scale", o.paper_scale}};
  manifest["seeds"] = json::object();
  manifest["inputs"] = inputs;
  manifest["artifacts"] = artifacts;
  manifest["timings"] = {{"total_seconds", seconds_since(t0)}};
  write_json(o.out / "manifest.json", manifest);
  return kExitOk;
}

// --- compare ---------------------------------------------------------------

struct CompareOptions {
  std::vector<fs::path> cohort_a;
  std::vector<fs::path> cohort_b;
  std::string label_a = "A";
  std::string label_b = "B";
  fs::path out;
  std::string bands = "9-13,13-30";
  Index n_fft = 4096;
  double alpha = 0.05;
  bool svg = false;
};

void load_cohort(const std::vector<fs::path>& paths, Index n_fft, UnitSet& set) {
  for (const fs::path& p : paths) {
    if (fs::is_directory(p)) {
      load_run(p, n_fft, set);
    } else {
      load_checkpoint_unit(p, n_fft, set);
    }
  }
}

int cmd_compare(const CompareOptions& o, const std::vector<std::string>& argv) {
  const auto t0 = std::chrono::steady_clock::now();
  const Index n_fft = check_n_fft(o.n_fft);
  const std::vector<NamedBand> bands = parse_bands(o.bands);
  UnitSet a;
  UnitSet b;
  load_cohort(o.cohort_a, n_fft, a);
  load_cohort(o.cohort_b, n_fft, b);
  if (a.sample_rate != b.sample_rate) throw std::invalid_argument("cohorts disagree on sample rate");

  std::vector<Eigen::VectorXd> ua;
  std::vector<Eigen::VectorXd> ub;
  for (const Unit& u : a.units) ua.push_back(u.psd);
  for (const Unit& u : b.units) ub.push_back(u.psd);
  const CohortComparison cmp = cohort_compare(frequency_grid(n_fft, a.sample_rate), ua, ub, bands, o.alpha);

  make_out_dir(o.out);
  write_band_tests_csv(o.out / "band_tests.csv", cmp.tests);
  write_psd_csv(o.out / "psd.csv", cmp.report);
  json artifacts = {{"band_tests", "band_tests.csv"}, {"psd", "psd.csv"}};
  if (o.svg) {
    write_psd_svg(o.out / "psd.svg", cmp.report, o.label_a, o.label_b);
    artifacts["svg"] = "psd.svg";
  }

  auto describe = [](const std::vector<fs::path>& paths) {
    json j = json::array();
    for (const fs::path& p : paths) {
      const fs::path f = fs::is_directory(p) ? p / "manifest.json" : p;
      j.push_back({{"path", fs::absolute(p).string()}, {"fingerprint", file_fingerprint(f)}});
    }
    return j;
  };
  json manifest = base_manifest("compare", argv);
  manifest["config"] = {{"bands", o.bands}, {"n_fft", n_fft}, {"alpha", o.alpha}, {"label_a", o.label_a}, {"label_b", o.label_b}};
  manifest["seeds"] = json::object();
  manifest["inputs"] = {{"a", describe(o.cohort_a)}, {"b", describe(o.cohort_b)}};
  manifest["units"] = {{"a", a.units.size()}, {"b", b.units.size()}};
  manifest["artifacts"] = artifacts;
  manifest["timings"] = {{"total_seconds", seconds_since(t0)}};
  write_json(o.out / "manifest.json", manifest);

  std::cout << "band\tmean_" << o.label_a << "\tmean_" << o.label_b << "\tF\tdf\tp\tholm_reject\n";
  for (const BandTestResult& t : cmp.tests) {
    std::cout << t.band.name << '\t' << t.mean_a << '\t' << t.mean_b << '\t' << t.anova.f << "\t(" << t.anova.df1 << ','
              << t.anova.df2 << ")\t" << t.anova.p << '\t' << (t.holm_reject ? "reject" : "retain") << '\n';
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Interpretable sinc-filterbank EEG emotion classifier"};
  app.require_subcommand(1);
  const std::vector<std::string> args(argv, argv + argc);

  GenOptions gen;
  auto* g = app.add_subcommand("gen", "Generate a synthetic EEG cohort");
  g->add_option("--out", gen.out, "Output directory")->required();
  g->add_option("--cohort", gen.cohort, "td or asd")->check(CLI::IsMember({"td", "asd"}));
  g->add_option("--participants", gen.participants, "Number of participants")->check(CLI::PositiveNumber);
  g->add_option("--seed", gen.seed, "Master seed");
  g->add_option("--paired-seed", gen.paired_seed, "Seed shared with a paired cohort (overrides --seed)");
  g->add_option("--suppress", gen.suppress, "Band suppression, e.g. alpha_hi=0.6,beta=0.6");
  g->add_option("--jobs", gen.jobs, "Worker threads")->check(CLI::PositiveNumber);
  g->add_flag("--csv", gen.csv, "Also export a long-format CSV");
  auto* g_paper = g->add_flag("--paper-scale", gen.paper_scale, "500 Hz, 2 s epochs");
  g->add_flag("--desk-scale", "250 Hz, 0.5 s epochs (default)")->excludes(g_paper);

  TrainOptions train;
  auto* t = app.add_subcommand("train", "Leave-one-trial-out training per participant");
  t->add_option("--dataset", train.dataset, "EEGD dataset file")->required();
  t->add_option("--out", train.out, "Output directory")->required();
  t->add_option("--seed", train.seed, "Master seed");
  t->add_option("--jobs", train.jobs, "Parallel folds")->check(CLI::PositiveNumber);
  t->add_option("--arch", train.arch, "sincnet or cnn")->check(CLI::IsMember({"sincnet", "cnn", "cnn_baseline"}));
  t->add_option("--lr", train.lr, "Adam learning rate");
  t->add_option("--weight-decay", train.weight_decay, "L2 weight decay");
  t->add_option("--epochs", train.epochs, "Epochs per fold")->check(CLI::PositiveNumber);
  t->add_option("--batch-size", train.batch_size, "Mini-batch size")->check(CLI::PositiveNumber);
  t->add_option("--participants", train.participants, "Restrict to these participant ids")->delimiter(',');
  t->add_flag("--checkpoints", train.checkpoints, "Write one checkpoint per fold");
  t->add_flag("--zca", train.zca, "Enable per-fold ZCA whitening");
  auto* t_paper = t->add_flag("--paper-scale", train.paper_scale, "100 filters x 250 taps, 400 epochs");
  t->add_flag("--desk-scale", "16 filters x 65 taps, 40 epochs (default)")->excludes(t_paper);

  InspectOptions inspect;
  auto* i = app.add_subcommand("inspect", "Frequency analysis of learned filters");
  i->add_option("--run", inspect.runs, "Training output directory (repeatable)");
  i->add_option("--checkpoint", inspect.checkpoints, "Checkpoint file (repeatable)");
  i->add_flag("--fresh", inspect.fresh, "Include a freshly initialised filterbank");
  i->add_option("--out", inspect.out, "Output directory")->required();
  i->add_option("--bands", inspect.bands, "Bands in Hz, e.g. 9-13,13-30");
  i->add_option("--n-fft", inspect.n_fft, "FFT length");
  i->add_flag("--svg", inspect.svg, "Write an SVG plot");
  auto* i_paper = i->add_flag("--paper-scale", inspect.paper_scale, "Fresh bank at paper scale");
  i->add_flag("--desk-scale", "Fresh bank at desk scale (default)")->excludes(i_paper);

  CompareOptions compare;
  auto* c = app.add_subcommand("compare", "Band-power statistics between two cohorts");
  c->add_option("--a", compare.cohort_a, "Cohort A run directories or checkpoints")->required();
  c->add_option("--b", compare.cohort_b, "Cohort B run directories or checkpoints")->required();
  c->add_option("--label-a", compare.label_a, "Name of cohort A");
  c->add_option("--label-b", compare.label_b, "Name of cohort B");
  c->add_option("--out", compare.out, "Output directory")->required();
  c->add_option("--bands", compare.bands, "Bands in Hz");
  c->add_option("--n-fft", compare.n_fft, "FFT length");
  c->add_option("--alpha", compare.alpha, "Family-wise error rate")->check(CLI::Range(0.0, 1.0));
  c->add_flag("--svg", compare.svg, "Write an SVG plot");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (g->parsed()) return cmd_gen(gen, args);
    if (t->parsed()) return cmd_train(train, args);
    if (i->parsed()) return cmd_inspect(inspect, args);
    if (c->parsed()) return cmd_compare(compare, args);
  } catch (const FormatError& e) {
    std::cerr << "error (" << to_string(e.code()) << "): " << e.what() << '\n';
    return kExitRuntime;
  } catch (const FileNotFound& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}
