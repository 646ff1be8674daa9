// Acceptance suite: one PASS/FAIL line per criterion.
//   acceptance [--criterion N] [--cache DIR] [--jobs J]

#include "gradcheck.hpp"
#include "oracles.hpp"

#include "sinceeg/checkpoint.hpp"
#include "sinceeg/errors.hpp"
#include "sinceeg/fingerprint.hpp"
#include "sinceeg/model.hpp"
#include "sinceeg/spectra.hpp"
#include "sinceeg/synthdata.hpp"
#include "sinceeg/trainer.hpp"

#include <chrono>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace fs = std::filesystem;
using namespace sinceeg;

namespace {

struct Context {
  fs::path cache;
  int jobs = 1;
};

struct Outcome {
  bool pass = false;
  std::string summary;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

void note(const std::string& line) {
  std::printf("  %s\n", line.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Shared by criteria 3 and 5.
CohortSpec learning_cohort() {
  CohortSpec s = CohortSpec::desk_scale();
  s.n_participants = 4;
  s.trials_per_participant = 48;
  s.seed = 2024;
  return s;
}

TrainConfig desk_config(Arch arch) {
  TrainConfig c = TrainConfig::desk_scale_config();
  c.arch.arch = arch;
  c.seed = 1;
  return c;
}

// LOTO results cached under a key covering the config, the data and this
// executable (so a rebuilt library never reuses stale results).
std::string cache_key(const TrainConfig& config, const Dataset& ds) {
  return fingerprint({{"train", config}, {"data", ds.manifest}, {"exe", file_fingerprint("/proc/self/exe")}});
}

struct LotoRun {
  std::vector<FoldResult> results;
  double seconds = 0.0;
  bool from_cache = false;
};

LotoRun run_loto_cached(const Context& ctx, const TrainConfig& config, const Dataset& ds, bool allow_cache) {
  const fs::path file = ctx.cache / ("loto_" + cache_key(config, ds) + ".json");
  if (allow_cache && fs::exists(file)) {
    const auto j = nlohmann::json::parse(slurp(file));
    return {j.at("results").get<std::vector<FoldResult>>(), j.at("seconds").get<double>(), true};
  }
  const auto start = Clock::now();
  std::size_t done = 0;
  LotoOptions opt;
  opt.jobs = ctx.jobs;
  opt.on_fold = [&](const FoldOutput&) {
    if (++done % 48 == 0) note(fmt("%zu folds done (%.0f s)", done, seconds_since(start)));
  };
  LotoRun run{run_loto(config, ds, opt), seconds_since(start), false};
  fs::create_directories(ctx.cache);
  std::ofstream(file) << nlohmann::json{{"results", run.results}, {"seconds", run.seconds}}.dump();
  return run;
}

double mean_accuracy(const std::vector<FoldResult>& results) {
  return accuracy(confusion_matrix(results));
}

void print_per_participant(const std::vector<FoldResult>& results) {
  std::map<std::uint32_t, std::pair<int, int>> per;
  for (const auto& r : results) {
    per[r.participant].first += r.predicted == r.true_label;
    ++per[r.participant].second;
  }
  for (const auto& [pid, c] : per) note(fmt("participant %u: %d/%d correct", pid, c.first, c.second));
}

// ---------------------------------------------------------------------------

Outcome gradient_fidelity(const Context&) {
  const auto start = Clock::now();
  gradcheck::Report sinc, layers, e2e;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    sinc.merge(gradcheck::kernel_taps(40, seed));
    sinc.merge(gradcheck::sincconv_params(15, seed));
    sinc.merge(gradcheck::fir_signal(seed));
    layers.merge(gradcheck::conv2d(seed));
    layers.merge(gradcheck::batch_norm(seed));
    layers.merge(gradcheck::maxpool(seed));
    layers.merge(gradcheck::relu(seed));
    layers.merge(gradcheck::dropout(seed));
    layers.merge(gradcheck::dense(seed));
    layers.merge(gradcheck::softmax_ce(seed));
    e2e.merge(gradcheck::model_end_to_end(Arch::sincnet, seed));
    e2e.merge(gradcheck::model_end_to_end(Arch::cnn_baseline, seed));
  }
  const double secs = seconds_since(start);
  note(fmt("sincconv (taps, f1/f2, raw params, signal): max rel err %.2e over %ld entries (%s)", sinc.max_rel,
           static_cast<long>(sinc.checked), sinc.worst.c_str()));
  note(fmt("layers: max rel err %.2e over %ld entries (%s)", layers.max_rel, static_cast<long>(layers.checked),
           layers.worst.c_str()));
  note(fmt("end-to-end miniature models: max rel err %.2e over %ld parameters (%s)", e2e.max_rel,
           static_cast<long>(e2e.checked), e2e.worst.c_str()));
  const bool pass = sinc.max_rel < 1e-5 && layers.max_rel < 1e-4 && e2e.max_rel < 1e-4 && secs < 60.0;
  return {pass, fmt("sincconv %.1e < 1e-5, layers %.1e < 1e-4, end-to-end %.1e < 1e-4, %.1f s < 60 s", sinc.max_rel,
                    layers.max_rel, e2e.max_rel, secs)};
}

Outcome dsp_correctness(const Context&) {
  const Filterbank bank = Filterbank::from_cutoffs_hz({{8.0, 13.0}}, 251, 500.0);
  const Eigen::VectorXd mag = frequency_response(bank.kernel(0), 4096);
  const Eigen::VectorXd freq = frequency_grid(4096, 500.0);
  double pass_sum = 0.0, stop_sum = 0.0;
  int np = 0, ns = 0;
  for (Index i = 0; i < freq.size(); ++i) {
    if (freq[i] >= 8.0 && freq[i] <= 13.0) {
      pass_sum += mag[i];
      ++np;
    } else if (freq[i] < 8.0 - 10.0 || freq[i] > 13.0 + 10.0) {
      stop_sum += mag[i];
      ++ns;
    }
  }
  const double ratio = (pass_sum / np) / (stop_sum / ns);
  note(fmt("8-13 Hz filter, 251 taps @ 500 Hz: mean passband |H| / mean stopband |H| (beyond 10 Hz) = %.1f", ratio));

  Rng rng(11);
  double fir_err = 0.0;
  for (Index L : {7, 65, 251}) {
    const Tensor x = gradcheck::random_tensor({2, 400}, rng);
    const RowMatrixXd k = gradcheck::random_tensor({3, L}, rng).matrix();
    const Tensor y = fir_bank_forward(x, k);
    for (Index b = 0; b < 2; ++b) {
      const Eigen::MatrixXd ref = oracle::fir_bank(x.matrix().row(b).transpose(), k);
      for (Index f = 0; f < 3; ++f)
        for (Index t = 0; t < 400; ++t) fir_err = std::max(fir_err, std::abs(y(b, f, t) - ref(f, t)));
    }
  }
  double conv_err = 0.0;
  for (auto [kh, kw] : {std::pair<Index, Index>{3, 3}, {16, 5}, {4, 3}}) {
    const Tensor x = gradcheck::random_tensor({2, 2, 16, 40}, rng);
    const Tensor k = gradcheck::random_tensor({3, 2, kh, kw}, rng);
    const Tensor bias = gradcheck::random_tensor({3}, rng);
    const Tensor y = conv2d_forward(x, k, bias.vec());
    const auto ref = oracle::conv2d(std::vector<double>(x.data(), x.data() + x.size()), 2, 2, 16, 40,
                                    std::vector<double>(k.data(), k.data() + k.size()), 3, kh, kw,
                                    std::vector<double>(bias.data(), bias.data() + bias.size()));
    for (Index i = 0; i < y.size(); ++i) conv_err = std::max(conv_err, std::abs(y[i] - ref[static_cast<std::size_t>(i)]));
  }
  note(fmt("fir bank vs naive oracle: max abs err %.1e; conv2d vs naive oracle: %.1e", fir_err, conv_err));

  double sym = 0.0;
  for (Index L = 2; L <= 512; ++L) {
    const Eigen::VectorXd w = hamming_window(L);
    for (Index k = 0; k < L; ++k) sym = std::max(sym, std::abs(w[k] - w[L - 1 - k]));
  }
  note(fmt("Hamming window symmetry over lengths 2..512: max |w[k] - w[L-1-k]| = %.1e", sym));

  const bool pass = ratio >= 5.0 && fir_err <= 1e-10 && conv_err <= 1e-10 && sym <= 1e-12;
  return {pass, fmt("pass/stop ratio %.1f >= 5, convolution err %.1e <= 1e-10, symmetry %.1e <= 1e-12", ratio,
                    std::max(fir_err, conv_err), sym)};
}

Outcome learning_works(const Context& ctx) {
  const Dataset ds = gen_cohort(learning_cohort(), Cohort::td, ctx.jobs);
  note(fmt("cohort: %zu trials, %d participants, desk scale, seed %llu", ds.trials.size(), 4,
           static_cast<unsigned long long>(learning_cohort().seed)));
  const LotoRun run = run_loto_cached(ctx, desk_config(Arch::sincnet), ds, false);
  print_per_participant(run.results);
  const double acc = mean_accuracy(run.results);
  note(fmt("sincnet LOTO: %zu folds, accuracy %.4f, %.1f s with %d worker(s)", run.results.size(), acc, run.seconds,
           ctx.jobs));
  const bool pass = run.results.size() == 192 && acc >= 0.85 && run.seconds <= 900.0;
  return {pass, fmt("accuracy %.3f >= 0.85 over %zu folds, runtime %.0f s <= 900 s", acc, run.results.size(), run.seconds)};
}

std::vector<Eigen::VectorXd> participant_psd_units(const std::vector<FoldResult>& results, const ArchConfig& arch,
                                                   Index n_fft) {
  std::map<std::uint32_t, std::pair<Eigen::VectorXd, int>> acc;
  for (const auto& r : results) {
    const Eigen::VectorXd psd =
        filter_psd(Filterbank::from_cutoffs_hz(r.filters_hz, arch.kernel_len, arch.sample_rate, arch.min_band_hz), n_fft);
    auto& slot = acc[r.participant];
    if (slot.second == 0) slot.first = Eigen::VectorXd::Zero(psd.size());
    slot.first += psd;
    ++slot.second;
  }
  std::vector<Eigen::VectorXd> units;
  for (auto& [pid, s] : acc) units.push_back(s.first / static_cast<double>(s.second));
  return units;
}

Outcome interpretability(const Context& ctx) {
  const auto start = Clock::now();
  CohortSpec td = CohortSpec::desk_scale();
  td.n_participants = 8;
  td.seed = 4048;
  CohortSpec asd = td;
  asd.suppression = {{"alpha_hi", 0.6}, {"beta", 0.6}};
  const Dataset ds_td = gen_cohort(td, Cohort::td, ctx.jobs);
  const Dataset ds_asd = gen_cohort(asd, Cohort::asd, ctx.jobs);
  note(fmt("paired cohorts: %zu + %zu trials, 8 participants each, suppression 0.6 on 9-13 and 13-30 Hz",
           ds_td.trials.size(), ds_asd.trials.size()));
  const TrainConfig config = desk_config(Arch::sincnet);
  const LotoRun run_td = run_loto_cached(ctx, config, ds_td, false);
  note(fmt("unsuppressed cohort trained: accuracy %.3f (%.0f s)", mean_accuracy(run_td.results), run_td.seconds));
  const LotoRun run_asd = run_loto_cached(ctx, config, ds_asd, false);
  note(fmt("suppressed cohort trained: accuracy %.3f (%.0f s)", mean_accuracy(run_asd.results), run_asd.seconds));

  const Index n_fft = 4096;
  const auto units_td = participant_psd_units(run_td.results, config.arch, n_fft);
  const auto units_asd = participant_psd_units(run_asd.results, config.arch, n_fft);
  const CohortComparison cmp = cohort_compare(frequency_grid(n_fft, config.arch.sample_rate), units_td, units_asd,
                                              parse_bands("4-8,9-13,13-30"));
  bool pass = true;
  for (const auto& t : cmp.tests) {
    note(fmt("band %-5s Hz: unsuppressed %.4f, suppressed %.4f, F(%d,%d) = %.3f, p = %.3g, Holm %s", t.band.name.c_str(),
             t.mean_a, t.mean_b, t.anova.df1, t.anova.df2, t.anova.f, t.anova.p, t.holm_reject ? "reject" : "retain"));
    if (t.band.name == "4-8") continue;  // reported for context only
    pass = pass && t.holm_reject && t.mean_b < t.mean_a;
  }
  const double secs = seconds_since(start);
  pass = pass && secs <= 3600.0;
  std::string summary;
  for (const auto& t : cmp.tests) {
    if (t.band.name == "4-8") continue;
    summary += fmt("%s Hz suppressed %s unsuppressed (%s, p = %.2g); ", t.band.name.c_str(),
                   t.mean_b < t.mean_a ? "<" : ">=", t.holm_reject ? "Holm reject" : "Holm retain", t.anova.p);
  }
  summary += fmt("runtime %.0f s <= 3600 s", secs);
  return {pass, summary};
}

Outcome baseline_parity(const Context& ctx) {
  const Dataset ds = gen_cohort(learning_cohort(), Cohort::td, ctx.jobs);
  const LotoRun sinc = run_loto_cached(ctx, desk_config(Arch::sincnet), ds, true);
  note(fmt("sincnet: accuracy %.4f (%s)", mean_accuracy(sinc.results),
           sinc.from_cache ? "reused from criterion 3 run" : "trained now"));
  const LotoRun cnn = run_loto_cached(ctx, desk_config(Arch::cnn_baseline), ds, false);
  note(fmt("cnn_baseline: accuracy %.4f (%.0f s)", mean_accuracy(cnn.results), cnn.seconds));
  const double gap = std::abs(mean_accuracy(sinc.results) - mean_accuracy(cnn.results));

  bool audit = true;
  for (bool paper : {true, false}) {
    ArchConfig a = paper ? ArchConfig::paper_scale() : ArchConfig::desk_scale();
    const Model s(a, 1);
    a.arch = Arch::cnn_baseline;
    const Model c(a, 1);
    const auto sc = s.parameter_counts();
    const auto cc = c.parameter_counts();
    std::string line = paper ? "paper scale: " : "desk scale: ";
    line += fmt("first layer %ld (sinc, 2 per filter) vs %ld (free taps)", static_cast<long>(sc[0].count),
                static_cast<long>(cc[0].count));
    audit = audit && sc[0].count == 2 * a.n_filters && cc[0].count == a.n_filters * a.kernel_len;
    for (std::size_t i = 1; i < sc.size(); ++i) {
      audit = audit && sc[i].layer == cc[i].layer && sc[i].count == cc[i].count;
      line += fmt(", %s %ld/%ld", sc[i].layer.c_str(), static_cast<long>(sc[i].count), static_cast<long>(cc[i].count));
    }
    note(line);
  }
  const bool pass = gap <= 0.10 && audit;
  return {pass, fmt("accuracy gap %.1f points <= 10, parameter audit %s (paper scale 100x250 = 25000 vs 200)", 100.0 * gap,
                    audit ? "matches" : "MISMATCH")};
}

Outcome protocol_exactness(const Context& ctx) {
  const auto splits = loto_splits(48);
  std::multiset<Index> tests;
  bool shape = splits.size() == 48;
  for (const Split& s : splits) {
    tests.insert(s.test);
    std::set<Index> train(s.train.begin(), s.train.end());
    shape = shape && s.train.size() == 47 && train.size() == 47 && !train.count(s.test);
  }
  bool partition = tests.size() == 48;
  for (Index i = 0; i < 48; ++i) partition = partition && tests.count(i) == 1;
  note(fmt("loto_splits(48): %zu folds, each test trial held out once: %s", splits.size(), partition ? "yes" : "no"));

  // Full LOTO on one participant with every fitted stage active (ZCA on).
  CohortSpec spec = learning_cohort();
  spec.n_participants = 1;
  const Dataset ds = gen_cohort(spec, Cohort::td);
  TrainConfig config = desk_config(Arch::sincnet);
  config.epochs = 2;
  config.preprocess.zca = true;
  LotoOptions opt;
  opt.jobs = ctx.jobs;
  const auto results = run_loto(config, ds, opt);
  std::int64_t leaks = 0;
  for (const auto& r : results) leaks += r.leak_zca + r.leak_batchnorm + r.leak_gradient;
  note(fmt("instrumented LOTO with ZCA: %zu folds, held-out contributions to ZCA/batch-norm/gradients = %lld",
           results.size(), static_cast<long long>(leaks)));

  // Positive control: the counters do see training trials.
  std::vector<std::size_t> all(ds.trials.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const ParticipantData pd = prepare_participant(config, ds, all);
  std::vector<Eigen::VectorXd> x(pd.inputs.begin() + 1, pd.inputs.end());
  std::vector<int> y(pd.labels.begin() + 1, pd.labels.end());
  std::vector<Index> ids;
  for (Index i = 1; i < 48; ++i) ids.push_back(i);
  LeakageMonitor monitor(48);
  train_fold(config, x, y, ids, 1, &monitor);
  bool control = monitor.gradient[0] == 0 && monitor.batchnorm_update[0] == 0;
  for (Index i = 1; i < 48; ++i) {
    control = control && monitor.gradient[static_cast<std::size_t>(i)] == config.epochs &&
              monitor.batchnorm_update[static_cast<std::size_t>(i)] == config.epochs;
  }
  note(fmt("positive control: every training trial counted once per epoch: %s", control ? "yes" : "no"));
  const bool pass = shape && partition && results.size() == 48 && leaks == 0 && control;
  return {pass, fmt("48 folds partition the trials: %s; held-out leakage count %lld", partition && shape ? "yes" : "no",
                    static_cast<long long>(leaks))};
}

Outcome statistics_correctness(const Context&) {
  Rng rng(7);
  std::uniform_int_distribution<int> size(2, 40);
  std::uniform_real_distribution<double> loc(-50.0, 50.0);
  std::uniform_real_distribution<double> spread(0.01, 20.0);
  double worst = 0.0;
  for (int d = 0; d < 1000; ++d) {
    std::normal_distribution<double> ga(loc(rng), spread(rng));
    std::normal_distribution<double> gb(loc(rng), spread(rng));
    std::vector<double> a(static_cast<std::size_t>(size(rng))), b(static_cast<std::size_t>(size(rng)));
    for (double& v : a) v = ga(rng);
    for (double& v : b) v = gb(rng);
    const double t = oracle::pooled_t(a, b);
    const double f = anova_oneway(a, b).f;
    worst = std::max(worst, std::abs(f - t * t) / std::max(1.0, t * t));
  }
  note(fmt("anova F vs pooled t^2 on 1000 random datasets: max relative error %.1e", worst));

  const std::vector<double> grid{0.0, 0.001, 0.01, 0.0125, 0.016, 0.02, 0.025, 0.03, 0.04, 0.05, 0.051, 0.2, 1.0};
  long cases = 0, mismatches = 0;
  for (double alpha : {0.05, 0.1}) {
    for (std::size_t m = 1; m <= 5; ++m) {
      std::vector<std::size_t> idx(m, 0);
      while (true) {
        std::vector<double> p(m);
        for (std::size_t i = 0; i < m; ++i) p[i] = grid[idx[i]];
        ++cases;
        if (holm_correction(p, alpha) != oracle::holm_direct(p, alpha)) ++mismatches;
        std::size_t k = 0;
        while (k < m && ++idx[k] == grid.size()) idx[k++] = 0;
        if (k == m) break;
      }
    }
  }
  note(fmt("holm_correction vs direct step-down rule: %ld exhaustive grid cases (m <= 5, alpha 0.05/0.1), %ld mismatches",
           cases, mismatches));
  const bool pass = worst <= 1e-10 && mismatches == 0;
  return {pass, fmt("F = t^2 within %.1e <= 1e-10; Holm %ld/%ld cases agree", worst, cases - mismatches, cases)};
}

template <typename F>
std::string error_code_of(F&& f) {
  try {
    f();
  } catch (const FormatError& e) {
    return to_string(e.code());
  } catch (const std::exception& e) {
    return std::string("other: ") + e.what();
  }
  return "none";
}

Outcome determinism_and_formats(const Context& ctx) {
  const fs::path dir = ctx.cache / "formats";
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::vector<std::string> failures;
  auto check = [&](bool ok, const std::string& what) {
    note(fmt("%-62s %s", what.c_str(), ok ? "ok" : "FAILED"));
    if (!ok) failures.push_back(what);
  };

  CohortSpec spec = learning_cohort();
  spec.n_participants = 2;
  spec.trials_per_participant = 12;
  write_dataset(gen_cohort(spec, Cohort::td, 1), dir / "a.eegd");
  write_dataset(gen_cohort(spec, Cohort::td, 1), dir / "b.eegd");
  write_dataset(gen_cohort(spec, Cohort::td, std::max(2, ctx.jobs)), dir / "c.eegd");
  check(slurp(dir / "a.eegd") == slurp(dir / "b.eegd"), "dataset files identical across reruns");
  check(slurp(dir / "a.eegd") == slurp(dir / "c.eegd"), "dataset file independent of worker count");

  const Dataset ds = read_dataset(dir / "a.eegd");
  const Dataset fresh = gen_cohort(spec, Cohort::td);
  bool rt = ds.manifest == fresh.manifest && ds.trials.size() == fresh.trials.size();
  for (std::size_t i = 0; rt && i < ds.trials.size(); ++i) {
    const auto& x = ds.trials[i].samples;
    const auto& y = fresh.trials[i].samples;
    rt = x.size() == y.size() && std::memcmp(x.data(), y.data(), sizeof(double) * static_cast<std::size_t>(x.size())) == 0 &&
         ds.trials[i].label == fresh.trials[i].label && ds.trials[i].participant_id == fresh.trials[i].participant_id;
  }
  check(rt, "EEGD write/read round trip bit-exact");

  TrainConfig config = desk_config(Arch::sincnet);
  config.epochs = 3;
  std::vector<std::size_t> first(12);
  for (std::size_t i = 0; i < 12; ++i) first[i] = i;
  const ParticipantData pd = prepare_participant(config, ds, first);
  std::vector<Index> ids(12);
  for (std::size_t i = 0; i < 12; ++i) ids[i] = static_cast<Index>(i);
  TrainedModel t1 = train_fold(config, pd.inputs, pd.labels, ids, 99);
  const TrainedModel t2 = train_fold(config, pd.inputs, pd.labels, ids, 99);
  check(t1.loss_trace.size() == t2.loss_trace.size() &&
            std::memcmp(t1.loss_trace.data(), t2.loss_trace.data(), sizeof(double) * t1.loss_trace.size()) == 0,
        "loss traces bitwise identical for the same seed");

  LotoOptions serial;
  LotoOptions parallel;
  parallel.jobs = std::max(2, ctx.jobs);
  write_aggregate_csv(dir / "agg1.csv", run_loto(config, ds, serial));
  write_aggregate_csv(dir / "agg2.csv", run_loto(config, ds, serial));
  write_aggregate_csv(dir / "agg3.csv", run_loto(config, ds, parallel));
  check(slurp(dir / "agg1.csv") == slurp(dir / "agg2.csv"), "aggregate CSV identical across reruns");
  check(slurp(dir / "agg1.csv") == slurp(dir / "agg3.csv"), "aggregate CSV independent of worker count");

  write_checkpoint(dir / "m.snck", t1.model, 99);
  Checkpoint ck = read_checkpoint(dir / "m.snck");
  bool same_params = ck.model.step_count() == t1.model.step_count();
  for (std::size_t i = 0; i < t1.model.parameters().size(); ++i) {
    const auto& p = t1.model.parameters()[i];
    const auto& q = ck.model.parameters()[i];
    same_params = same_params && p.value == q.value && p.m == q.m && p.v == q.v;
  }
  Tensor batch({12, config.arch.input_len});
  for (Index i = 0; i < 12; ++i) batch.matrix().row(i) = pd.inputs[static_cast<std::size_t>(i)].transpose();
  const Tensor ya = t1.model.forward(batch, Mode::eval);
  const Tensor yb = ck.model.forward(batch, Mode::eval);
  check(same_params && std::memcmp(ya.data(), yb.data(), sizeof(double) * static_cast<std::size_t>(ya.size())) == 0,
        "checkpoint round trip: identical state and forward output");

  auto corrupt = [&](const fs::path& src, const fs::path& dst, auto&& edit) {
    fs::copy_file(src, dst, fs::copy_options::overwrite_existing);
    edit(dst);
  };
  auto poke = [](std::streamoff at, std::string bytes) {
    return [at, bytes](const fs::path& p) {
      std::fstream f(p, std::ios::in | std::ios::out | std::ios::binary);
      f.seekp(at);
      f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    };
  };
  auto chop = [](const fs::path& p) { fs::resize_file(p, fs::file_size(p) - 5); };

  corrupt(dir / "a.eegd", dir / "magic.eegd", poke(0, "JUNK"));
  corrupt(dir / "a.eegd", dir / "version.eegd", poke(4, std::string("\x07\x00", 2)));
  corrupt(dir / "a.eegd", dir / "short.eegd", chop);
  const std::string e1 = error_code_of([&] { read_dataset(dir / "magic.eegd"); });
  const std::string e2 = error_code_of([&] { read_dataset(dir / "version.eegd"); });
  const std::string e3 = error_code_of([&] { read_dataset(dir / "short.eegd"); });
  check(e1 == "bad-magic" && e2 == "version-mismatch" && e3 == "truncated",
        "corrupt EEGD -> " + e1 + " / " + e2 + " / " + e3);

  corrupt(dir / "m.snck", dir / "magic.snck", poke(0, "JUNK"));
  corrupt(dir / "m.snck", dir / "version.snck", poke(4, std::string("\x07\x00\x00\x00", 4)));
  corrupt(dir / "m.snck", dir / "short.snck", chop);
  const std::string c1 = error_code_of([&] { read_checkpoint(dir / "magic.snck"); });
  const std::string c2 = error_code_of([&] { read_checkpoint(dir / "version.snck"); });
  const std::string c3 = error_code_of([&] { read_checkpoint(dir / "short.snck"); });
  check(c1 == "bad-magic" && c2 == "version-mismatch" && c3 == "truncated",
        "corrupt checkpoint -> " + c1 + " / " + c2 + " / " + c3);

  fs::remove_all(dir);
  return {failures.empty(), failures.empty() ? "reruns bitwise identical, round trips bit-exact, corruption codes as specified"
                                             : fmt("%zu check(s) failed, first: %s", failures.size(), failures[0].c_str())};
}

struct Entry {
  int id;
  const char* title;
  Outcome (*run)(const Context&);
};

const Entry kCriteria[] = {
    {1, "gradient fidelity", gradient_fidelity},
    {2, "DSP correctness", dsp_correctness},
    {3, "learning works", learning_works},
    {4, "interpretability reproduction", interpretability},
    {5, "baseline ablation parity", baseline_parity},
    {6, "protocol exactness", protocol_exactness},
    {7, "statistics correctness", statistics_correctness},
    {8, "determinism and formats", determinism_and_formats},
};

}  // namespace

int main(int argc, char** argv) {
  Context ctx;
  ctx.cache = fs::temp_directory_path() / "sinceeg_acceptance_cache";
  ctx.jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--criterion" && i + 1 < argc) {
      only = std::stoi(argv[++i]);
    } else if (arg == "--cache" && i + 1 < argc) {
      ctx.cache = argv[++i];
    } else if (arg == "--jobs" && i + 1 < argc) {
      ctx.jobs = std::max(1, std::stoi(argv[++i]));
    } else {
      std::fprintf(stderr, "usage: acceptance [--criterion N] [--cache DIR] [--jobs J]\n");
      return 2;
    }
  }
  fs::create_directories(ctx.cache);

  bool all_pass = true;
  int ran = 0;
  for (const Entry& e : kCriteria) {
    if (only != 0 && e.id != only) continue;
    ++ran;
    std::printf("criterion %d (%s)\n", e.id, e.title);
    std::fflush(stdout);
    const auto start = Clock::now();
    Outcome o;
    try {
      o = e.run(ctx);
    } catch (const std::exception& ex) {
      o = {false, std::string("exception: ") + ex.what()};
    }
    std::printf("criterion %d %s [%.1f s]: %s\n", e.id, o.pass ? "PASS" : "FAIL", seconds_since(start), o.summary.c_str());
    std::fflush(stdout);
    all_pass = all_pass && o.pass;
  }
  if (ran == 0) {
    std::fprintf(stderr, "no criterion %d\n", only);
    return 2;
  }
  return all_pass ? 0 : 1;
}
