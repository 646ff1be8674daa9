#include "sinceeg/trainer.hpp"

#include "sinceeg/errors.hpp"
#include "sinceeg/fingerprint.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <mutex>
#include <numeric>
#include <stdexcept>
#include <thread>

namespace sinceeg {

TrainConfig TrainConfig::paper_scale() { return {}; }

TrainConfig TrainConfig::desk_scale_config() {
  TrainConfig c;
  c.epochs = 40;
  c.desk_scale = true;
  c.arch = ArchConfig::desk_scale();
  c.preprocess = PreprocessConfig::desk_scale();
  return c;
}

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
  if (!(lr >= 0.0)) throw std::invalid_argument("train: lr must be non-negative");
  if (!(weight_decay >= 0.0)) throw std::invalid_argument("train: weight_decay must be non-negative");
  arch.validate();
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"lr", c.lr},         {"weight_decay", c.weight_decay}, {"epochs", c.epochs},
       {"batch_size", c.batch_size}, {"seed", c.seed},         {"desk_scale", c.desk_scale},
       {"arch", c.arch},     {"preprocess", c.preprocess},     {"preprocess_fingerprint", c.preprocess.fingerprint()}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  c.lr = j.at("lr").get<double>();
  c.weight_decay = j.at("weight_decay").get<double>();
  c.epochs = j.at("epochs").get<Index>();
  c.batch_size = j.at("batch_size").get<Index>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.desk_scale = j.at("desk_scale").get<bool>();
  c.arch = j.at("arch").get<ArchConfig>();
  c.preprocess = j.at("preprocess").get<PreprocessConfig>();
}

std::vector<Split> loto_splits(Index n_trials) {
  if (n_trials < 2) throw std::invalid_argument("loto_splits: need at least 2 trials");
  std::vector<Split> splits(static_cast<std::size_t>(n_trials));
  for (Index i = 0; i < n_trials; ++i) {
    Split& s = splits[static_cast<std::size_t>(i)];
    s.test = i;
    for (Index j = 0; j < n_trials; ++j) {
      if (j != i) s.train.push_back(j);
    }
  }
  return splits;
}

TrainedModel train_fold(const TrainConfig& config, std::span<const Eigen::VectorXd> inputs, std::span<const int> labels,
                        std::span<const Index> trial_ids, std::uint64_t seed, LeakageMonitor* monitor) {
  config.validate();
  if (inputs.empty()) throw std::invalid_argument("train_fold: empty training set");
  if (labels.size() != inputs.size() || trial_ids.size() != inputs.size()) {
    throw std::invalid_argument("train_fold: inputs, labels and trial ids must have equal length");
  }
  const Index T = config.arch.input_len;
  for (const auto& x : inputs) {
    if (x.size() != T) throw std::invalid_argument("train_fold: input length does not match the architecture");
  }

  TrainedModel out{Model(config.arch, mix_seed(seed, 0)), {}};
  Rng rng(mix_seed(seed, 1));
  const AdamConfig adam = config.adam();
  const auto n = static_cast<Index>(inputs.size());
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);

  for (Index epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (Index start = 0; start < n; start += config.batch_size) {
      const Index b = std::min(config.batch_size, n - start);
      Tensor batch({b, T});
      std::vector<int> batch_labels(static_cast<std::size_t>(b));
      for (Index r = 0; r < b; ++r) {
        const auto i = static_cast<std::size_t>(order[static_cast<std::size_t>(start + r)]);
        batch.matrix().row(r) = inputs[i].transpose();
        batch_labels[static_cast<std::size_t>(r)] = labels[i];
        if (monitor) {
          const auto id = static_cast<std::size_t>(trial_ids[i]);
          ++monitor->batchnorm_update.at(id);
          ++monitor->gradient.at(id);
        }
      }
      const Tensor logits = out.model.forward(batch, Mode::train, &rng);
      const SoftmaxCrossEntropy sce = softmax_cross_entropy(logits, batch_labels);
      out.model.backward(sce.logit_grad);
      out.model.step(adam);
      total += sce.loss * static_cast<double>(b);
    }
    out.loss_trace.push_back(total / static_cast<double>(n));
  }
  return out;
}

Prediction evaluate(Model& model, const Eigen::VectorXd& input) {
  if (input.size() != model.config().input_len) {
    throw std::invalid_argument("evaluate: input length " + std::to_string(input.size()) + " does not match architecture (" +
                                std::to_string(model.config().input_len) + ")");
  }
  Tensor batch({1, input.size()});
  batch.matrix().row(0) = input.transpose();
  const Tensor logits = model.forward(batch, Mode::eval);
  Prediction p;
  p.probabilities = softmax(logits.matrix().row(0).transpose());
  for (Index k = 1; k < p.probabilities.size(); ++k) {
    if (p.probabilities[k] > p.probabilities[p.label]) p.label = static_cast<int>(k);
  }
  return p;
}

std::uint64_t fold_seed(std::uint64_t master, std::uint32_t participant, Index fold) {
  return mix_seed(mix_seed(master, participant), static_cast<std::uint64_t>(fold));
}

FoldOutput run_fold(const TrainConfig& config, std::uint32_t participant, std::span<const Eigen::VectorXd> inputs,
                    std::span<const int> labels, const Split& split, bool keep_model) {
  const auto n = inputs.size();
  LeakageMonitor monitor(n);

  std::vector<Eigen::VectorXd> train_x;
  std::vector<int> train_y;
  for (Index id : split.train) {
    train_x.push_back(inputs[static_cast<std::size_t>(id)]);
    train_y.push_back(labels[static_cast<std::size_t>(id)]);
  }
  Eigen::VectorXd test_x = inputs[static_cast<std::size_t>(split.test)];

  if (config.preprocess.zca) {
    Eigen::MatrixXd rows(static_cast<Index>(train_x.size()), config.arch.input_len);
    for (std::size_t i = 0; i < train_x.size(); ++i) rows.row(static_cast<Index>(i)) = train_x[i].transpose();
    for (Index id : split.train) ++monitor.zca_fit[static_cast<std::size_t>(id)];
    const ZcaTransform zca = ZcaTransform::fit(rows, config.preprocess.zca_eps);
    for (auto& x : train_x) x = zca.apply(x);
    test_x = zca.apply(test_x);
  }

  const std::uint64_t seed = fold_seed(config.seed, participant, split.test);
  TrainedModel trained = train_fold(config, train_x, train_y, split.train, seed, &monitor);
  const Prediction pred = evaluate(trained.model, test_x);

  FoldOutput out;
  FoldResult& r = out.result;
  r.participant = participant;
  r.fold = split.test;
  r.held_out = split.test;
  r.true_label = labels[static_cast<std::size_t>(split.test)];
  r.predicted = pred.label;
  r.probabilities = pred.probabilities;
  r.loss_trace = std::move(trained.loss_trace);
  if (config.arch.arch == Arch::sincnet) {
    const Filterbank bank = trained.model.filterbank();
    for (Index i = 0; i < bank.size(); ++i) r.filters_hz.push_back(bank.cutoffs_hz(i));
  }
  const auto t = static_cast<std::size_t>(split.test);
  r.leak_zca = monitor.zca_fit[t];
  r.leak_batchnorm = monitor.batchnorm_update[t];
  r.leak_gradient = monitor.gradient[t];
  if (keep_model) out.model.emplace(std::move(trained.model));
  return out;
}

ParticipantData prepare_participant(const TrainConfig& config, const Dataset& dataset, std::span<const std::size_t> trials) {
  ParticipantData d;
  for (std::size_t i : trials) {
    const TrialRecord& tr = dataset.trials.at(i);
    if (tr.time() != config.arch.input_len) {
      throw std::invalid_argument("trial length " + std::to_string(tr.time()) + " does not match architecture input (" +
                                  std::to_string(config.arch.input_len) + ")");
    }
    if (tr.sample_rate != config.arch.sample_rate) {
      throw std::invalid_argument("trial sample rate does not match architecture");
    }
    d.inputs.push_back(preprocess_trial(tr, config.preprocess));
    d.labels.push_back(static_cast<int>(tr.label));
  }
  return d;
}

std::vector<FoldResult> run_loto(const TrainConfig& config, const Dataset& dataset, const LotoOptions& options) {
  config.validate();
  struct Task {
    std::size_t participant_slot;
    Split split;
    std::size_t result_slot;
  };
  std::vector<std::uint32_t> ids;
  std::vector<ParticipantData> data;
  std::vector<Task> tasks;
  for (const auto& [pid, trials] : trials_by_participant(dataset)) {
    if (!options.participants.empty() &&
        std::find(options.participants.begin(), options.participants.end(), pid) == options.participants.end()) {
      continue;
    }
    ids.push_back(pid);
    data.push_back(prepare_participant(config, dataset, trials));
    for (Split& s : loto_splits(static_cast<Index>(trials.size()))) {
      tasks.push_back({ids.size() - 1, std::move(s), tasks.size()});
    }
  }

  std::vector<FoldResult> results(tasks.size());
  std::atomic<std::size_t> next{0};
  std::mutex callback_mutex;
  std::exception_ptr failure;
  auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      try {
        const Task& t = tasks[i];
        const ParticipantData& d = data[t.participant_slot];
        FoldOutput out = run_fold(config, ids[t.participant_slot], d.inputs, d.labels, t.split, options.keep_models);
        std::lock_guard lock(callback_mutex);
        if (options.on_fold) options.on_fold(out);
        results[t.result_slot] = std::move(out.result);
      } catch (...) {
        std::lock_guard lock(callback_mutex);
        if (!failure) failure = std::current_exception();
        next = tasks.size();
      }
    }
  };
  const int jobs = std::max(1, options.jobs);
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
  return results;
}

ConfusionMatrix confusion_matrix(std::span<const FoldResult> results) {
  ConfusionMatrix cm = ConfusionMatrix::Zero();
  for (const FoldResult& r : results) {
    if (r.true_label < 0 || r.true_label >= kNumEmotions || r.predicted < 0 || r.predicted >= kNumEmotions) {
      throw std::invalid_argument("confusion_matrix: label out of range");
    }
    ++cm(r.true_label, r.predicted);
  }
  return cm;
}

double accuracy(const ConfusionMatrix& cm) {
  const Index total = cm.sum();
  if (total == 0) throw std::invalid_argument("accuracy: empty confusion matrix");
  return static_cast<double>(cm.trace()) / static_cast<double>(total);
}

void to_json(nlohmann::json& j, const FoldResult& r) {
  nlohmann::json filters = nlohmann::json::array();
  for (const Cutoffs& c : r.filters_hz) filters.push_back({c.f1, c.f2});
  j = {{"participant", r.participant},
       {"fold", r.fold},
       {"held_out_trial", r.held_out},
       {"true", kEmotionNames.at(static_cast<std::size_t>(r.true_label))},
       {"predicted", kEmotionNames.at(static_cast<std::size_t>(r.predicted))},
       {"probabilities", std::vector<double>(r.probabilities.data(), r.probabilities.data() + r.probabilities.size())},
       {"loss_trace", r.loss_trace},
       {"filters_hz", filters},
       {"leakage", {{"zca_fit", r.leak_zca}, {"batchnorm_update", r.leak_batchnorm}, {"gradient", r.leak_gradient}}}};
}

void from_json(const nlohmann::json& j, FoldResult& r) {
  r.participant = j.at("participant").get<std::uint32_t>();
  r.fold = j.at("fold").get<Index>();
  r.held_out = j.at("held_out_trial").get<Index>();
  r.true_label = static_cast<int>(parse_emotion(j.at("true").get<std::string>()));
  r.predicted = static_cast<int>(parse_emotion(j.at("predicted").get<std::string>()));
  const auto probs = j.at("probabilities").get<std::vector<double>>();
  r.probabilities = Eigen::Map<const Eigen::VectorXd>(probs.data(), static_cast<Index>(probs.size()));
  r.loss_trace = j.at("loss_trace").get<std::vector<double>>();
  r.filters_hz.clear();
  for (const auto& f : j.at("filters_hz")) r.filters_hz.push_back({f.at(0).get<double>(), f.at(1).get<double>()});
  const auto& leak = j.at("leakage");
  r.leak_zca = leak.at("zca_fit").get<std::int64_t>();
  r.leak_batchnorm = leak.at("batchnorm_update").get<std::int64_t>();
  r.leak_gradient = leak.at("gradient").get<std::int64_t>();
}

void write_aggregate_csv(const std::filesystem::path& path, std::span<const FoldResult> results) {
  std::ofstream out(path);
  if (!out) throw FormatError(FormatErrc::io_error, "cannot open " + path.string() + " for writing");
  out.precision(17);
  out << "fold_id,participant,fold,true,predicted,p_happy,p_sad,p_angry,p_fear\n";
  for (std::size_t i = 0; i < results.size(); ++i) {
    const FoldResult& r = results[i];
    out << i << ',' << r.participant << ',' << r.fold << ',' << kEmotionNames.at(static_cast<std::size_t>(r.true_label))
        << ',' << kEmotionNames.at(static_cast<std::size_t>(r.predicted));
    for (Index k = 0; k < r.probabilities.size(); ++k) out << ',' << r.probabilities[k];
    out << '\n';
  }
}

void write_confusion_csv(const std::filesystem::path& path, const ConfusionMatrix& cm) {
  std::ofstream out(path);
  if (!out) throw FormatError(FormatErrc::io_error, "cannot open " + path.string() + " for writing");
  out << "true\\predicted";
  for (const char* name : kEmotionNames) out << ',' << name;
  out << '\n';
  for (int i = 0; i < kNumEmotions; ++i) {
    out << kEmotionNames[static_cast<std::size_t>(i)];
    for (int j = 0; j < kNumEmotions; ++j) out << ',' << cm(i, j);
    out << '\n';
  }
}

}  // namespace sinceeg
