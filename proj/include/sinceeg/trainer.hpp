#pragma once

#include "sinceeg/model.hpp"
#include "sinceeg/preprocess.hpp"
#include "sinceeg/synthdata.hpp"

#include "json.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace sinceeg {

struct TrainConfig {
  double lr = 1e-3;
  double weight_decay = 1e-5;
  Index epochs = 400;
  Index batch_size = 30;
  std::uint64_t seed = 1;
  bool desk_scale = false;
  ArchConfig arch = ArchConfig::paper_scale();
  PreprocessConfig preprocess = PreprocessConfig::paper_scale();

  static TrainConfig paper_scale();
  // 16 filters x 65 taps, conv 8/16/32, FC 128, 40 epochs, 0.5 s at 250 Hz.
  static TrainConfig desk_scale_config();

  AdamConfig adam() const { return {lr, 0.9, 0.999, 1e-8, weight_decay}; }
  void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

// Records, per trial id, how often a trial fed each fitted quantity.
struct LeakageMonitor {
  std::vector<std::int64_t> zca_fit;
  std::vector<std::int64_t> batchnorm_update;
  std::vector<std::int64_t> gradient;

  explicit LeakageMonitor(std::size_t n_trials = 0)
      : zca_fit(n_trials, 0), batchnorm_update(n_trials, 0), gradient(n_trials, 0) {}
};

struct Split {
  std::vector<Index> train;
  Index test = 0;
};

// Fold i holds out trial i.
std::vector<Split> loto_splits(Index n_trials);

struct TrainedModel {
  Model model;
  std::vector<double> loss_trace;  // mean training loss per epoch
};

// inputs: preprocessed sequences; trial_ids index into monitor (if given).
TrainedModel train_fold(const TrainConfig& config, std::span<const Eigen::VectorXd> inputs, std::span<const int> labels,
                        std::span<const Index> trial_ids, std::uint64_t seed, LeakageMonitor* monitor = nullptr);

struct Prediction {
  int label = 0;
  Eigen::VectorXd probabilities;
};

// Eval-mode forward on one sequence; argmax with first-index tie-break.
Prediction evaluate(Model& model, const Eigen::VectorXd& input);

struct FoldResult {
  std::uint32_t participant = 0;
  Index fold = 0;
  Index held_out = 0;  // trial index within the participant
  int true_label = 0;
  int predicted = 0;
  Eigen::VectorXd probabilities;
  std::vector<double> loss_trace;
  std::vector<Cutoffs> filters_hz;  // learned SincConv cut-offs (sincnet only)
  // Contributions of the held-out trial to fitted state; all zero unless leaking.
  std::int64_t leak_zca = 0;
  std::int64_t leak_batchnorm = 0;
  std::int64_t leak_gradient = 0;
};

void to_json(nlohmann::json& j, const FoldResult& r);
void from_json(const nlohmann::json& j, FoldResult& r);

// Seed of fold `fold` for participant `participant`.
std::uint64_t fold_seed(std::uint64_t master, std::uint32_t participant, Index fold);

// One participant's LOTO fold: fit ZCA (optional) on the training trials,
// train, evaluate the held-out trial.
struct FoldOutput {
  FoldResult result;
  std::optional<Model> model;
};

FoldOutput run_fold(const TrainConfig& config, std::uint32_t participant, std::span<const Eigen::VectorXd> inputs,
                    std::span<const int> labels, const Split& split, bool keep_model = false);

struct LotoOptions {
  int jobs = 1;
  // Called once per completed fold (from worker threads, serialized).
  std::function<void(const FoldOutput&)> on_fold;
  bool keep_models = false;
  // Restrict to these participant ids (empty = all).
  std::vector<std::uint32_t> participants;
};

// Full LOTO for every participant; results ordered by (participant, fold).
std::vector<FoldResult> run_loto(const TrainConfig& config, const Dataset& dataset, const LotoOptions& options = {});

// Preprocessed sequences and labels for one participant.
struct ParticipantData {
  std::vector<Eigen::VectorXd> inputs;
  std::vector<int> labels;
};
ParticipantData prepare_participant(const TrainConfig& config, const Dataset& dataset, std::span<const std::size_t> trials);

using ConfusionMatrix = Eigen::Matrix<Index, kNumEmotions, kNumEmotions>;

// Rows = true label, columns = predicted.
ConfusionMatrix confusion_matrix(std::span<const FoldResult> results);
double accuracy(const ConfusionMatrix& cm);

// fold_id,participant,fold,true,predicted,p_happy,p_sad,p_angry,p_fear
void write_aggregate_csv(const std::filesystem::path& path, std::span<const FoldResult> results);
void write_confusion_csv(const std::filesystem::path& path, const ConfusionMatrix& cm);

}  // namespace sinceeg
