#pragma once

#include "sinceeg/adam.hpp"
#include "sinceeg/layers.hpp"
#include "sinceeg/sincconv.hpp"
#include "sinceeg/tensor.hpp"

#include "json.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace sinceeg {

enum class Arch { sincnet, cnn_baseline };

std::string to_string(Arch arch);
Arch parse_arch(const std::string& name);

struct ConvBlockConfig {
  Index channels = 0;
  Index kernel_h = 1, kernel_w = 1;
  Index pool_h = 1, pool_w = 1;
};

struct ArchConfig {
  Arch arch = Arch::sincnet;
  Index n_filters = 100;
  Index kernel_len = 250;
  double sample_rate = 500.0;
  Index input_len = 1000;
  std::array<ConvBlockConfig, 3> blocks{};
  Index fc_units = 1024;
  Index n_classes = 4;
  double dropout = 0.5;
  double min_band_hz = 1.0;
  double init_band_hz = 4.0;

  // 100 filters x 250 taps, conv 32/64/128, FC 1024, 2 s at 500 Hz.
  static ArchConfig paper_scale();
  // 16 filters x 65 taps, conv 8/16/32, FC 128, 0.5 s at 250 Hz.
  static ArchConfig desk_scale();

  // Spatial size [H, W] after each block (index 0 = first-layer output).
  std::array<std::array<Index, 2>, 4> feature_sizes() const;
  Index flatten_size() const;
  void validate() const;
};

void to_json(nlohmann::json& j, const ArchConfig& c);
void from_json(const nlohmann::json& j, ArchConfig& c);

struct LayerParameterCount {
  std::string layer;
  Index count;
};

// The network: first layer (SincConv or free FIR taps), three
// conv/BN/pool/ReLU/dropout blocks, FC + ReLU + dropout, linear output.
class Model {
 public:
  Model(const ArchConfig& config, std::uint64_t seed);
  Model(const ArchConfig& config, std::vector<Parameter> params, std::vector<BatchNormState> bn, std::int64_t step_count);

  const ArchConfig& config() const { return config_; }

  // batch [B x input_len] -> logits [B x n_classes]. dropout_rng is only
  // required in train mode.
  Tensor forward(const Tensor& batch, Mode mode, Rng* dropout_rng = nullptr);

  // Overwrites every parameter gradient from dL/dlogits of the last forward.
  void backward(const Tensor& logit_grad);

  std::span<Parameter> parameters() { return params_; }
  std::span<const Parameter> parameters() const { return params_; }
  Parameter& parameter(const std::string& name);
  const Parameter& parameter(const std::string& name) const;

  std::vector<BatchNormState>& batch_norm_states() { return bn_; }
  const std::vector<BatchNormState>& batch_norm_states() const { return bn_; }

  std::int64_t step_count() const { return step_count_; }
  void step(const AdamConfig& adam);

  // SincConv bank (sincnet only).
  Filterbank filterbank() const;
  // First-layer taps [n_filters x kernel_len] for either architecture.
  RowMatrixXd front_kernels() const;

  std::vector<LayerParameterCount> parameter_counts() const;

 private:
  struct BlockCache {
    Tensor input;
    Tensor conv_out;
    BatchNormCache bn;
    std::vector<Index> argmax;
    Tensor pooled;
    Tensor mask;
  };

  void check_filter_invariants() const;

  ArchConfig config_;
  std::vector<Parameter> params_;
  std::vector<BatchNormState> bn_;
  std::int64_t step_count_ = 0;

  Tensor cache_input_;
  std::array<BlockCache, 3> cache_blocks_;
  Tensor cache_flat_;
  Tensor cache_fc_pre_;
  Tensor cache_fc_mask_;
  Tensor cache_fc_out_;
  Mode cache_mode_ = Mode::eval;
};

}  // namespace sinceeg
