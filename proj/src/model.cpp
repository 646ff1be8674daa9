#include "sinceeg/model.hpp"

#include <algorithm>
#include <stdexcept>

namespace sinceeg {

namespace {

constexpr const char* kFront = "front";

std::string block_name(std::size_t i, const char* what) { return "block" + std::to_string(i + 1) + "." + what; }

Filterbank bank_from_tensor(const Tensor& t, const ArchConfig& c) {
  std::vector<FilterParams> p(static_cast<std::size_t>(c.n_filters));
  for (Index i = 0; i < c.n_filters; ++i) p[static_cast<std::size_t>(i)] = {t(i, 0), t(i, 1)};
  return Filterbank(std::move(p), c.kernel_len, c.sample_rate, c.min_band_hz);
}

}  // namespace

std::string to_string(Arch arch) { return arch == Arch::sincnet ? "sincnet" : "cnn"; }

Arch parse_arch(const std::string& name) {
  if (name == "sincnet") return Arch::sincnet;
  if (name == "cnn" || name == "cnn_baseline") return Arch::cnn_baseline;
  throw std::invalid_argument("unknown architecture '" + name + "' (expected sincnet or cnn)");
}

ArchConfig ArchConfig::paper_scale() {
  ArchConfig c;
  c.n_filters = 100;
  c.kernel_len = 250;
  c.sample_rate = 500.0;
  c.input_len = 1000;
  c.blocks = {{{32, 100, 10, 10, 5}, {64, 20, 5, 5, 2}, {128, 5, 2, 2, 2}}};
  c.fc_units = 1024;
  return c;
}

ArchConfig ArchConfig::desk_scale() {
  ArchConfig c;
  c.n_filters = 16;
  c.kernel_len = 65;
  c.sample_rate = 250.0;
  c.input_len = 125;
  c.blocks = {{{8, 16, 5, 4, 5}, {16, 4, 3, 2, 2}, {32, 2, 2, 2, 2}}};
  c.fc_units = 128;
  return c;
}

std::array<std::array<Index, 2>, 4> ArchConfig::feature_sizes() const {
  std::array<std::array<Index, 2>, 4> s{};
  s[0] = {n_filters, input_len};
  for (std::size_t i = 0; i < 3; ++i) {
    s[i + 1] = {(s[i][0] + blocks[i].pool_h - 1) / blocks[i].pool_h, (s[i][1] + blocks[i].pool_w - 1) / blocks[i].pool_w};
  }
  return s;
}

Index ArchConfig::flatten_size() const {
  const auto s = feature_sizes();
  return blocks[2].channels * s[3][0] * s[3][1];
}

void ArchConfig::validate() const {
  if (n_filters < 1) throw std::invalid_argument("arch: n_filters must be >= 1");
  if (kernel_len < 3) throw std::invalid_argument("arch: kernel_len must be >= 3");
  if (input_len < kernel_len) throw std::invalid_argument("arch: input_len must be >= kernel_len");
  if (!(sample_rate > 0.0)) throw std::invalid_argument("arch: sample_rate must be positive");
  if (fc_units < 1 || n_classes < 2) throw std::invalid_argument("arch: fc_units >= 1 and n_classes >= 2 required");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("arch: dropout must be in [0, 1)");
  const auto s = feature_sizes();
  for (std::size_t i = 0; i < 3; ++i) {
    const auto& b = blocks[i];
    if (b.channels < 1 || b.kernel_h < 1 || b.kernel_w < 1 || b.pool_h < 1 || b.pool_w < 1) {
      throw std::invalid_argument("arch: block " + std::to_string(i + 1) + " has non-positive sizes");
    }
    if (b.pool_h > s[i][0] || b.pool_w > s[i][1]) {
      throw std::invalid_argument("arch: block " + std::to_string(i + 1) + " pool larger than its input");
    }
  }
}

void to_json(nlohmann::json& j, const ArchConfig& c) {
  nlohmann::json blocks = nlohmann::json::array();
  for (const auto& b : c.blocks) {
    blocks.push_back({{"channels", b.channels},
                      {"kernel", {b.kernel_h, b.kernel_w}},
                      {"pool", {b.pool_h, b.pool_w}}});
  }
  j = {{"arch", to_string(c.arch)},   {"n_filters", c.n_filters},   {"kernel_len", c.kernel_len},
       {"sample_rate", c.sample_rate}, {"input_len", c.input_len},   {"blocks", blocks},
       {"fc_units", c.fc_units},       {"n_classes", c.n_classes},   {"dropout", c.dropout},
       {"min_band_hz", c.min_band_hz}, {"init_band_hz", c.init_band_hz}};
}

void from_json(const nlohmann::json& j, ArchConfig& c) {
  c.arch = parse_arch(j.at("arch").get<std::string>());
  c.n_filters = j.at("n_filters").get<Index>();
  c.kernel_len = j.at("kernel_len").get<Index>();
  c.sample_rate = j.at("sample_rate").get<double>();
  c.input_len = j.at("input_len").get<Index>();
  const auto& blocks = j.at("blocks");
  if (blocks.size() != 3) throw std::invalid_argument("arch: expected 3 conv blocks");
  for (std::size_t i = 0; i < 3; ++i) {
    const auto& b = blocks[i];
    c.blocks[i] = {b.at("channels").get<Index>(), b.at("kernel")[0].get<Index>(), b.at("kernel")[1].get<Index>(),
                   b.at("pool")[0].get<Index>(), b.at("pool")[1].get<Index>()};
  }
  c.fc_units = j.at("fc_units").get<Index>();
  c.n_classes = j.at("n_classes").get<Index>();
  c.dropout = j.at("dropout").get<double>();
  c.min_band_hz = j.at("min_band_hz").get<double>();
  c.init_band_hz = j.at("init_band_hz").get<double>();
}

Model::Model(const ArchConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  Rng rng(seed);
  if (config_.arch == Arch::sincnet) {
    const Filterbank bank = Filterbank::spread(config_.n_filters, config_.kernel_len, config_.sample_rate,
                                               config_.min_band_hz, config_.init_band_hz);
    Tensor raw({config_.n_filters, 2});
    for (Index i = 0; i < config_.n_filters; ++i) {
      raw(i, 0) = bank.params()[static_cast<std::size_t>(i)].f_low_raw;
      raw(i, 1) = bank.params()[static_cast<std::size_t>(i)].band_raw;
    }
    params_.emplace_back(kFront, std::move(raw));
  } else {
    params_.emplace_back(kFront, glorot_uniform({config_.n_filters, config_.kernel_len}, config_.kernel_len,
                                                config_.n_filters * config_.kernel_len, rng));
  }

  Index in_channels = 1;
  for (std::size_t i = 0; i < 3; ++i) {
    const auto& b = config_.blocks[i];
    const Index receptive = b.kernel_h * b.kernel_w;
    params_.emplace_back(block_name(i, "kernel"),
                         glorot_uniform({b.channels, in_channels, b.kernel_h, b.kernel_w}, in_channels * receptive,
                                        b.channels * receptive, rng));
    params_.emplace_back(block_name(i, "bias"), Tensor({b.channels}));
    params_.emplace_back(block_name(i, "bn_scale"), Tensor::constant({b.channels}, 1.0));
    params_.emplace_back(block_name(i, "bn_shift"), Tensor({b.channels}));
    bn_.emplace_back(b.channels);
    in_channels = b.channels;
  }
  const Index flat = config_.flatten_size();
  params_.emplace_back("fc.weight", glorot_uniform({flat, config_.fc_units}, flat, config_.fc_units, rng));
  params_.emplace_back("fc.bias", Tensor({config_.fc_units}));
  params_.emplace_back("out.weight", glorot_uniform({config_.fc_units, config_.n_classes}, config_.fc_units,
                                                    config_.n_classes, rng));
  params_.emplace_back("out.bias", Tensor({config_.n_classes}));
}

Model::Model(const ArchConfig& config, std::vector<Parameter> params, std::vector<BatchNormState> bn,
             std::int64_t step_count)
    : config_(config), params_(std::move(params)), bn_(std::move(bn)), step_count_(step_count) {
  config_.validate();
  const Model reference(config_, 0);
  if (params_.size() != reference.params_.size() || bn_.size() != reference.bn_.size()) {
    throw std::invalid_argument("model: parameter list does not match architecture");
  }
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const Parameter& p = params_[i];
    const Parameter& r = reference.params_[i];
    if (p.name != r.name || p.value.shape() != r.value.shape() || p.m.shape() != r.value.shape() ||
        p.v.shape() != r.value.shape()) {
      throw std::invalid_argument("model: parameter '" + p.name + "' does not match architecture slot '" + r.name + "'");
    }
  }
  for (std::size_t i = 0; i < bn_.size(); ++i) {
    if (bn_[i].running_mean.size() != reference.bn_[i].running_mean.size() ||
        bn_[i].running_var.size() != reference.bn_[i].running_var.size()) {
      throw std::invalid_argument("model: batch-norm state does not match architecture");
    }
  }
}

Parameter& Model::parameter(const std::string& name) {
  auto it = std::find_if(params_.begin(), params_.end(), [&](const Parameter& p) { return p.name == name; });
  if (it == params_.end()) throw std::out_of_range("model: no parameter named '" + name + "'");
  return *it;
}

const Parameter& Model::parameter(const std::string& name) const {
  return const_cast<Model*>(this)->parameter(name);
}

Filterbank Model::filterbank() const {
  if (config_.arch != Arch::sincnet) throw std::logic_error("model: filterbank() requires the sincnet architecture");
  return bank_from_tensor(params_.front().value, config_);
}

RowMatrixXd Model::front_kernels() const {
  if (config_.arch == Arch::sincnet) return filterbank().kernels();
  return params_.front().value.matrix(config_.n_filters, config_.kernel_len);
}

Tensor Model::forward(const Tensor& batch, Mode mode, Rng* dropout_rng) {
  if (batch.rank() != 2 || batch.dim(1) != config_.input_len) {
    throw std::invalid_argument("model: expected input [B x " + std::to_string(config_.input_len) + "], got " +
                                batch.shape_string());
  }
  if (mode == Mode::train && dropout_rng == nullptr && config_.dropout > 0.0) {
    throw std::invalid_argument("model: train mode needs a dropout rng");
  }
  Rng unused(0);
  Rng& rng = dropout_rng ? *dropout_rng : unused;
  cache_mode_ = mode;
  cache_input_ = batch;
  const Index B = batch.dim(0);

  Tensor x = fir_bank_forward(batch, front_kernels()).reshaped({B, 1, config_.n_filters, config_.input_len});
  std::size_t p = 1;
  for (std::size_t i = 0; i < 3; ++i, p += 4) {
    BlockCache& c = cache_blocks_[i];
    const auto& b = config_.blocks[i];
    c.input = std::move(x);
    c.conv_out = conv2d_forward(c.input, params_[p].value, params_[p + 1].value.vec());
    Tensor normed = batch_norm_forward(c.conv_out, params_[p + 2].value.vec(), params_[p + 3].value.vec(), bn_[i], mode,
                                       &c.bn);
    PoolResult pooled = maxpool2d_forward(normed, b.pool_h, b.pool_w);
    c.argmax = std::move(pooled.argmax);
    c.pooled = std::move(pooled.output);
    x = dropout_forward(relu_forward(c.pooled), config_.dropout, mode, rng, c.mask);
  }
  cache_flat_ = x.reshaped({B, config_.flatten_size()});
  cache_fc_pre_ = dense_forward(cache_flat_, params_[p].value, params_[p + 1].value.vec());
  cache_fc_out_ = dropout_forward(relu_forward(cache_fc_pre_), config_.dropout, mode, rng, cache_fc_mask_);
  return dense_forward(cache_fc_out_, params_[p + 2].value, params_[p + 3].value.vec());
}

void Model::backward(const Tensor& logit_grad) {
  if (cache_input_.empty()) throw std::logic_error("model: backward called before forward");
  const Index B = cache_input_.dim(0);
  require_shape(logit_grad, {B, config_.n_classes}, "model backward");

  const std::size_t p_fc = 13;
  DenseGrads out_g = dense_backward(logit_grad, cache_fc_out_, params_[p_fc + 2].value);
  params_[p_fc + 2].grad = std::move(out_g.weight);
  params_[p_fc + 3].grad.vec() = out_g.bias;
  Tensor g = relu_backward(dropout_backward(out_g.input, cache_fc_mask_), cache_fc_pre_);
  DenseGrads fc_g = dense_backward(g, cache_flat_, params_[p_fc].value);
  params_[p_fc].grad = std::move(fc_g.weight);
  params_[p_fc + 1].grad.vec() = fc_g.bias;

  const auto sizes = config_.feature_sizes();
  g = fc_g.input.reshaped({B, config_.blocks[2].channels, sizes[3][0], sizes[3][1]});
  for (std::size_t i = 3; i-- > 0;) {
    BlockCache& c = cache_blocks_[i];
    const std::size_t p = 1 + 4 * i;
    g = relu_backward(dropout_backward(g, c.mask), c.pooled);
    g = maxpool2d_backward(g, c.argmax, c.conv_out.shape());
    BatchNormGrads bn_g = batch_norm_backward(g, c.bn, params_[p + 2].value.vec());
    params_[p + 2].grad.vec() = bn_g.scale;
    params_[p + 3].grad.vec() = bn_g.shift;
    Conv2dGrads conv_g = conv2d_backward(bn_g.input, c.input, params_[p].value);
    params_[p].grad = std::move(conv_g.kernel);
    params_[p + 1].grad.vec() = conv_g.bias;
    g = std::move(conv_g.input);
  }

  const Tensor front_up = g.reshaped({B, config_.n_filters, config_.input_len});
  FirBankGrads front_g = fir_bank_backward(front_up, cache_input_, front_kernels(), false);
  Parameter& front = params_.front();
  if (config_.arch == Arch::sincnet) {
    const auto pg = filter_param_grads(front_g.kernels, filterbank());
    for (Index i = 0; i < config_.n_filters; ++i) {
      front.grad(i, 0) = pg[static_cast<std::size_t>(i)].d_low_raw;
      front.grad(i, 1) = pg[static_cast<std::size_t>(i)].d_band_raw;
    }
  } else {
    front.grad.matrix(config_.n_filters, config_.kernel_len) = front_g.kernels;
  }
}

void Model::step(const AdamConfig& adam) {
  adam_step(params_, adam, step_count_);
  if (config_.arch == Arch::sincnet) check_filter_invariants();
}

void Model::check_filter_invariants() const {
  const Filterbank bank = filterbank();
  for (Index i = 0; i < bank.size(); ++i) {
    const Cutoffs c = bank.cutoffs(i);
    if (!(c.f2 > c.f1) || c.f2 > 0.5) {
      throw std::logic_error("model: filter " + std::to_string(i) + " violates f1 < f2 <= nyquist after update");
    }
  }
}

std::vector<LayerParameterCount> Model::parameter_counts() const {
  std::vector<LayerParameterCount> counts;
  counts.push_back({config_.arch == Arch::sincnet ? "sincconv" : "conv1d", params_.front().value.size()});
  for (std::size_t i = 0; i < 3; ++i) {
    Index n = 0;
    for (std::size_t k = 0; k < 4; ++k) n += params_[1 + 4 * i + k].value.size();
    counts.push_back({"block" + std::to_string(i + 1), n});
  }
  counts.push_back({"fc", params_[13].value.size() + params_[14].value.size()});
  counts.push_back({"out", params_[15].value.size() + params_[16].value.size()});
  return counts;
}

}  // namespace sinceeg
