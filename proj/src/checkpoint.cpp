#include "sinceeg/checkpoint.hpp"

#include "binary_io.hpp"

#include <fstream>

namespace sinceeg {

namespace {

constexpr char kMagic[4] = {'S', 'N', 'C', 'K'};

struct Slot {
  std::string name;
  std::vector<Index> shape;
};

void write_block(std::ostream& out, const Eigen::VectorXd& v) {
  for (Index i = 0; i < v.size(); ++i) detail::write_le<double>(out, v[i]);
}

Eigen::VectorXd read_block(std::istream& in, Index n, const std::string& name) {
  Eigen::VectorXd v(n);
  for (Index i = 0; i < n; ++i) v[i] = detail::read_le<double>(in, name.c_str());
  return v;
}

}  // namespace

void write_checkpoint(const std::filesystem::path& path, const Model& model, std::uint64_t seed,
                      const nlohmann::json& extra) {
  nlohmann::json tensors = nlohmann::json::array();
  for (const char* role : {"value", "adam_m", "adam_v"}) {
    for (const Parameter& p : model.parameters()) tensors.push_back({{"name", p.name + "." + role}, {"shape", p.value.shape()}});
  }
  for (std::size_t i = 0; i < model.batch_norm_states().size(); ++i) {
    const Index c = model.batch_norm_states()[i].running_mean.size();
    tensors.push_back({{"name", "block" + std::to_string(i + 1) + ".running_mean"}, {"shape", {c}}});
    tensors.push_back({{"name", "block" + std::to_string(i + 1) + ".running_var"}, {"shape", {c}}});
  }
  const nlohmann::json header = {{"arch", model.config()},
                                 {"seed", seed},
                                 {"step_count", model.step_count()},
                                 {"tensors", tensors},
                                 {"extra", extra}};
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError(FormatErrc::io_error, "cannot open " + path.string() + " for writing");
  out.write(kMagic, 4);
  detail::write_le<std::uint32_t>(out, kCheckpointVersion);
  detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(text.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const Parameter& p : model.parameters()) write_block(out, p.value.vec());
  for (const Parameter& p : model.parameters()) write_block(out, p.m.vec());
  for (const Parameter& p : model.parameters()) write_block(out, p.v.vec());
  for (const BatchNormState& s : model.batch_norm_states()) {
    write_block(out, s.running_mean);
    write_block(out, s.running_var);
  }
  if (!out) throw FormatError(FormatErrc::io_error, "write failed for " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(FormatErrc::io_error, "cannot open checkpoint " + path.string());
  char magic[4];
  detail::read_exact(in, magic, 4, "magic");
  if (!std::equal(magic, magic + 4, kMagic)) throw FormatError(FormatErrc::bad_magic, path.string() + " is not a checkpoint");
  const auto version = detail::read_le<std::uint32_t>(in, "version");
  if (version != kCheckpointVersion) {
    throw FormatError(FormatErrc::version_mismatch, "checkpoint version " + std::to_string(version) + " unsupported");
  }
  const auto header_len = detail::read_le<std::uint32_t>(in, "header length");
  std::string text(header_len, '\0');
  detail::read_exact(in, text.data(), header_len, "header");

  nlohmann::json header;
  ArchConfig config;
  try {
    header = nlohmann::json::parse(text);
    config = header.at("arch").get<ArchConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(FormatErrc::bad_header, std::string("checkpoint header: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw FormatError(FormatErrc::bad_header, std::string("checkpoint header: ") + e.what());
  }

  // Shapes come from the architecture, not the file, so a header cannot
  // smuggle in tensors the model would not accept.
  Model layout(config, 0);
  std::vector<Parameter> params(layout.parameters().begin(), layout.parameters().end());
  for (Parameter& p : params) p.value.vec() = read_block(in, p.value.size(), p.name);
  for (Parameter& p : params) p.m.vec() = read_block(in, p.m.size(), p.name + ".adam_m");
  for (Parameter& p : params) p.v.vec() = read_block(in, p.v.size(), p.name + ".adam_v");
  std::vector<BatchNormState> bn = layout.batch_norm_states();
  for (BatchNormState& s : bn) {
    s.running_mean = read_block(in, s.running_mean.size(), "running_mean");
    s.running_var = read_block(in, s.running_var.size(), "running_var");
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw FormatError(FormatErrc::bad_header, "trailing bytes after checkpoint payload");
  }
  for (Parameter& p : params) p.zero_grad();
  return {Model(config, std::move(params), std::move(bn), header.at("step_count").get<std::int64_t>()),
          header.at("seed").get<std::uint64_t>(), header};
}

}  // namespace sinceeg
