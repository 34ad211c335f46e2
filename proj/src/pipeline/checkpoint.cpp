#include "psv/pipeline/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>

#include "psv/error.hpp"
#include "psv/nn/serialize.hpp"

namespace psv::pipeline {

namespace {

constexpr std::array<char, 8> kMagic{'P', 'S', 'V', 'C', 'K', 'P', 'T', '\0'};

std::vector<nn::NamedTensor> named(const std::deque<nn::Parameter>& params, const std::vector<nn::Tensor>& values) {
  std::vector<nn::NamedTensor> out;
  for (std::size_t i = 0; i < values.size(); ++i) out.push_back({params[i].name, values[i]});
  return out;
}

void assign(nn::Tensor& target, const nn::NamedTensor& source, const std::string& where) {
  require(target.shape() == source.tensor.shape(), where + ": tensor '" + source.name + "' has shape " +
                                                       source.tensor.shape_string() + ", model expects " +
                                                       target.shape_string());
  target = source.tensor;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, Model& model, const CheckpointInfo& info, nn::Adam* optimizer) {
  model.round_to_float();
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), "cannot write checkpoint " + path.string());

  out.write(kMagic.data(), kMagic.size());
  nn::write_u32(out, kCheckpointVersion);
  nn::write_string(out, to_text(model.config()));
  nn::write_u64(out, info.epoch);
  nn::write_string(out, info.metrics);
  nn::write_u32(out, static_cast<std::uint32_t>(info.loss_curve.size()));
  for (const double v : info.loss_curve) nn::write_u64(out, std::bit_cast<std::uint64_t>(v));

  std::vector<nn::NamedTensor> params;
  for (const auto& p : model.store().parameters()) params.push_back({p.name, p.value});
  nn::write_tensors(out, params);
  std::vector<nn::NamedTensor> buffers;
  for (const auto& [name, value] : model.store().buffers()) buffers.push_back({name, value});
  nn::write_tensors(out, buffers);

  const auto& ps = model.store().parameters();
  if (optimizer != nullptr) {
    nn::write_u64(out, optimizer->step_count());
    nn::write_tensors(out, named(ps, optimizer->first_moments()));
    nn::write_tensors(out, named(ps, optimizer->second_moments()));
  } else {
    nn::write_u64(out, 0);
    nn::write_tensors(out, {});
    nn::write_tensors(out, {});
  }
  require(static_cast<bool>(out), "failed writing checkpoint " + path.string());
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), "cannot open checkpoint " + path.string());
  const std::string where = path.string();

  std::array<char, 8> magic{};
  require(static_cast<bool>(in.read(magic.data(), magic.size())) && magic == kMagic,
          where + ": not a checkpoint file");
  try {
    const std::uint32_t version = nn::read_u32(in);
    require(version == kCheckpointVersion, "unsupported checkpoint version " + std::to_string(version));

    LoadedCheckpoint loaded;
    const auto config = parse_config(nn::read_string(in), where + " (config)").config;
    loaded.info.epoch = nn::read_u64(in);
    loaded.info.metrics = nn::read_string(in);
    const std::uint32_t losses = nn::read_u32(in);
    require(losses <= (1u << 24), "loss curve length out of range");
    for (std::uint32_t i = 0; i < losses; ++i) loaded.info.loss_curve.push_back(std::bit_cast<double>(nn::read_u64(in)));

    loaded.model = std::make_unique<Model>(config);
    auto& store = loaded.model->store();
    const auto params = nn::read_tensors(in);
    require(params.size() == store.parameters().size(), "parameter count " + std::to_string(params.size()) +
                                                            " does not match the model's " +
                                                            std::to_string(store.parameters().size()));
    for (const auto& t : params) {
      auto* p = store.find_parameter(t.name);
      require(p != nullptr, "unknown parameter '" + t.name + "'");
      assign(p->value, t, where);
    }
    const auto buffers = nn::read_tensors(in);
    require(buffers.size() == store.buffers().size(), "buffer count does not match the model");
    for (const auto& t : buffers) {
      auto* b = store.find_buffer(t.name);
      require(b != nullptr, "unknown buffer '" + t.name + "'");
      assign(*b, t, where);
    }

    loaded.optimizer.steps = nn::read_u64(in);
    for (auto& t : nn::read_tensors(in)) loaded.optimizer.first_moments.push_back(std::move(t.tensor));
    for (auto& t : nn::read_tensors(in)) loaded.optimizer.second_moments.push_back(std::move(t.tensor));
    return loaded;
  } catch (const ValidationError& e) {
    const std::string what = e.what();
    if (what.rfind(where, 0) == 0) throw;
    throw ValidationError(where + ": " + what);
  }
}

}  // namespace psv::pipeline
