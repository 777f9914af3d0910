#include "ltm/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace ltm {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw FormatError("checkpoint truncated");
  return value;
}

}  // namespace

void write_checkpoint(std::ostream& out, const Model& model) {
  const auto& c = model.config();
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  put<std::uint32_t>(out, kCheckpointVersion);
  for (int field : {c.d_model, c.n_heads, c.n_layers, c.seq_len, c.theta_out, c.head_hidden_layers}) {
    put<std::int32_t>(out, field);
  }
  put<std::uint8_t>(out, c.pre_layer_norm ? 1 : 0);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(model.parameters().size()));
  for (const auto& p : model.parameters()) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p.name.size()));
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    const auto& shape = p.value.shape();
    put<std::uint32_t>(out, static_cast<std::uint32_t>(shape.size()));
    for (auto d : shape) put<std::uint64_t>(out, d);
    auto data = p.value.data();
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(double)));
  }
}

Model read_checkpoint(std::istream& in) {
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) throw FormatError("not an ltm checkpoint");
  auto version = get<std::uint32_t>(in);
  if (version != kCheckpointVersion) throw FormatError("unsupported checkpoint version " + std::to_string(version));
  ModelConfig c;
  c.d_model = get<std::int32_t>(in);
  c.n_heads = get<std::int32_t>(in);
  c.n_layers = get<std::int32_t>(in);
  c.seq_len = get<std::int32_t>(in);
  c.theta_out = get<std::int32_t>(in);
  c.head_hidden_layers = get<std::int32_t>(in);
  c.pre_layer_norm = get<std::uint8_t>(in) != 0;
  auto count = get<std::uint32_t>(in);
  std::vector<NamedTensor> params;
  for (std::uint32_t i = 0; i < count; ++i) {
    auto name_len = get<std::uint32_t>(in);
    if (name_len > 4096) throw FormatError("implausible parameter name length");
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    auto rank = get<std::uint32_t>(in);
    if (rank == 0 || rank > 8) throw FormatError("implausible tensor rank for " + name);
    Shape shape(rank);
    for (auto& d : shape) d = get<std::uint64_t>(in);
    std::vector<double> data(numel(shape));
    in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(double)));
    if (!in) throw FormatError("checkpoint truncated in " + name);
    params.push_back({std::move(name), Tensor(std::move(shape), std::move(data), true)});
  }
  try {
    return Model::from_parameters(c, std::move(params));
  } catch (const ContractError& e) {
    throw FormatError(std::string("checkpoint does not match its config: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const Model& model) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  write_checkpoint(out, model);
}

Model load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  return read_checkpoint(in);
}

}  // namespace ltm
