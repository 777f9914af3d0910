#include "ltm/model.hpp"

#include <cmath>
#include <numeric>

#include "ltm/ops.hpp"
#include "ltm/rng.hpp"

namespace ltm {

namespace {

struct Slot {
  std::string name;
  Shape shape;
  enum Kind { kWeight, kBias, kGain } kind;
};

void add_linear(std::vector<Slot>& out, const std::string& prefix, std::size_t in, std::size_t outd) {
  out.push_back({prefix + ".weight", {in, outd}, Slot::kWeight});
  out.push_back({prefix + ".bias", {outd}, Slot::kBias});
}

void add_norm(std::vector<Slot>& out, const std::string& prefix, std::size_t d) {
  out.push_back({prefix + ".gain", {d}, Slot::kGain});
  out.push_back({prefix + ".bias", {d}, Slot::kBias});
}

const char* const kHeadNames[] = {"mu", "sigma", "nu"};

// Ordered parameter inventory; the single source for construction and checkpoint validation.
std::vector<Slot> layout(const ModelConfig& c) {
  const auto d = static_cast<std::size_t>(c.d_model);
  std::vector<Slot> slots;
  add_linear(slots, "embed.value", 1, d);
  add_linear(slots, "embed.position", 1, d);
  for (int l = 0; l < c.n_layers; ++l) {
    const std::string p = "blocks." + std::to_string(l);
    if (c.pre_layer_norm) add_norm(slots, p + ".norm1", d);
    add_linear(slots, p + ".attn.query", d, d);
    add_linear(slots, p + ".attn.key", d, d);
    add_linear(slots, p + ".attn.value", d, d);
    add_linear(slots, p + ".attn.out", d, d);
    if (c.pre_layer_norm) add_norm(slots, p + ".norm2", d);
    add_linear(slots, p + ".ffn.up", d, d);
    add_linear(slots, p + ".ffn.down", d, d);
  }
  if (c.pre_layer_norm) add_norm(slots, "final_norm", d);
  for (const char* head : kHeadNames) {
    const std::string p = std::string("head.") + head;
    for (int h = 0; h < c.head_hidden_layers; ++h) add_linear(slots, p + ".hidden" + std::to_string(h), d, d);
    add_linear(slots, p + ".out", d, 1);
  }
  return slots;
}

}  // namespace

void ModelConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ContractError("invalid model config: " + msg); };
  if (d_model < 1) fail("d_model must be >= 1");
  if (n_heads < 1) fail("n_heads must be >= 1");
  if (d_model % n_heads != 0) {
    fail("d_model " + std::to_string(d_model) + " is not divisible by n_heads " + std::to_string(n_heads));
  }
  if (n_layers < 0) fail("n_layers must be >= 0");
  if (seq_len < 2) fail("seq_len must be >= 2");
  if (theta_out != 3) fail("theta_out must be 3 (mu, sigma, nu)");
  if (head_hidden_layers < 1) fail("head_hidden_layers must be >= 1");
}

AspectRatio aspect_ratio(const ModelConfig& config) {
  if (config.n_layers < 1) throw ContractError("aspect ratio undefined for n_layers < 1");
  std::int64_t g = std::gcd<std::int64_t>(config.d_model, config.n_layers);
  return {config.d_model / g, config.n_layers / g};
}

std::uint64_t count_parameters(const ModelConfig& c) {
  c.validate();
  const std::uint64_t d = static_cast<std::uint64_t>(c.d_model);
  const std::uint64_t linear_dd = d * d + d;
  std::uint64_t per_layer = 4 * linear_dd + 2 * linear_dd;
  std::uint64_t total = 2 * d + 2 * d;
  if (c.pre_layer_norm) {
    per_layer += 4 * d;
    total += 2 * d;
  }
  total += static_cast<std::uint64_t>(c.n_layers) * per_layer;
  total += 3 * (static_cast<std::uint64_t>(c.head_hidden_layers) * linear_dd + (d + 1));
  return total;
}

Model::Model(ModelConfig config, std::uint64_t seed) : config_(config) {
  config_.validate();
  Rng rng(seed);
  for (auto& slot : layout(config_)) {
    std::vector<double> values(numel(slot.shape), 0.0);
    if (slot.kind == Slot::kWeight) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(slot.shape[0]));
      for (auto& v : values) v = rng.uniform(-bound, bound);
    } else if (slot.kind == Slot::kGain) {
      std::fill(values.begin(), values.end(), 1.0);
    }
    params_.push_back({slot.name, Tensor(slot.shape, std::move(values), true)});
  }
}

Model Model::from_parameters(ModelConfig config, std::vector<NamedTensor> params) {
  config.validate();
  auto slots = layout(config);
  if (slots.size() != params.size()) {
    throw ContractError("expected " + std::to_string(slots.size()) + " parameter tensors, got " +
                        std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (slots[i].name != params[i].name || slots[i].shape != params[i].value.shape()) {
      throw ContractError("parameter " + std::to_string(i) + " is " + params[i].name +
                          shape_str(params[i].value.shape()) + ", expected " + slots[i].name +
                          shape_str(slots[i].shape));
    }
    params[i].value.set_requires_grad(true);
  }
  Model m;
  m.config_ = config;
  m.params_ = std::move(params);
  return m;
}

Model Model::clone() const {
  std::vector<NamedTensor> copy;
  copy.reserve(params_.size());
  for (const auto& p : params_) {
    copy.push_back({p.name, Tensor(p.value.shape(), {p.value.data().begin(), p.value.data().end()}, true)});
  }
  return from_parameters(config_, std::move(copy));
}

const Tensor& Model::param(std::string_view name) const {
  for (const auto& p : params_) {
    if (p.name == name) return p.value;
  }
  throw ContractError("no parameter named " + std::string(name));
}

Tensor& Model::param(std::string_view name) {
  return const_cast<Tensor&>(static_cast<const Model&>(*this).param(name));
}

std::uint64_t Model::parameter_count() const {
  std::uint64_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

std::vector<std::vector<double>> Model::snapshot() const {
  std::vector<std::vector<double>> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.emplace_back(p.value.data().begin(), p.value.data().end());
  return out;
}

void Model::restore(const std::vector<std::vector<double>>& values) {
  if (values.size() != params_.size()) throw ContractError("restore: snapshot does not match model");
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto dst = params_[i].value.mutable_data();
    if (dst.size() != values[i].size()) throw ContractError("restore: size mismatch for " + params_[i].name);
    std::copy(values[i].begin(), values[i].end(), dst.begin());
  }
}

StudentTParams Model::forward(Tape& tape, const Tensor& window) const {
  return head_forward(tape, *this, decoder_forward(tape, *this, embed(tape, *this, window)));
}

namespace {

Tensor dense(Tape& tape, const Model& m, const std::string& prefix, const Tensor& x) {
  return ops::linear(tape, x, m.param(prefix + ".weight"), m.param(prefix + ".bias"));
}

Tensor norm(Tape& tape, const Model& m, const std::string& prefix, const Tensor& x) {
  return ops::layer_norm(tape, x, m.param(prefix + ".gain"), m.param(prefix + ".bias"));
}

}  // namespace

Tensor embed(Tape& tape, const Model& model, const Tensor& window) {
  const auto& c = model.config();
  const auto len = static_cast<std::size_t>(c.seq_len);
  if (window.rank() != 2 || window.dim(1) != len) {
    throw ShapeError("embed: window shape " + shape_str(window.shape()) + " does not match [batch, " +
                     std::to_string(len) + "]");
  }
  const std::size_t batch = window.dim(0);
  Tensor values = ops::reshape(tape, window, {batch, len, 1});
  Tensor value_emb = dense(tape, model, "embed.value", values);

  std::vector<double> pos(len);
  for (std::size_t t = 0; t < len; ++t) pos[t] = static_cast<double>(t) / static_cast<double>(len - 1);
  Tensor positions({len, 1}, std::move(pos));
  Tensor pos_emb = dense(tape, model, "embed.position", positions);
  return ops::add(tape, value_emb, pos_emb);
}

Tensor decoder_forward(Tape& tape, const Model& model, const Tensor& tokens) {
  const auto& c = model.config();
  const Shape expected{tokens.rank() == 3 ? tokens.dim(0) : 0, static_cast<std::size_t>(c.seq_len),
                       static_cast<std::size_t>(c.d_model)};
  if (tokens.shape() != expected) {
    throw ShapeError("decoder: tokens " + shape_str(tokens.shape()) + " do not match [batch, " +
                     std::to_string(c.seq_len) + ", " + std::to_string(c.d_model) + "]");
  }
  Tensor x = tokens;
  for (int l = 0; l < c.n_layers; ++l) {
    const std::string p = "blocks." + std::to_string(l);
    Tensor h = c.pre_layer_norm ? norm(tape, model, p + ".norm1", x) : x;
    Tensor q = dense(tape, model, p + ".attn.query", h);
    Tensor k = dense(tape, model, p + ".attn.key", h);
    Tensor v = dense(tape, model, p + ".attn.value", h);
    Tensor a = ops::multi_head_attention(tape, q, k, v, static_cast<std::size_t>(c.n_heads), true);
    x = ops::add(tape, x, dense(tape, model, p + ".attn.out", a));

    Tensor h2 = c.pre_layer_norm ? norm(tape, model, p + ".norm2", x) : x;
    Tensor f = ops::relu(tape, dense(tape, model, p + ".ffn.up", h2));
    x = ops::add(tape, x, dense(tape, model, p + ".ffn.down", f));
  }
  return x;
}

StudentTParams head_forward(Tape& tape, const Model& model, const Tensor& hidden) {
  const auto& c = model.config();
  if (hidden.rank() != 3 || hidden.dim(2) != static_cast<std::size_t>(c.d_model)) {
    throw ShapeError("head: hidden " + shape_str(hidden.shape()) + " is not [batch, seq, " +
                     std::to_string(c.d_model) + "]");
  }
  const Shape out_shape{hidden.dim(0), hidden.dim(1)};
  Tensor h = c.pre_layer_norm ? norm(tape, model, "final_norm", hidden) : hidden;

  Tensor raw[3];
  for (int which = 0; which < 3; ++which) {
    const std::string p = std::string("head.") + kHeadNames[which];
    Tensor z = h;
    for (int k = 0; k < c.head_hidden_layers; ++k) {
      z = ops::relu(tape, dense(tape, model, p + ".hidden" + std::to_string(k), z));
    }
    raw[which] = ops::reshape(tape, dense(tape, model, p + ".out", z), out_shape);
  }
  StudentTParams out;
  out.mu = raw[0];
  out.sigma = ops::add_scalar(tape, ops::softplus(tape, raw[1]), kSigmaFloor);
  out.nu = ops::add_scalar(tape, ops::softplus(tape, raw[2]), kNuOffset);
  return out;
}

}  // namespace ltm
