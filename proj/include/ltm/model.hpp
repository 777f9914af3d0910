#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "ltm/tensor.hpp"

namespace ltm {

/// Architecture hyperparameters. The feed-forward width equals d_model.
struct ModelConfig {
  int d_model = 64;
  int n_heads = 4;
  int n_layers = 2;
  int seq_len = 256;
  int theta_out = 3;
  int head_hidden_layers = 4;
  bool pre_layer_norm = true;

  /// Throws ContractError on an invalid combination. n_layers == 0 is accepted as
  /// the degenerate "no decoder blocks" configuration used in tests.
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

/// Exact d_model / n_layers, kept as a reduced fraction.
struct AspectRatio {
  std::int64_t num = 0;
  std::int64_t den = 1;

  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
  bool below(std::int64_t limit) const { return num < limit * den; }
};

AspectRatio aspect_ratio(const ModelConfig& config);

/// Parameter total from the closed-form layer inventory.
std::uint64_t count_parameters(const ModelConfig& config);

/// Per-position Student's-t parameters, each shaped [batch, seq_len].
struct StudentTParams {
  Tensor mu;
  Tensor sigma;
  Tensor nu;
};

inline constexpr double kSigmaFloor = 1e-6;
inline constexpr double kNuOffset = 2.0;

struct NamedTensor {
  std::string name;
  Tensor value;
};

class Model {
 public:
  /// Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero, norm gains one.
  Model(ModelConfig config, std::uint64_t seed);

  // Tensors are shared handles, so a member-wise copy would alias weights. Use clone().
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;
  Model(Model&&) noexcept = default;
  Model& operator=(Model&&) noexcept = default;

  Model clone() const;

  const ModelConfig& config() const { return config_; }
  std::vector<NamedTensor>& parameters() { return params_; }
  const std::vector<NamedTensor>& parameters() const { return params_; }

  const Tensor& param(std::string_view name) const;
  Tensor& param(std::string_view name);

  /// Sum of element counts over every parameter tensor.
  std::uint64_t parameter_count() const;

  /// Full forward pass: embed, decoder stack, distribution head.
  StudentTParams forward(Tape& tape, const Tensor& window) const;

  /// Deep copy of all parameter values (used for best-so-far snapshots).
  std::vector<std::vector<double>> snapshot() const;
  void restore(const std::vector<std::vector<double>>& values);

  /// Rebuilds a model from stored tensors; names and shapes must match the layout of `config`.
  static Model from_parameters(ModelConfig config, std::vector<NamedTensor> params);

 private:
  Model() = default;

  ModelConfig config_;
  std::vector<NamedTensor> params_;
};

/// Value embedding plus learned positional embedding of t / (seq_len - 1).
/// window: [batch, seq_len] -> [batch, seq_len, d_model].
Tensor embed(Tape& tape, const Model& model, const Tensor& window);

/// Stack of causal pre-norm attention and ReLU feed-forward blocks, each with a residual.
Tensor decoder_forward(Tape& tape, const Model& model, const Tensor& tokens);

/// Final norm (when enabled) followed by three per-position MLPs for mu, sigma and nu.
StudentTParams head_forward(Tape& tape, const Model& model, const Tensor& hidden);

}  // namespace ltm
