#include "ltm/adamw.hpp"

#include <cmath>

namespace ltm {

double grad_norm(std::span<const NamedTensor> params) {
  double total = 0.0;
  for (const auto& p : params) {
    if (!p.value.has_grad()) continue;
    for (double g : p.value.grad()) total += g * g;
  }
  return std::sqrt(total);
}

void adamw_step(std::span<NamedTensor> params, AdamWState& state, double lr, const TrainConfig& cfg) {
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.value.size(), 0.0);
      state.v.emplace_back(p.value.size(), 0.0);
    }
  }
  if (state.m.size() != params.size()) throw std::invalid_argument("adamw_step: optimizer state does not match params");

  for (const auto& p : params) {
    if (!p.value.has_grad()) continue;
    for (double g : p.value.grad()) {
      if (!std::isfinite(g)) throw NonFiniteGradient("non-finite gradient in parameter '" + p.name + "'");
    }
  }

  double clip_scale = 1.0;
  if (cfg.grad_clip > 0.0) {
    const double norm = grad_norm(params);
    if (norm > cfg.grad_clip) clip_scale = cfg.grad_clip / norm;
  }

  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(cfg.beta1, t);
  const double bias2 = 1.0 - std::pow(cfg.beta2, t);
  const double decay = 1.0 - lr * cfg.weight_decay;

  for (std::size_t i = 0; i < params.size(); ++i) {
    auto w = params[i].value.mutable_data();
    auto& m = state.m[i];
    auto& v = state.v[i];
    const bool has = params[i].value.has_grad();
    auto g = has ? params[i].value.grad() : std::span<const double>();
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double gj = has ? g[j] * clip_scale : 0.0;
      m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * gj;
      v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * gj * gj;
      const double m_hat = m[j] / bias1;
      const double v_hat = v[j] / bias2;
      w[j] = w[j] * decay - lr * m_hat / (std::sqrt(v_hat) + cfg.adam_eps);
    }
  }
}

}  // namespace ltm
