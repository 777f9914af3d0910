#include "ltm/forecast.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ltm/rng.hpp"

namespace ltm {

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("percentile of an empty sample");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + (values[hi] - values[lo]) * frac;
}

Forecast forecast_rollout(const Model& model, std::span<const double> context, int horizon, int n_samples,
                          std::uint64_t seed) {
  if (horizon < 0) throw std::invalid_argument("forecast horizon must be >= 0");
  if (n_samples < 1) throw std::invalid_argument("forecast needs at least one sample");
  if (context.empty()) throw std::invalid_argument("forecast context must hold at least one value");

  Forecast result;
  if (horizon == 0) return result;

  const auto len = static_cast<std::size_t>(model.config().seq_len);
  const auto samples = static_cast<std::size_t>(n_samples);
  const auto steps = static_cast<std::size_t>(horizon);

  // Each row holds the full history of one trajectory; the window is its last `len` values.
  std::vector<std::vector<double>> history(samples);
  for (auto& h : history) {
    if (context.size() < len) h.assign(len - context.size(), 0.0);
    h.insert(h.end(), context.begin(), context.end());
  }
  result.trajectories.assign(samples, std::vector<double>(steps));

  Rng rng(seed);
  std::vector<double> window(samples * len);
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t s = 0; s < samples; ++s) {
      std::copy(history[s].end() - static_cast<std::ptrdiff_t>(len), history[s].end(), window.begin() + s * len);
    }
    Tape tape(Tape::Mode::kInference);
    auto params = model.forward(tape, Tensor({samples, len}, window));
    for (std::size_t s = 0; s < samples; ++s) {
      const std::size_t last = s * len + len - 1;
      const double draw =
          params.mu.data()[last] + params.sigma.data()[last] * rng.student_t(params.nu.data()[last]);
      history[s].push_back(draw);
      result.trajectories[s][t] = draw;
    }
  }

  result.mean.resize(steps);
  result.lower.resize(steps);
  result.upper.resize(steps);
  std::vector<double> column(samples);
  for (std::size_t t = 0; t < steps; ++t) {
    double total = 0.0;
    for (std::size_t s = 0; s < samples; ++s) {
      column[s] = result.trajectories[s][t];
      total += column[s];
    }
    result.mean[t] = total / static_cast<double>(samples);
    result.lower[t] = percentile(column, 0.16);
    result.upper[t] = percentile(column, 0.84);
  }
  return result;
}

}  // namespace ltm
