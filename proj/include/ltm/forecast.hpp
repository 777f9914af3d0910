#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ltm/model.hpp"

namespace ltm {

struct Forecast {
  /// trajectories[s][t]: sample s at horizon step t.
  std::vector<std::vector<double>> trajectories;
  std::vector<double> mean;
  /// 16th and 84th percentiles across samples (the 1-sigma band).
  std::vector<double> lower;
  std::vector<double> upper;
};

/// Linear-interpolated percentile (q in [0, 1]) of an unsorted sample.
double percentile(std::vector<double> values, double q);

/// Autoregressive sampling from the per-step Student's-t predictive.
///
/// Each trajectory appends its own draw and slides the window so the model always
/// sees the latest seq_len values; a context shorter than seq_len is left-padded
/// with zeros. horizon == 0 returns an empty forecast; horizon < 0 throws.
Forecast forecast_rollout(const Model& model, std::span<const double> context, int horizon, int n_samples,
                          std::uint64_t seed);

}  // namespace ltm
