#pragma once

#include <span>
#include <stdexcept>
#include <vector>

#include "ltm/model.hpp"
#include "ltm/schedule.hpp"

namespace ltm {

class NonFiniteGradient : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct AdamWState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::int64_t step = 0;
};

/// One decoupled-weight-decay Adam update with bias correction.
///
/// Parameters without a gradient count as zero-gradient. A NaN or infinite gradient
/// throws NonFiniteGradient naming the tensor, before any parameter is touched.
void adamw_step(std::span<NamedTensor> params, AdamWState& state, double lr, const TrainConfig& cfg);

/// Global L2 norm over all parameter gradients.
double grad_norm(std::span<const NamedTensor> params);

}  // namespace ltm
