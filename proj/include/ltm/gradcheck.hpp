#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ltm/tensor.hpp"

namespace ltm {

/// Builds a scalar loss from the current parameter values on the given tape.
using LossFn = std::function<Tensor(Tape&)>;

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t worst_tensor = 0;
  std::size_t worst_index = 0;
};

/// Compares reverse-mode gradients against central differences with step `h`.
///
/// The per-element error is |analytic - central| / (|analytic| + |central| + 1e-12).
/// `max_per_tensor` > 0 checks an evenly strided subset of each tensor's elements.
/// Parameter values are restored before returning.
GradCheckReport finite_diff_check(const LossFn& loss, std::vector<Tensor> params, double h,
                                  std::size_t max_per_tensor = 0);

/// Same metric, but each element keeps its smallest error over several step sizes.
///
/// In ReLU networks a kink within one step, or a gradient below the rounding floor of
/// another, inflates a single-step error without any backward rule being wrong. A wrong
/// rule disagrees at every step, so the minimum still exposes it.
GradCheckReport finite_diff_check_multiscale(const LossFn& loss, std::vector<Tensor> params,
                                             std::span<const double> steps, std::size_t max_per_tensor = 0);

}  // namespace ltm
