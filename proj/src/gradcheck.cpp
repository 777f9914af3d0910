#include "ltm/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ltm {

namespace {

std::vector<std::vector<double>> analytic_gradients(const LossFn& loss, std::vector<Tensor>& params) {
  for (auto& p : params) {
    p.set_requires_grad(true);
    p.zero_grad();
  }
  std::vector<std::vector<double>> analytic;
  Tape tape;
  Tensor value = loss(tape);
  backward(value, tape);
  for (auto& p : params) {
    if (p.has_grad()) {
      analytic.emplace_back(p.grad().begin(), p.grad().end());
    } else {
      analytic.emplace_back(p.size(), 0.0);
    }
    p.zero_grad();
  }
  return analytic;
}

GradCheckReport check(const LossFn& loss, std::vector<Tensor> params, std::span<const double> steps,
                      std::size_t max_per_tensor) {
  if (steps.empty()) throw ContractError("finite_diff_check: no step sizes given");
  for (double h : steps) {
    if (!(h > 0.0)) throw ContractError("finite_diff_check: step h must be positive");
  }
  const auto analytic = analytic_gradients(loss, params);

  auto eval = [&loss] {
    Tape tape(Tape::Mode::kInference);
    return loss(tape).item();
  };

  GradCheckReport report;
  for (std::size_t t = 0; t < params.size(); ++t) {
    auto values = params[t].mutable_data();
    std::size_t stride = 1;
    if (max_per_tensor > 0 && values.size() > max_per_tensor) {
      stride = (values.size() + max_per_tensor - 1) / max_per_tensor;
    }
    for (std::size_t i = 0; i < values.size(); i += stride) {
      const double saved = values[i];
      const double a = analytic[t][i];
      double err = std::numeric_limits<double>::infinity();
      for (double h : steps) {
        values[i] = saved + h;
        const double up = eval();
        values[i] = saved - h;
        const double down = eval();
        values[i] = saved;
        const double central = (up - down) / (2.0 * h);
        const double e = std::abs(a - central) / (std::abs(a) + std::abs(central) + 1e-12);
        if (!std::isnan(e)) err = std::min(err, e);
      }
      ++report.checked;
      if (err > report.max_rel_error) {
        report.max_rel_error = err;
        report.worst_tensor = t;
        report.worst_index = i;
      }
    }
  }
  return report;
}

}  // namespace

GradCheckReport finite_diff_check(const LossFn& loss, std::vector<Tensor> params, double h,
                                  std::size_t max_per_tensor) {
  const double steps[] = {h};
  return check(loss, std::move(params), steps, max_per_tensor);
}

GradCheckReport finite_diff_check_multiscale(const LossFn& loss, std::vector<Tensor> params,
                                             std::span<const double> steps, std::size_t max_per_tensor) {
  return check(loss, std::move(params), steps, max_per_tensor);
}

}  // namespace ltm
