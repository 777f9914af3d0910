#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "ltm/scaling.hpp"

namespace ltm {

std::vector<FrontierPoint> compute_frontier(const std::vector<std::vector<std::pair<Compute, double>>>& runs) {
  std::vector<FrontierPoint> all;
  for (std::size_t r = 0; r < runs.size(); ++r) {
    for (const auto& [c, loss] : runs[r]) {
      if (std::isnan(loss)) continue;
      all.push_back({c, loss, r});
    }
  }
  if (all.empty()) throw std::invalid_argument("compute_frontier: no points");
  std::stable_sort(all.begin(), all.end(), [](const FrontierPoint& a, const FrontierPoint& b) {
    if (a.compute != b.compute) return a.compute < b.compute;
    return a.loss < b.loss;
  });
  std::vector<FrontierPoint> out;
  FrontierPoint best{0, std::numeric_limits<double>::infinity(), 0};
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (all[i].loss < best.loss) best = {all[i].compute, all[i].loss, all[i].run};
    const bool last_at_compute = i + 1 == all.size() || all[i + 1].compute != all[i].compute;
    if (last_at_compute) out.push_back({all[i].compute, best.loss, best.run});
  }
  return out;
}

Metric parse_metric(const std::string& name) {
  if (name == "mse") return Metric::kMse;
  if (name == "crps") return Metric::kCrps;
  if (name == "nll") return Metric::kNll;
  if (name == "loglik") return Metric::kLogLik;
  throw std::invalid_argument("unknown metric '" + name + "' (expected mse, crps, nll or loglik)");
}

std::string to_string(Metric m) {
  switch (m) {
    case Metric::kMse:
      return "mse";
    case Metric::kCrps:
      return "crps";
    case Metric::kNll:
      return "nll";
    case Metric::kLogLik:
      return "loglik";
  }
  return "unknown";
}

double metric_value(const RunLogEntry& e, Metric m) {
  switch (m) {
    case Metric::kMse:
      return e.test_mse;
    case Metric::kCrps:
      return e.test_crps;
    case Metric::kNll:
      return e.test_nll;
    case Metric::kLogLik:
      return e.test_loglik();
  }
  return std::nan("");
}

double min_loss_per_run(std::span<const RunLogEntry> log, Metric m) {
  if (log.empty()) throw std::invalid_argument("min_loss_per_run: empty run log");
  double best = std::numeric_limits<double>::infinity();
  for (const auto& e : log) {
    const double v = metric_value(e, m);
    if (v < best) best = v;
  }
  return best;
}

}  // namespace ltm
