#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ltm/runlog.hpp"

namespace ltm {

struct FitPoint {
  double x = 0.0;  // scaled quantity A (parameters, compute, data points)
  double y = 0.0;  // loss L
  double weight = 1.0;
};

/// ln L = -B0 ln A + B0 ln A0, fitted by least squares in (ln A, ln L).
struct PowerLawFit {
  double B0 = 0.0;
  double log10_A0 = 0.0;
  /// B0 * ln A0; kept so a flat (B0 = 0) fit still predicts.
  double ln_intercept = 0.0;
  double rss = 0.0;
  std::size_t n_points = 0;

  double predict(double A) const;
};

/// Requires >= 2 points with distinct A; every A and L must be positive.
PowerLawFit fit_power_law(std::span<const FitPoint> points);

enum class BreakStatus { kBreak, kNoBreak, kFallbackSingle };
std::string to_string(BreakStatus s);

inline constexpr std::size_t kMinBrokenFitPoints = 6;
inline constexpr double kBreakImprovement = 0.05;

struct BrokenPowerLawFit {
  BreakStatus status = BreakStatus::kFallbackSingle;
  double A_break = 0.0;
  PowerLawFit pre;
  PowerLawFit post;
  double rss = 0.0;
  PowerLawFit single;
  /// (rss_single - rss_broken) / rss_single, or 0 when the single fit is already exact.
  double improvement = 0.0;

  /// Post-break segment when a break is accepted, otherwise the single fit.
  const PowerLawFit& headline() const { return status == BreakStatus::kBreak ? post : single; }
};

/// Two log-log segments joined continuously at one of the observed abscissae (the two
/// smallest and two largest are never breaks). Picks the break with minimum total RSS.
/// Fewer than six points returns the single fit flagged kFallbackSingle.
BrokenPowerLawFit fit_broken_power_law(std::span<const FitPoint> points);

/// lr*(N) = a N^-b + c.
struct OffsetPowerLawFit {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
  double objective = 0.0;  // sum of squared log residuals
  int iterations = 0;

  double predict(double n_params) const;
};

class FitConvergenceError : public std::runtime_error {
 public:
  FitConvergenceError(const std::string& what, OffsetPowerLawFit best) : std::runtime_error(what), best_(best) {}
  const OffsetPowerLawFit& best_so_far() const { return best_; }

 private:
  OffsetPowerLawFit best_;
};

/// Golden-section search over c with an inner log-linear fit for (a, b), then a damped
/// Gauss-Newton polish of all three on the squared log residuals.
/// points: (N_p, best lr_max); needs >= 4, all positive.
OffsetPowerLawFit fit_optimal_lr(std::span<const std::pair<double, double>> points);

struct FrontierPoint {
  Compute compute = 0;
  double loss = 0.0;
  std::size_t run = 0;  // index of the run that attains the minimum
};

/// Running minimum of loss over all runs' (compute, loss) pairs, one point per distinct compute.
std::vector<FrontierPoint> compute_frontier(const std::vector<std::vector<std::pair<Compute, double>>>& runs);

enum class Metric { kMse, kCrps, kNll, kLogLik };

Metric parse_metric(const std::string& name);
std::string to_string(Metric m);
double metric_value(const RunLogEntry& entry, Metric m);

/// Minimum of `m` across a run's evaluations. kLogLik applies the +2 offset.
double min_loss_per_run(std::span<const RunLogEntry> log, Metric m);

}  // namespace ltm
