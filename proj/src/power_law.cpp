#include "ltm/scaling.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>

#include "ltm/metrics.hpp"

namespace ltm {

namespace {

struct Line {
  double slope = 0.0;
  double intercept = 0.0;
};

Line weighted_line(std::span<const double> x, std::span<const double> y, std::span<const double> w) {
  double sw = 0.0;
  double sx = 0.0;
  double sy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sw += w[i];
    sx += w[i] * x[i];
    sy += w[i] * y[i];
  }
  const double xbar = sx / sw;
  const double ybar = sy / sw;
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += w[i] * (x[i] - xbar) * (x[i] - xbar);
    sxy += w[i] * (x[i] - xbar) * (y[i] - ybar);
  }
  if (!(sxx > 0.0)) throw DomainError("power-law fit needs at least two distinct abscissae");
  const double slope = sxy / sxx;
  return {slope, ybar - slope * xbar};
}

PowerLawFit from_line(const Line& line, double rss, std::size_t n) {
  PowerLawFit fit;
  fit.B0 = -line.slope;
  fit.ln_intercept = line.intercept;
  fit.log10_A0 = fit.B0 != 0.0 ? line.intercept / (fit.B0 * std::numbers::ln10) : std::nan("");
  fit.rss = rss;
  fit.n_points = n;
  return fit;
}

void to_log(std::span<const FitPoint> points, std::vector<double>& x, std::vector<double>& y, std::vector<double>& w) {
  for (const auto& p : points) {
    if (!(p.x > 0.0) || !(p.y > 0.0)) {
      throw DomainError("power-law fits need positive A and L (got A=" + std::to_string(p.x) +
                        ", L=" + std::to_string(p.y) + "); shift log-likelihoods by +2 first");
    }
    if (!(p.weight > 0.0)) throw DomainError("fit weights must be positive");
    x.push_back(std::log(p.x));
    y.push_back(std::log(p.y));
    w.push_back(p.weight);
  }
}

}  // namespace

double PowerLawFit::predict(double A) const { return std::exp(ln_intercept - B0 * std::log(A)); }

PowerLawFit fit_power_law(std::span<const FitPoint> points) {
  if (points.size() < 2) throw DomainError("power-law fit needs at least two points");
  std::vector<double> x, y, w;
  to_log(points, x, y, w);
  const Line line = weighted_line(x, y, w);
  double rss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - (line.intercept + line.slope * x[i]);
    rss += w[i] * r * r;
  }
  return from_line(line, rss, points.size());
}

std::string to_string(BreakStatus s) {
  switch (s) {
    case BreakStatus::kBreak:
      return "BREAK";
    case BreakStatus::kNoBreak:
      return "NO_BREAK";
    case BreakStatus::kFallbackSingle:
      return "FALLBACK_SINGLE";
  }
  return "UNKNOWN";
}

BrokenPowerLawFit fit_broken_power_law(std::span<const FitPoint> points) {
  BrokenPowerLawFit out;
  out.single = fit_power_law(points);
  out.rss = out.single.rss;
  if (points.size() < kMinBrokenFitPoints) {
    out.status = BreakStatus::kFallbackSingle;
    return out;
  }

  std::vector<FitPoint> sorted(points.begin(), points.end());
  std::stable_sort(sorted.begin(), sorted.end(), [](const FitPoint& a, const FitPoint& b) { return a.x < b.x; });
  std::vector<double> x, y, w;
  to_log(sorted, x, y, w);
  const std::size_t n = x.size();
  const double x_mid = 0.5 * (x.front() + x.back());

  double best_rss = INFINITY;
  std::size_t best_k = 0;
  Eigen::Vector3d best_coef = Eigen::Vector3d::Zero();
  for (std::size_t k = 2; k + 2 < n; ++k) {
    const double xb = x[k];
    if (xb == x[k - 1]) continue;
    Eigen::MatrixXd design(n, 3);
    Eigen::VectorXd rhs(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double sw = std::sqrt(w[i]);
      design(static_cast<Eigen::Index>(i), 0) = sw;
      design(static_cast<Eigen::Index>(i), 1) = sw * (x[i] - x_mid);
      design(static_cast<Eigen::Index>(i), 2) = sw * std::max(0.0, x[i] - xb);
      rhs(static_cast<Eigen::Index>(i)) = sw * y[i];
    }
    Eigen::Vector3d coef = design.colPivHouseholderQr().solve(rhs);
    const double rss = (design * coef - rhs).squaredNorm();
    if (rss < best_rss) {
      best_rss = rss;
      best_k = k;
      best_coef = coef;
    }
  }
  if (best_k == 0) {
    out.status = BreakStatus::kFallbackSingle;
    return out;
  }

  const double xb = x[best_k];
  const double pre_slope = best_coef(1);
  const double post_slope = best_coef(1) + best_coef(2);
  const double pre_intercept = best_coef(0) - best_coef(1) * x_mid;
  const double post_intercept = pre_intercept - best_coef(2) * xb;

  double pre_rss = 0.0;
  double post_rss = 0.0;
  std::size_t pre_n = 0;
  std::size_t post_n = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (x[i] <= xb) {
      const double r = y[i] - (pre_intercept + pre_slope * x[i]);
      pre_rss += w[i] * r * r;
      ++pre_n;
    }
    if (x[i] >= xb) {
      const double r = y[i] - (post_intercept + post_slope * x[i]);
      post_rss += w[i] * r * r;
      ++post_n;
    }
  }
  out.A_break = sorted[best_k].x;
  out.pre = from_line({pre_slope, pre_intercept}, pre_rss, pre_n);
  out.post = from_line({post_slope, post_intercept}, post_rss, post_n);
  out.rss = std::min(best_rss, out.single.rss);

  double scale = 0.0;
  for (std::size_t i = 0; i < n; ++i) scale += w[i] * y[i] * y[i];
  // A single fit that is already exact up to rounding cannot be improved on.
  const bool exact = out.single.rss <= 1e-24 * std::max(1.0, scale);
  out.improvement = exact ? 0.0 : (out.single.rss - out.rss) / out.single.rss;
  out.status = out.improvement >= kBreakImprovement ? BreakStatus::kBreak : BreakStatus::kNoBreak;
  return out;
}

double OffsetPowerLawFit::predict(double n_params) const { return a * std::pow(n_params, -b) + c; }

namespace {

double log_objective(std::span<const double> ln_n, std::span<const double> ln_lr, double ln_a, double b, double c) {
  double total = 0.0;
  for (std::size_t i = 0; i < ln_n.size(); ++i) {
    const double m = std::exp(ln_a - b * ln_n[i]) + c;
    const double r = ln_lr[i] - std::log(m);
    total += r * r;
  }
  return total;
}

// Inner step: with c fixed, ln(lr - c) = ln a - b ln N is linear.
OffsetPowerLawFit inner_fit(std::span<const double> ln_n, std::span<const double> lr, std::span<const double> ln_lr,
                            double c) {
  std::vector<double> y(lr.size());
  for (std::size_t i = 0; i < lr.size(); ++i) y[i] = std::log(lr[i] - c);
  std::vector<double> w(lr.size(), 1.0);
  const Line line = weighted_line(ln_n, y, w);
  OffsetPowerLawFit fit;
  fit.a = std::exp(line.intercept);
  fit.b = -line.slope;
  fit.c = c;
  fit.objective = log_objective(ln_n, ln_lr, line.intercept, fit.b, c);
  return fit;
}

}  // namespace

OffsetPowerLawFit fit_optimal_lr(std::span<const std::pair<double, double>> points) {
  if (points.size() < 4) throw DomainError("optimal-LR fit needs at least four points");
  std::vector<double> ln_n, lr, ln_lr;
  double lr_min = INFINITY;
  for (const auto& [n, l] : points) {
    if (!(n > 0.0) || !(l > 0.0)) throw DomainError("optimal-LR fit needs positive N_p and learning rates");
    ln_n.push_back(std::log(n));
    lr.push_back(l);
    ln_lr.push_back(std::log(l));
    lr_min = std::min(lr_min, l);
  }

  // Golden-section search for c on [0, lr_min).
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double lo = 0.0;
  double hi = lr_min * (1.0 - 1e-9);
  double x1 = hi - phi * (hi - lo);
  double x2 = lo + phi * (hi - lo);
  double f1 = inner_fit(ln_n, lr, ln_lr, x1).objective;
  double f2 = inner_fit(ln_n, lr, ln_lr, x2).objective;
  for (int it = 0; it < 300 && (hi - lo) > 1e-15 * lr_min; ++it) {
    if (f1 < f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - phi * (hi - lo);
      f1 = inner_fit(ln_n, lr, ln_lr, x1).objective;
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + phi * (hi - lo);
      f2 = inner_fit(ln_n, lr, ln_lr, x2).objective;
    }
  }
  OffsetPowerLawFit best = inner_fit(ln_n, lr, ln_lr, 0.5 * (lo + hi));
  if (auto at_zero = inner_fit(ln_n, lr, ln_lr, 0.0); at_zero.objective <= best.objective) best = at_zero;

  // Levenberg-Marquardt polish on (ln a, b, c) with c kept non-negative.
  Eigen::Vector3d theta(std::log(best.a), best.b, best.c);
  double objective = best.objective;
  double damping = 1e-3;
  const std::size_t n = ln_n.size();
  bool converged = objective == 0.0;
  int it = 0;
  for (; it < 200 && !converged; ++it) {
    Eigen::MatrixXd jac(n, 3);
    Eigen::VectorXd res(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double power = std::exp(theta(0) - theta(1) * ln_n[i]);
      const double m = power + theta(2);
      const auto r = static_cast<Eigen::Index>(i);
      res(r) = ln_lr[i] - std::log(m);
      jac(r, 0) = -power / m;
      jac(r, 1) = power * ln_n[i] / m;
      jac(r, 2) = -1.0 / m;
    }
    const Eigen::Matrix3d jtj = jac.transpose() * jac;
    const Eigen::Vector3d jtr = jac.transpose() * res;
    bool improved = false;
    for (int tries = 0; tries < 30; ++tries) {
      Eigen::Matrix3d lhs = jtj;
      lhs.diagonal() += damping * jtj.diagonal().cwiseMax(1e-30);
      Eigen::Vector3d step = lhs.ldlt().solve(-jtr);
      Eigen::Vector3d candidate = theta + step;
      candidate(2) = std::max(candidate(2), 0.0);
      const double value = log_objective(ln_n, ln_lr, candidate(0), candidate(1), candidate(2));
      if (std::isfinite(value) && value <= objective) {
        const double change = objective - value;
        theta = candidate;
        objective = value;
        damping = std::max(damping * 0.3, 1e-12);
        improved = true;
        if (change <= 1e-15 * std::max(objective, 1e-300) || objective < 1e-28 || step.norm() < 1e-15) {
          converged = true;
        }
        break;
      }
      damping *= 10.0;
    }
    if (!improved) converged = true;  // no descent direction left: stationary point
  }

  OffsetPowerLawFit fit;
  fit.a = std::exp(theta(0));
  fit.b = theta(1);
  fit.c = theta(2);
  fit.objective = objective;
  fit.iterations = it;
  if (!converged) throw FitConvergenceError("optimal-LR fit did not converge in 200 iterations", fit);
  if (!(fit.a > 0.0) || !(fit.b > 0.0)) {
    throw FitConvergenceError("optimal-LR fit left the a > 0, b > 0 region", fit);
  }
  return fit;
}

}  // namespace ltm
