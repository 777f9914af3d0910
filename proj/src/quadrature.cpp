#include "ltm/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <string>

namespace ltm {

namespace {

// 15-point Kronrod nodes/weights with the embedded 7-point Gauss rule.
constexpr double kNodes[8] = {0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
                              0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
                              0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
                              0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr double kKronrod[8] = {0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
                                0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
                                0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
                                0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr double kGauss[4] = {0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
                              0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Piece {
  double a;
  double b;
  double value;
  double error;
  bool operator<(const Piece& o) const { return error < o.error; }
};

Piece gk15(const std::function<double(double)>& f, double a, double b) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  const double fc = f(c);
  double kronrod = fc * kKronrod[7];
  double gauss = fc * kGauss[3];
  for (int i = 0; i < 7; ++i) {
    const double dx = h * kNodes[i];
    const double pair = f(c - dx) + f(c + dx);
    kronrod += kKronrod[i] * pair;
    if (i % 2 == 1) gauss += kGauss[i / 2] * pair;
  }
  return {a, b, kronrod * h, std::abs((kronrod - gauss) * h)};
}

}  // namespace

QuadratureResult integrate(const std::function<double(double)>& f, double a, double b, double tol,
                           int max_intervals) {
  if (!(tol > 0.0)) throw std::invalid_argument("integrate: tolerance must be positive");
  QuadratureResult result;
  if (a == b) return result;
  std::priority_queue<Piece> pieces;
  Piece first = gk15(f, a, b);
  result.evaluations = 15;
  double value = first.value;
  double error = first.error;
  pieces.push(first);
  while (error > tol && static_cast<int>(pieces.size()) < max_intervals) {
    Piece worst = pieces.top();
    pieces.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    if (mid <= worst.a || mid >= worst.b) {
      // Interval can no longer be bisected in floating point.
      pieces.push(worst);
      break;
    }
    Piece left = gk15(f, worst.a, mid);
    Piece right = gk15(f, mid, worst.b);
    result.evaluations += 30;
    value += left.value + right.value - worst.value;
    error += left.error + right.error - worst.error;
    pieces.push(left);
    pieces.push(right);
  }
  // Re-sum to shed the drift from incremental updates.
  value = 0.0;
  error = 0.0;
  while (!pieces.empty()) {
    value += pieces.top().value;
    error += pieces.top().error;
    pieces.pop();
  }
  result.value = value;
  result.error = error;
  if (error > tol) {
    throw QuadratureError("integration did not reach tolerance " + std::to_string(tol) + " (achieved " +
                              std::to_string(error) + ")",
                          error);
  }
  return result;
}

double crps_quadrature(double y, const std::function<double(double)>& cdf, double lo, double hi, double tol) {
  if (!(tol > 0.0)) throw std::invalid_argument("crps_quadrature: tolerance must be positive");
  if (!(lo < hi)) throw std::invalid_argument("crps_quadrature: need lo < hi");
  lo = std::min(lo, y);
  hi = std::max(hi, y);
  auto below = [&cdf](double x) {
    const double F = cdf(x);
    return F * F;
  };
  auto above = [&cdf](double x) {
    const double G = 1.0 - cdf(x);
    return G * G;
  };
  // Core pieces get half the tolerance; every tail piece gets tol / 40 and the
  // extension stops once a doubling step adds less than tol / 10.
  double error = 0.0;
  auto run = [&](const std::function<double(double)>& f, double a, double b, double piece_tol) {
    try {
      auto r = integrate(f, a, b, piece_tol);
      error += r.error;
      return r.value;
    } catch (const QuadratureError& e) {
      throw QuadratureError(std::string("CRPS quadrature: ") + e.what(), error + e.achieved_accuracy());
    }
  };
  double total = run(below, lo, y, tol / 4.0) + run(above, y, hi, tol / 4.0);

  auto extend = [&](const std::function<double(double)>& f, double edge, double direction) {
    double width = std::max(1.0, std::abs(edge));
    double last = 0.0;
    for (int step = 0; step < 200; ++step) {
      const double next = edge + direction * width;
      try {
        last = direction > 0 ? run(f, edge, next, tol / 40.0) : run(f, next, edge, tol / 40.0);
      } catch (const QuadratureError& e) {
        throw QuadratureError(e.what(), e.achieved_accuracy() + std::abs(last));
      }
      total += last;
      if (std::abs(last) < tol / 10.0) return;
      edge = next;
      width *= 2.0;
    }
    // The uncaptured tail is at least as large as the last doubling step.
    throw QuadratureError("CRPS tail did not converge", error + std::abs(last));
  };
  extend(below, lo, -1.0);
  extend(above, hi, +1.0);
  return total;
}

}  // namespace ltm
