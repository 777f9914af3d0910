#pragma once

#include <functional>
#include <stdexcept>

namespace ltm {

class QuadratureError : public std::runtime_error {
 public:
  QuadratureError(const std::string& what, double achieved) : std::runtime_error(what), achieved_(achieved) {}
  double achieved_accuracy() const { return achieved_; }

 private:
  double achieved_;
};

struct QuadratureResult {
  double value = 0.0;
  double error = 0.0;
  int evaluations = 0;
};

/// Globally adaptive Gauss-Kronrod (7/15) integration on [a, b] to absolute tolerance `tol`.
QuadratureResult integrate(const std::function<double(double)>& f, double a, double b, double tol,
                           int max_intervals = 4000);

/// CRPS by direct integration of (F(x) - 1{x >= y})^2.
///
/// The integral is split at y and integrated over [lo, hi]; each tail is then extended
/// in doubling steps until a step contributes less than tol / 10. Throws
/// QuadratureError carrying the achieved accuracy when the tolerance cannot be met.
double crps_quadrature(double y, const std::function<double(double)>& cdf, double lo, double hi, double tol);

}  // namespace ltm
