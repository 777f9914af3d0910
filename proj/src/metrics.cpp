#include "ltm/metrics.hpp"

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/digamma.hpp>
#include <cmath>
#include <numbers>

namespace ltm {

namespace {

void check_domain(double sigma, double nu) {
  if (!(sigma > 0.0)) throw DomainError("Student's-t scale must be positive, got " + std::to_string(sigma));
  if (!(nu > 0.0)) throw DomainError("Student's-t degrees of freedom must be positive, got " + std::to_string(nu));
}

double log_beta(double a, double b) { return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b); }

void check_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(what) + ": shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()) +
                     " differ");
  }
}

}  // namespace

double studentt_logpdf(double y, double mu, double sigma, double nu) {
  check_domain(sigma, nu);
  const double z = (y - mu) / sigma;
  return std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) - 0.5 * std::log(nu * std::numbers::pi) -
         std::log(sigma) - 0.5 * (nu + 1.0) * std::log1p(z * z / nu);
}

double studentt_cdf(double z, double nu) { return boost::math::cdf(boost::math::students_t_distribution<>(nu), z); }

double studentt_pdf(double z, double nu) { return boost::math::pdf(boost::math::students_t_distribution<>(nu), z); }

double crps_studentt(double y, double mu, double sigma, double nu) {
  check_domain(sigma, nu);
  if (!(nu > 1.0)) throw DomainError("CRPS is infinite for nu <= 1 (got " + std::to_string(nu) + ")");
  const double z = (y - mu) / sigma;
  const double cdf = studentt_cdf(z, nu);
  const double pdf = studentt_pdf(z, nu);
  const double spread =
      2.0 * std::sqrt(nu) / (nu - 1.0) * std::exp(log_beta(0.5, nu - 0.5) - 2.0 * log_beta(0.5, 0.5 * nu));
  const double standard = z * (2.0 * cdf - 1.0) + 2.0 * pdf * (nu + z * z) / (nu - 1.0) - spread;
  return sigma * standard;
}

double crps_gaussian(double y, double mu, double sigma) {
  if (!(sigma > 0.0)) throw DomainError("Gaussian scale must be positive");
  const double z = (y - mu) / sigma;
  boost::math::normal_distribution<> n;
  return sigma * (z * (2.0 * boost::math::cdf(n, z) - 1.0) + 2.0 * boost::math::pdf(n, z) -
                  1.0 / std::sqrt(std::numbers::pi));
}

Tensor nll_loss(Tape& tape, const StudentTParams& params, const Tensor& targets, const Tensor& mask) {
  check_same_shape(params.mu, targets, "nll_loss");
  check_same_shape(params.sigma, targets, "nll_loss");
  check_same_shape(params.nu, targets, "nll_loss");
  check_same_shape(mask, targets, "nll_loss");
  const auto mu = params.mu.data();
  const auto sigma = params.sigma.data();
  const auto nu = params.nu.data();
  const auto y = targets.data();
  const auto m = mask.data();

  std::size_t count = 0;
  for (double v : m) count += v != 0.0;
  if (count == 0) throw ContractError("nll_loss: every position is masked");

  double total = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (m[i] != 0.0) total -= studentt_logpdf(y[i], mu[i], sigma[i], nu[i]);
  }
  const double n = static_cast<double>(count);
  Tensor out({1}, {total / n});
  if (!tape.wants({&params.mu, &params.sigma, &params.nu})) {
    tape.adopt(out);
    return out;
  }
  tape.record(out, [out_ref = out, p = params, targets, mask, n]() mutable {
    if (!out_ref.has_grad()) return;
    const double g = out_ref.grad()[0] / n;
    const auto mu = p.mu.data();
    const auto sigma = p.sigma.data();
    const auto nu = p.nu.data();
    const auto y = targets.data();
    const auto m = mask.data();
    auto gmu = p.mu.requires_grad() ? p.mu.mutable_grad() : std::span<double>();
    auto gsigma = p.sigma.requires_grad() ? p.sigma.mutable_grad() : std::span<double>();
    auto gnu = p.nu.requires_grad() ? p.nu.mutable_grad() : std::span<double>();
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (m[i] == 0.0) continue;
      const double z = (y[i] - mu[i]) / sigma[i];
      const double z2 = z * z;
      const double denom = nu[i] + z2;
      if (!gmu.empty()) gmu[i] += g * (-(nu[i] + 1.0) * z / (sigma[i] * denom));
      if (!gsigma.empty()) gsigma[i] += g * (1.0 / sigma[i] - (nu[i] + 1.0) * z2 / (sigma[i] * denom));
      if (!gnu.empty()) {
        const double d = -0.5 * boost::math::digamma(0.5 * (nu[i] + 1.0)) + 0.5 * boost::math::digamma(0.5 * nu[i]) +
                         0.5 / nu[i] + 0.5 * std::log1p(z2 / nu[i]) - 0.5 * (nu[i] + 1.0) * z2 / (nu[i] * denom);
        gnu[i] += g * d;
      }
    }
  });
  return out;
}

double point_mse(const StudentTParams& params, const Tensor& targets, const Tensor& mask) {
  check_same_shape(params.mu, targets, "point_mse");
  check_same_shape(mask, targets, "point_mse");
  const auto mu = params.mu.data();
  const auto y = targets.data();
  const auto m = mask.data();
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (m[i] == 0.0) continue;
    total += (mu[i] - y[i]) * (mu[i] - y[i]);
    ++count;
  }
  return count ? total / static_cast<double>(count) : 0.0;
}

void ScoreAccumulator::add(const StudentTParams& params, const Tensor& targets, const Tensor& mask) {
  check_same_shape(params.mu, targets, "score");
  check_same_shape(mask, targets, "score");
  const auto mu = params.mu.data();
  const auto sigma = params.sigma.data();
  const auto nu = params.nu.data();
  const auto y = targets.data();
  const auto m = mask.data();
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (m[i] == 0.0) continue;
    sq_err_ += (mu[i] - y[i]) * (mu[i] - y[i]);
    crps_ += crps_studentt(y[i], mu[i], sigma[i], nu[i]);
    nll_ -= studentt_logpdf(y[i], mu[i], sigma[i], nu[i]);
    ++count_;
  }
}

ScoreTriple ScoreAccumulator::mean() const {
  if (count_ == 0) throw ContractError("no scored positions");
  const double n = static_cast<double>(count_);
  return {sq_err_ / n, crps_ / n, nll_ / n};
}

}  // namespace ltm
