#pragma once

#include <stdexcept>

#include "ltm/model.hpp"

namespace ltm {

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Location-scale Student's-t log density.
double studentt_logpdf(double y, double mu, double sigma, double nu);

/// CDF and density of the standard (mu = 0, sigma = 1) Student's-t.
double studentt_cdf(double z, double nu);
double studentt_pdf(double z, double nu);

/// Closed-form CRPS of a location-scale Student's-t forecast at observation y:
///   sigma * [ z (2F(z) - 1) + 2 f(z) (nu + z^2) / (nu - 1)
///             - 2 sqrt(nu) B(1/2, nu - 1/2) / ((nu - 1) B(1/2, nu/2)^2) ],  z = (y - mu) / sigma.
/// Requires nu > 1.
double crps_studentt(double y, double mu, double sigma, double nu);

/// sigma * [ z (2 Phi(z) - 1) + 2 phi(z) - 1/sqrt(pi) ].
double crps_gaussian(double y, double mu, double sigma);

/// Mean negative log-likelihood over positions where mask != 0, as a taped scalar.
/// Throws ContractError when every position is masked.
Tensor nll_loss(Tape& tape, const StudentTParams& params, const Tensor& targets, const Tensor& mask);

/// Mean of (mu - y)^2 over unmasked positions (mu is the predictive mean since nu > 1).
double point_mse(const StudentTParams& params, const Tensor& targets, const Tensor& mask);

struct ScoreTriple {
  double mse = 0.0;
  double crps = 0.0;
  double nll = 0.0;

  /// The log-likelihood value used for fitting: NLL shifted by +2 to keep it positive.
  double reported_loglik() const { return nll + 2.0; }
};

/// Flat mean of per-position scores across every batch it sees.
class ScoreAccumulator {
 public:
  void add(const StudentTParams& params, const Tensor& targets, const Tensor& mask);
  std::size_t count() const { return count_; }
  ScoreTriple mean() const;

 private:
  double sq_err_ = 0.0;
  double crps_ = 0.0;
  double nll_ = 0.0;
  std::size_t count_ = 0;
};

}  // namespace ltm
