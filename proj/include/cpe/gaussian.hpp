#pragma once

#include <Eigen/Dense>

#include "cpe/numerics.hpp"

namespace cpe {

/// Dense multivariate normal with a cached lower Cholesky factor.
/// Immutable after construction; the factor is computed once via
/// from_moments (inputs are symmetrized, one 1e-10 jitter retry, then a
/// hard error -- never silent extra regularization).
struct Gaussian {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  Eigen::MatrixXd chol;  // lower triangular, chol * chol^T == cov

  int dim() const { return static_cast<int>(mean.size()); }

  static Gaussian from_moments(Eigen::VectorXd mean, Eigen::MatrixXd cov);

  /// Isotropic N(mean_value * 1, var * I) in `dim` dimensions.
  static Gaussian isotropic(int dim, double mean_value, double var);
};

/// q(theta) = theta^T A theta + b^T theta + c with A symmetric.
struct QuadraticForm {
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  double c = 0.0;

  int dim() const { return static_cast<int>(b.size()); }
  double operator()(const Eigen::VectorXd& theta) const;

  QuadraticForm& operator+=(const QuadraticForm& other);
  QuadraticForm operator-() const;

  static QuadraticForm zero(int dim);
};

double log_density(const Gaussian& g, const Eigen::VectorXd& x);

/// n i.i.d. rows mean + chol * z. Deterministic given the stream state.
Eigen::MatrixXd sample(const Gaussian& g, RandomStream& rng, int n);

/// KL(q || p), closed form. Clamped at zero from below by construction of
/// the formula; tiny negative round-off (> -1e-12) is left untouched.
double kl_divergence(const Gaussian& q, const Gaussian& p);

/// Conjugate update for y = design * theta + noise, likelihood raised to
/// `lambda`:
///   precision = prior.cov^-1 + (lambda / noise_var) design^T design
///   mean      = precision^-1 (prior.cov^-1 prior.mean
///                             + (lambda / noise_var) design^T targets)
/// lambda == 0 returns the prior exactly.
Gaussian linear_gaussian_posterior(const Gaussian& prior, const Eigen::MatrixXd& design,
                                   const Eigen::VectorXd& targets, double noise_var,
                                   double lambda);

struct QuadMoments {
  double mean = 0.0;
  double variance = 0.0;
};

/// E[q(theta)] and V[q(theta)] for theta ~ g:
///   mean = tr(A Sigma) + mu^T A mu + b^T mu + c
///   var  = 2 tr((A Sigma)^2) + 4 mu^T A Sigma A mu + 4 mu^T A Sigma b
///          + b^T Sigma b
QuadMoments quadratic_form_moments(const Gaussian& g, const QuadraticForm& q);

/// Cov(q1(theta), q2(theta)) for theta ~ g:
///   2 tr(A1 Sigma A2 Sigma) + 4 mu^T A1 Sigma A2 mu
///   + 2 mu^T A1 Sigma b2 + 2 mu^T A2 Sigma b1 + b1^T Sigma b2
double quadratic_form_covariance(const Gaussian& g, const QuadraticForm& q1,
                                 const QuadraticForm& q2);

}  // namespace cpe
