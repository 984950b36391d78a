#pragma once

#include <functional>

#include "cpe/losses.hpp"

namespace cpe {

/// Empirical cumulant-generating function of the generalization gap of one
/// model theta: values[i] estimates (1/n) ln E_D[exp(lambda_i n (L - Lhat))]
/// over M resampled datasets of size n. All grid points share the same
/// resamples, so the estimated curve is exactly convex in lambda.
struct CgfEstimate {
  Eigen::VectorXd lambdas;
  Eigen::VectorXd values;
  Eigen::VectorXd std_errs;  // per-lambda jackknife over the resamples
  Eigen::VectorXd theta;
  int resamples = 0;
  int n = 0;
  bool truncated = false;  // a non-finite exponent was seen on the grid
};

CgfEstimate empirical_cgf(const ModelSpec& model, const DataGenSpec& spec,
                          const Eigen::VectorXd& theta, const Eigen::VectorXd& lambdas,
                          int M, int n, const QuadratureRule& quad, RandomStream& rng);

/// Empirical R function: values[i] estimates ln E_pi E_D[exp(lambda_i n Delta)]
/// with a double Monte Carlo (prior draws x dataset resamples). Standard
/// errors by jackknife over the prior-draw blocks.
struct REstimate {
  Eigen::VectorXd lambdas;
  Eigen::VectorXd values;
  Eigen::VectorXd std_errs;
  int prior_samples = 0;
  int resamples = 0;
  int n = 0;
  bool truncated = false;
};

REstimate empirical_r(const ModelSpec& model, const DataGenSpec& spec, int prior_samples,
                      const Eigen::VectorXd& lambdas, int M, int n,
                      const QuadratureRule& quad, RandomStream& rng);

/// One evaluation of the in-expectation PAC-Bayes bound
///   E_D E_rho[L] <= E_D E_rho[Lhat] + E_D[KL(rho|pi)]/(lambda n) + R(lambda)/(lambda n).
struct BoundReport {
  double lhs = 0.0;
  double train_term = 0.0;
  double kl_term = 0.0;
  double r_term = 0.0;
  double rhs = 0.0;
  double lambda = 0.0;
  double mc_slack = 0.0;  // 3 x combined std err of all four estimates
  bool holds = false;
};

using RhoBuilder = std::function<Gaussian(const Dataset&)>;

/// Every term estimated over M dataset resamples (losses and KL closed form
/// per dataset; the R term from empirical_r with the model prior as pi).
BoundReport alquier_expectation_bound(const ModelSpec& model, const DataGenSpec& spec,
                                      double lambda, const RhoBuilder& rho_builder, int M,
                                      int n, const QuadratureRule& quad, RandomStream& rng);

/// Closed-form minimizer of KL/(lambda n) + lambda V / 2:
/// sqrt(2 kl_expected / (n * avg_loss_variance)). All inputs must be > 0.
double optimal_lambda_variance(double kl_expected, int n, double avg_loss_variance);

struct IntersectionResult {
  double lambda = 0.0;
  double objective = 0.0;  // (kl + R(lambda)) / (lambda n) at the returned point
  bool boundary = false;   // no interior stationary point found in the grid
};

/// Minimize (kl + R(lambda)) / (lambda n) over a monotone-convex empirical R
/// grid (>= 20 points): root of R - lambda R' + kl with R' from
/// quadratic-exact 3-point differences, falling back to the grid argmin.
IntersectionResult lambda_intersection_search(const Eigen::VectorXd& lambdas,
                                              const Eigen::VectorXd& r_values,
                                              double kl_expected, int n);

/// Loss variance of model theta under the tilted distribution
/// q_lambda proportional to nu * exp(-lambda * loss), by self-normalized
/// importance sampling against nu, next to the plain variance under nu.
/// The comparison is reported, never asserted.
struct TiltedVariance {
  double v_tilted = 0.0;
  double v_plain = 0.0;
  double se_tilted = 0.0;
  double se_plain = 0.0;
  double ess = 0.0;            // effective sample size of the weights
  double fourth_cumulant = 0.0;  // of the loss under q_lambda (reported only)
  bool unreliable = false;     // ess < 50
};

TiltedVariance tilted_variance_check(const ModelSpec& model, const DataGenSpec& spec,
                                     const Eigen::VectorXd& theta, double lambda, int mc,
                                     RandomStream& rng);

/// E_pi[V_D(ln p(D|theta))]: Monte Carlo over prior draws and dataset
/// resamples, with the exact inner variance (= n * V_nu(loss)) per draw as a
/// cross-check.
struct PriorPredictiveVariance {
  double mc = 0.0;
  double closed_form = 0.0;
};

PriorPredictiveVariance prior_predictive_variance(const ModelSpec& model,
                                                  const DataGenSpec& spec, int prior_samples,
                                                  int M, int n, const QuadratureRule& quad,
                                                  RandomStream& rng);

/// Closed-form V_nu(-ln p(y|x,theta)) for a fixed theta (Gaussian y-moments
/// analytic, x-average by quadrature).
double loss_variance_under_nu(const ModelSpec& model, const DataGenSpec& spec,
                              const Eigen::VectorXd& theta, const QuadratureRule& quad);

/// Exact J curve of one model via the i.i.d. identity
/// J(lambda) = lambda L(theta) + ln E_nu[exp(-lambda loss)] (the y-integral
/// is a Gaussian-times-Gaussian closed form, x averaged by quadrature).
/// Serves as the independent oracle for empirical_cgf.
double cgf_exact(const ModelSpec& model, const DataGenSpec& spec,
                 const Eigen::VectorXd& theta, double lambda, const QuadratureRule& quad);

/// Minimum-norm least-squares fit of the model to the data (the MLE of the
/// Gaussian likelihood; minimum-norm when the basis is overparameterized).
Eigen::VectorXd min_norm_mle(const ModelSpec& model, const Dataset& data);

}  // namespace cpe
