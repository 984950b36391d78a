#pragma once

#include "cpe/data.hpp"
#include "cpe/gaussian.hpp"
#include "cpe/numerics.hpp"
#include "cpe/tempering.hpp"

namespace cpe {

/// One loss evaluation of a posterior. Closed-form entries carry zero
/// standard error. Both the 1/n-normalized and the sum convention of the
/// train loss are reported: the gradient identities are exact in the sum
/// form while the normalized form is the usual reporting convention.
struct LossReport {
  double gibbs_test = 0.0;        // G(rho) in nats per sample
  double gibbs_train_norm = 0.0;  // (1/n) E_rho[-ln p(D|theta)]
  double gibbs_train_sum = 0.0;   // E_rho[-ln p(D|theta)]
  double bayes_test = 0.0;        // B(rho)
  double se_gibbs_test = 0.0;
  double se_gibbs_train = 0.0;
  double se_bayes_test = 0.0;
};

/// theta -> -ln p(D | theta), a quadratic in theta.
QuadraticForm nll_sum_quadratic(const ModelSpec& model, const Dataset& data);

/// theta -> n * L_DA(D, theta): the data-augmentation pseudo negative
/// log-likelihood in sum form, enumerating the TransformSet exactly.
QuadraticForm da_nll_sum_quadratic(const ModelSpec& model, const Dataset& data,
                                   const TransformSet& transforms);

/// theta -> L(theta) = E_nu[-ln p(y|x,theta)]. The y-expectation is analytic;
/// the x-average over Uniform(-1,1) is taken by the quadrature rule, node by
/// node, on the quadratic's coefficients.
QuadraticForm expected_loss_quadratic(const ModelSpec& model, const DataGenSpec& spec,
                                      const QuadratureRule& quad);

/// The sum-form pseudo NLL the posterior itself was built from (standard or
/// data-augmented). This is the c(theta) of every tempering-gradient
/// identity for likelihood-like exponents.
QuadraticForm posterior_nll_sum_quadratic(const TemperedPosterior& post);

/// theta -> ln p(theta) of the model prior (a quadratic; constants kept).
QuadraticForm log_prior_quadratic(const ModelSpec& model);

double expected_log_loss(const ModelSpec& model, const DataGenSpec& spec,
                         const Eigen::VectorXd& theta, const QuadratureRule& quad);

/// (1/n) sum of Gaussian negative log densities of the residuals. Rejects
/// empty datasets (the sum form of the same quantity is 0 at n = 0).
double empirical_log_loss(const ModelSpec& model, const Dataset& data,
                          const Eigen::VectorXd& theta);

struct GibbsLosses {
  double test = 0.0;        // G(rho)
  double train_norm = 0.0;  // (1/n) form; 0 for an empty dataset
  double train_sum = 0.0;   // sum form
};

/// Closed-form Gibbs losses: both are expectations of quadratics under the
/// posterior Gaussian, no Monte Carlo error.
GibbsLosses gibbs_losses(const TemperedPosterior& post, const DataGenSpec& spec,
                         const QuadratureRule& quad);

/// B(rho) with the posterior predictive N(mu . phi(x), sigma_m^2 + phi' Sigma phi)
/// and the analytic inner y-expectation, x-averaged by quadrature.
double bayes_loss(const TemperedPosterior& post, const DataGenSpec& spec,
                  const QuadratureRule& quad);

/// (1/n) sum_i sum_t w_t [-ln p(y_i | t(x_i), theta)], enumerated exactly.
double da_empirical_loss(const ModelSpec& model, const Dataset& data,
                         const TransformSet& transforms, const Eigen::VectorXd& theta);

LossReport loss_report(const TemperedPosterior& post, const DataGenSpec& spec,
                       const QuadratureRule& quad);

}  // namespace cpe
