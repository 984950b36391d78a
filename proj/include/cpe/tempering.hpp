#pragma once

#include <Eigen/Dense>

#include "cpe/data.hpp"
#include "cpe/gaussian.hpp"

namespace cpe {

/// The assumed likelihood: y | x, theta ~ N(theta . phi_K(x), noise_var_model)
/// with a Gaussian prior over the K coefficients.
struct ModelSpec {
  int basis_order_model = 0;
  double noise_var_model = 1.0;
  Gaussian prior;
};

enum class TemperKind { Likelihood, Prior, Full, DataAugmented };

/// A Gaussian posterior plus its tempering metadata. The model/dataset
/// references are non-owning; callers keep them alive for the posterior's
/// lifetime. All tempering is applied analytically inside the conjugate
/// update -- never by sampling.
struct TemperedPosterior {
  TemperKind kind = TemperKind::Likelihood;
  double temperature = 1.0;
  Gaussian gaussian;
  const ModelSpec* model = nullptr;
  const Dataset* dataset = nullptr;
  const TransformSet* transforms = nullptr;  // DataAugmented only
};

/// Rows phi(x_i) under the model's basis order.
Eigen::MatrixXd design_matrix(const ModelSpec& model, const Eigen::VectorXd& xs);

/// p^lambda(theta | D) proportional to p(D | theta)^lambda p(theta).
TemperedPosterior likelihood_tempered(const ModelSpec& model, const Dataset& data,
                                      double lambda);

/// Posterior of p(D | theta) p(theta)^gamma. For a Gaussian prior N(m, S)
/// the tempered prior is N(m, S / gamma); the mean is kept (see the module
/// notes on non-zero-mean priors).
TemperedPosterior prior_tempered(const ModelSpec& model, const Dataset& data, double gamma);

/// Posterior of (p(D | theta) p(theta))^tau == likelihood tempering at
/// lambda = tau under the prior N(m, S / tau).
TemperedPosterior full_tempered(const ModelSpec& model, const Dataset& data, double tau);

/// Posterior of the data-augmentation pseudo likelihood: the expectation
/// over the finite TransformSet is enumerated exactly, giving precision
///   prior^-1 + (lambda / noise_var) sum_i sum_t w_t phi(t(x_i)) phi(t(x_i))^T
/// and the matching linear term.
TemperedPosterior da_tempered(const ModelSpec& model, const Dataset& data,
                              const TransformSet& transforms, double lambda);

/// One-sample conjugate update with the *untempered* likelihood:
/// p~(theta) proportional to post.gaussian(theta) N(y; theta . phi(x), noise_var_model).
Gaussian updated_posterior(const TemperedPosterior& post, double y, double x);

}  // namespace cpe
