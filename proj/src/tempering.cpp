#include "cpe/tempering.hpp"

#include <stdexcept>

namespace cpe {

Eigen::MatrixXd design_matrix(const ModelSpec& model, const Eigen::VectorXd& xs) {
  Eigen::MatrixXd phi(xs.size(), model.basis_order_model);
  for (int i = 0; i < xs.size(); ++i) {
    phi.row(i) = fourier_features(xs[i], model.basis_order_model).transpose();
  }
  return phi;
}

TemperedPosterior likelihood_tempered(const ModelSpec& model, const Dataset& data,
                                      double lambda) {
  if (lambda < 0.0) throw std::invalid_argument("likelihood_tempered: lambda < 0");
  TemperedPosterior post;
  post.kind = TemperKind::Likelihood;
  post.temperature = lambda;
  post.model = &model;
  post.dataset = &data;
  post.gaussian = linear_gaussian_posterior(model.prior, design_matrix(model, data.xs),
                                            data.ys, model.noise_var_model, lambda);
  return post;
}

TemperedPosterior prior_tempered(const ModelSpec& model, const Dataset& data, double gamma) {
  if (gamma <= 0.0) throw std::invalid_argument("prior_tempered: gamma must be > 0");
  const Gaussian tempered_prior =
      Gaussian::from_moments(model.prior.mean, model.prior.cov / gamma);
  TemperedPosterior post;
  post.kind = TemperKind::Prior;
  post.temperature = gamma;
  post.model = &model;
  post.dataset = &data;
  post.gaussian = linear_gaussian_posterior(tempered_prior, design_matrix(model, data.xs),
                                            data.ys, model.noise_var_model, 1.0);
  return post;
}

TemperedPosterior full_tempered(const ModelSpec& model, const Dataset& data, double tau) {
  if (tau <= 0.0) throw std::invalid_argument("full_tempered: tau must be > 0");
  const Gaussian tempered_prior =
      Gaussian::from_moments(model.prior.mean, model.prior.cov / tau);
  TemperedPosterior post;
  post.kind = TemperKind::Full;
  post.temperature = tau;
  post.model = &model;
  post.dataset = &data;
  post.gaussian = linear_gaussian_posterior(tempered_prior, design_matrix(model, data.xs),
                                            data.ys, model.noise_var_model, tau);
  return post;
}

TemperedPosterior da_tempered(const ModelSpec& model, const Dataset& data,
                              const TransformSet& transforms, double lambda) {
  if (lambda < 0.0) throw std::invalid_argument("da_tempered: lambda < 0");
  if (transforms.size() == 0) throw std::invalid_argument("da_tempered: empty TransformSet");
  // Enumerate the finite TransformSet as a weight-sqrt-scaled augmented
  // design: each (i, t) row is sqrt(w_t) phi(t(x_i)) with target
  // sqrt(w_t) y_i, so X^T X and X^T y carry the exact weighted sums.
  const int n = data.size();
  const int m = transforms.size();
  Eigen::MatrixXd design(n * m, model.basis_order_model);
  Eigen::VectorXd targets(n * m);
  for (int i = 0; i < n; ++i) {
    for (int t = 0; t < m; ++t) {
      const double w = transforms.weights[t];
      const double tx = transforms.transforms[static_cast<std::size_t>(t)].map(data.xs[i]);
      design.row(i * m + t) =
          std::sqrt(w) * fourier_features(tx, model.basis_order_model).transpose();
      targets[i * m + t] = std::sqrt(w) * data.ys[i];
    }
  }
  TemperedPosterior post;
  post.kind = TemperKind::DataAugmented;
  post.temperature = lambda;
  post.model = &model;
  post.dataset = &data;
  post.transforms = &transforms;
  post.gaussian = linear_gaussian_posterior(model.prior, design, targets,
                                            model.noise_var_model, lambda);
  return post;
}

Gaussian updated_posterior(const TemperedPosterior& post, double y, double x) {
  const Eigen::MatrixXd phi =
      fourier_features(x, post.model->basis_order_model).transpose();
  Eigen::VectorXd target(1);
  target[0] = y;
  return linear_gaussian_posterior(post.gaussian, phi, target,
                                   post.model->noise_var_model, 1.0);
}

}  // namespace cpe
