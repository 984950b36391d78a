#include "cpe/losses.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace cpe {

namespace {

double gauss_nll_const(double noise_var) {
  return 0.5 * std::log(2.0 * std::numbers::pi * noise_var);
}

}  // namespace

QuadraticForm nll_sum_quadratic(const ModelSpec& model, const Dataset& data) {
  const int d = model.basis_order_model;
  QuadraticForm q = QuadraticForm::zero(d);
  if (data.size() == 0) return q;
  const Eigen::MatrixXd phi = design_matrix(model, data.xs);
  const double s2 = model.noise_var_model;
  q.A = phi.transpose() * phi / (2.0 * s2);
  q.b = -phi.transpose() * data.ys / s2;
  q.c = data.ys.squaredNorm() / (2.0 * s2) + data.size() * gauss_nll_const(s2);
  return q;
}

QuadraticForm da_nll_sum_quadratic(const ModelSpec& model, const Dataset& data,
                                   const TransformSet& transforms) {
  if (transforms.size() == 0) {
    throw std::invalid_argument("da_nll_sum_quadratic: empty TransformSet");
  }
  const int d = model.basis_order_model;
  QuadraticForm q = QuadraticForm::zero(d);
  const double s2 = model.noise_var_model;
  for (int i = 0; i < data.size(); ++i) {
    for (int t = 0; t < transforms.size(); ++t) {
      const double w = transforms.weights[t];
      const double tx = transforms.transforms[static_cast<std::size_t>(t)].map(data.xs[i]);
      const Eigen::VectorXd phi = fourier_features(tx, d);
      q.A += w * phi * phi.transpose() / (2.0 * s2);
      q.b -= w * data.ys[i] * phi / s2;
      q.c += w * (data.ys[i] * data.ys[i] / (2.0 * s2) + gauss_nll_const(s2));
    }
  }
  return q;
}

QuadraticForm expected_loss_quadratic(const ModelSpec& model, const DataGenSpec& spec,
                                      const QuadratureRule& quad) {
  // Per node x: -E_y[ln p(y|x,theta)] =
  //   0.5 ln(2 pi s2) + (sv2 + (m_true(x) - theta . phi(x))^2) / (2 s2),
  // a quadratic in theta. Average with weights w/2 (Uniform(-1,1) density).
  const int d = model.basis_order_model;
  const double s2 = model.noise_var_model;
  const double sv2 = spec.noise_var_true;
  QuadraticForm q = QuadraticForm::zero(d);
  for (int k = 0; k < quad.order; ++k) {
    const double x = quad.nodes[k];
    const double w = 0.5 * quad.weights[k];
    const Eigen::VectorXd phi = fourier_features(x, d);
    const double mt = true_conditional(spec, x).mean;
    q.A += w * phi * phi.transpose() / (2.0 * s2);
    q.b -= w * mt * phi / s2;
    q.c += w * (gauss_nll_const(s2) + (sv2 + mt * mt) / (2.0 * s2));
  }
  return q;
}

QuadraticForm posterior_nll_sum_quadratic(const TemperedPosterior& post) {
  if (post.kind == TemperKind::DataAugmented) {
    return da_nll_sum_quadratic(*post.model, *post.dataset, *post.transforms);
  }
  return nll_sum_quadratic(*post.model, *post.dataset);
}

QuadraticForm log_prior_quadratic(const ModelSpec& model) {
  const Gaussian& p = model.prior;
  const int d = p.dim();
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(d, d);
  const Eigen::MatrixXd prec =
      p.chol.triangularView<Eigen::Lower>()
          .transpose()
          .solve(p.chol.triangularView<Eigen::Lower>().solve(eye));
  double log_det = 0.0;
  for (int i = 0; i < d; ++i) log_det += 2.0 * std::log(p.chol(i, i));
  QuadraticForm q;
  q.A = -0.5 * prec;
  q.b = prec * p.mean;
  q.c = -0.5 * (p.mean.dot(prec * p.mean) + d * std::log(2.0 * std::numbers::pi) + log_det);
  return q;
}

double expected_log_loss(const ModelSpec& model, const DataGenSpec& spec,
                         const Eigen::VectorXd& theta, const QuadratureRule& quad) {
  if (theta.size() != model.basis_order_model) {
    throw dimension_error("expected_log_loss: theta length != model order");
  }
  return expected_loss_quadratic(model, spec, quad)(theta);
}

double empirical_log_loss(const ModelSpec& model, const Dataset& data,
                          const Eigen::VectorXd& theta) {
  if (data.size() == 0) {
    throw std::invalid_argument("empirical_log_loss: empty dataset (normalized form undefined)");
  }
  return nll_sum_quadratic(model, data)(theta) / data.size();
}

GibbsLosses gibbs_losses(const TemperedPosterior& post, const DataGenSpec& spec,
                         const QuadratureRule& quad) {
  GibbsLosses out;
  out.test = quadratic_form_moments(post.gaussian,
                                    expected_loss_quadratic(*post.model, spec, quad))
                 .mean;
  const int n = post.dataset->size();
  if (n > 0) {
    out.train_sum =
        quadratic_form_moments(post.gaussian, nll_sum_quadratic(*post.model, *post.dataset))
            .mean;
    out.train_norm = out.train_sum / n;
  }
  return out;
}

double bayes_loss(const TemperedPosterior& post, const DataGenSpec& spec,
                  const QuadratureRule& quad) {
  const ModelSpec& model = *post.model;
  const Gaussian& g = post.gaussian;
  const double s2 = model.noise_var_model;
  const double sv2 = spec.noise_var_true;
  double acc = 0.0;
  for (int k = 0; k < quad.order; ++k) {
    const double x = quad.nodes[k];
    const double w = 0.5 * quad.weights[k];
    const Eigen::VectorXd phi = fourier_features(x, model.basis_order_model);
    const double pred_var = s2 + phi.dot(g.cov * phi);
    const double delta = true_conditional(spec, x).mean - g.mean.dot(phi);
    acc += w * (gauss_nll_const(pred_var) + (sv2 + delta * delta) / (2.0 * pred_var));
  }
  return acc;
}

double da_empirical_loss(const ModelSpec& model, const Dataset& data,
                         const TransformSet& transforms, const Eigen::VectorXd& theta) {
  if (data.size() == 0) {
    throw std::invalid_argument("da_empirical_loss: empty dataset");
  }
  return da_nll_sum_quadratic(model, data, transforms)(theta) / data.size();
}

LossReport loss_report(const TemperedPosterior& post, const DataGenSpec& spec,
                       const QuadratureRule& quad) {
  const GibbsLosses g = gibbs_losses(post, spec, quad);
  LossReport r;
  r.gibbs_test = g.test;
  r.gibbs_train_norm = g.train_norm;
  r.gibbs_train_sum = g.train_sum;
  r.bayes_test = bayes_loss(post, spec, quad);
  return r;
}

}  // namespace cpe
