#include "cpe/gaussian.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace cpe {

namespace {

// Lower Cholesky with a single 1e-10*I jitter retry. Failure after the
// retry is a hard error: downstream exactness checks depend on it.
Eigen::MatrixXd factor_spd(const Eigen::MatrixXd& m) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  const Eigen::MatrixXd jittered =
      m + 1e-10 * Eigen::MatrixXd::Identity(m.rows(), m.cols());
  llt.compute(jittered);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  throw std::runtime_error("Gaussian: covariance is not SPD (after one jitter retry)");
}

double log_det_from_chol(const Eigen::MatrixXd& chol) {
  double s = 0.0;
  for (int i = 0; i < chol.rows(); ++i) s += std::log(chol(i, i));
  return 2.0 * s;
}

}  // namespace

Gaussian Gaussian::from_moments(Eigen::VectorXd mean, Eigen::MatrixXd cov) {
  if (mean.size() != cov.rows() || cov.rows() != cov.cols()) {
    throw dimension_error("Gaussian: mean/cov dimension mismatch");
  }
  // Closed-form precision assemblies accumulate ~1e-15 asymmetry.
  Eigen::MatrixXd sym = 0.5 * (cov + cov.transpose());
  Gaussian g;
  g.mean = std::move(mean);
  g.chol = factor_spd(sym);
  g.cov = std::move(sym);
  return g;
}

Gaussian Gaussian::isotropic(int dim, double mean_value, double var) {
  return from_moments(Eigen::VectorXd::Constant(dim, mean_value),
                      var * Eigen::MatrixXd::Identity(dim, dim));
}

double QuadraticForm::operator()(const Eigen::VectorXd& theta) const {
  return theta.dot(A * theta) + b.dot(theta) + c;
}

QuadraticForm& QuadraticForm::operator+=(const QuadraticForm& other) {
  A += other.A;
  b += other.b;
  c += other.c;
  return *this;
}

QuadraticForm QuadraticForm::operator-() const { return QuadraticForm{-A, -b, -c}; }

QuadraticForm QuadraticForm::zero(int dim) {
  return QuadraticForm{Eigen::MatrixXd::Zero(dim, dim), Eigen::VectorXd::Zero(dim), 0.0};
}

double log_density(const Gaussian& g, const Eigen::VectorXd& x) {
  if (x.size() != g.mean.size()) throw dimension_error("log_density: dimension mismatch");
  const Eigen::VectorXd z =
      g.chol.triangularView<Eigen::Lower>().solve(x - g.mean);
  return -0.5 * (g.dim() * std::log(2.0 * std::numbers::pi) + log_det_from_chol(g.chol) +
                 z.squaredNorm());
}

Eigen::MatrixXd sample(const Gaussian& g, RandomStream& rng, int n) {
  if (n < 1) throw std::invalid_argument("sample: n must be >= 1");
  const int d = g.dim();
  Eigen::MatrixXd out(n, d);
  Eigen::VectorXd z(d);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) z[j] = rng.normal();
    out.row(i) = (g.mean + g.chol * z).transpose();
  }
  return out;
}

double kl_divergence(const Gaussian& q, const Gaussian& p) {
  if (q.dim() != p.dim()) throw dimension_error("kl_divergence: dimension mismatch");
  const int d = q.dim();
  // Solve against p's factor: tr(Sigma_p^-1 Sigma_q) = ||L_p^-1 L_q||_F^2.
  const Eigen::MatrixXd m = p.chol.triangularView<Eigen::Lower>().solve(q.chol);
  const double trace_term = m.squaredNorm();
  const Eigen::VectorXd w =
      p.chol.triangularView<Eigen::Lower>().solve(p.mean - q.mean);
  const double maha = w.squaredNorm();
  const double logdet = log_det_from_chol(p.chol) - log_det_from_chol(q.chol);
  return 0.5 * (trace_term + maha - d + logdet);
}

Gaussian linear_gaussian_posterior(const Gaussian& prior, const Eigen::MatrixXd& design,
                                   const Eigen::VectorXd& targets, double noise_var,
                                   double lambda) {
  if (noise_var <= 0.0) throw std::invalid_argument("linear_gaussian_posterior: noise_var <= 0");
  if (lambda < 0.0) throw std::invalid_argument("linear_gaussian_posterior: lambda < 0");
  if (design.cols() != prior.dim()) {
    throw dimension_error("linear_gaussian_posterior: design columns != prior dim");
  }
  if (design.rows() != targets.size()) {
    throw dimension_error("linear_gaussian_posterior: design rows != targets length");
  }
  // Exact early return avoids 0 * inf when noise_var is tiny.
  if (lambda == 0.0 || design.rows() == 0) return prior;

  const int d = prior.dim();
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(d, d);
  // Prior precision via factor solves; precision itself is never cached.
  const Eigen::MatrixXd prior_prec =
      prior.chol.triangularView<Eigen::Lower>()
          .transpose()
          .solve(prior.chol.triangularView<Eigen::Lower>().solve(eye));
  const double scale = lambda / noise_var;
  Eigen::MatrixXd prec = prior_prec + scale * design.transpose() * design;
  prec = 0.5 * (prec + prec.transpose());
  Eigen::LLT<Eigen::MatrixXd> llt(prec);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("linear_gaussian_posterior: posterior precision not SPD");
  }
  const Eigen::VectorXd rhs = prior_prec * prior.mean + scale * design.transpose() * targets;
  // One refinement step on the mean keeps it accurate when the precision is
  // badly conditioned (near-flat priors with few observations).
  Eigen::VectorXd mean = llt.solve(rhs);
  mean += llt.solve(rhs - prec * mean);
  const Eigen::MatrixXd cov = llt.solve(eye);
  return Gaussian::from_moments(mean, cov);
}

namespace {

// L^T A L assembled from the signed eigenfactorization of A with
// noise-level eigenvalues clipped to zero. Algebraically this is just the
// whitened matrix behind tr(A Sigma) and tr(A1 Sigma A2 Sigma); the
// factored assembly keeps those traces accurate when Sigma carries
// near-flat directions (variances ~1e12) next to tight ones: raw products
// A * Sigma amplify float-level null-space leakage of A by ||Sigma||^2.
Eigen::MatrixXd whitened(const Eigen::MatrixXd& a, const Eigen::MatrixXd& chol) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
  const Eigen::VectorXd& d = es.eigenvalues();
  const double clip = 64.0 * std::numeric_limits<double>::epsilon() *
                      d.cwiseAbs().maxCoeff();
  const Eigen::MatrixXd u = chol.transpose() * es.eigenvectors();
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(a.rows(), a.cols());
  for (int k = 0; k < d.size(); ++k) {
    if (std::abs(d[k]) <= clip) continue;
    w.noalias() += d[k] * u.col(k) * u.col(k).transpose();
  }
  return w;
}

}  // namespace

QuadMoments quadratic_form_moments(const Gaussian& g, const QuadraticForm& q) {
  if (q.dim() != g.dim()) throw dimension_error("quadratic_form_moments: dimension mismatch");
  // mean = tr(A Sigma) + mu^T A mu + b^T mu + c
  // var  = 2 tr((A Sigma)^2) + (2 A mu + b)^T Sigma (2 A mu + b)
  const Eigen::MatrixXd w = whitened(q.A, g.chol);
  const Eigen::VectorXd grad = g.chol.transpose() * (2.0 * q.A * g.mean + q.b);
  QuadMoments out;
  out.mean = w.trace() + g.mean.dot(q.A * g.mean) + q.b.dot(g.mean) + q.c;
  out.variance = 2.0 * w.squaredNorm() + grad.squaredNorm();
  return out;
}

double quadratic_form_covariance(const Gaussian& g, const QuadraticForm& q1,
                                 const QuadraticForm& q2) {
  if (q1.dim() != g.dim() || q2.dim() != g.dim()) {
    throw dimension_error("quadratic_form_covariance: dimension mismatch");
  }
  // 2 tr(A1 Sigma A2 Sigma) + (2 A1 mu + b1)^T Sigma (2 A2 mu + b2)
  const Eigen::MatrixXd w1 = whitened(q1.A, g.chol);
  const Eigen::MatrixXd w2 = whitened(q2.A, g.chol);
  const Eigen::VectorXd g1 = g.chol.transpose() * (2.0 * q1.A * g.mean + q1.b);
  const Eigen::VectorXd g2 = g.chol.transpose() * (2.0 * q2.A * g.mean + q2.b);
  return 2.0 * w1.cwiseProduct(w2).sum() + g1.dot(g2);
}

}  // namespace cpe
