#include "cpe/pacbayes.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace cpe {

namespace {

// (1/n_norm) * (LSE(scale * gaps) - ln(count)): the shared reduction behind
// both empirical exponential-moment estimators.
double log_mean_exp_scaled(const std::vector<double>& gaps, double scale, double n_norm) {
  std::vector<double> e(gaps.size());
  for (std::size_t i = 0; i < gaps.size(); ++i) e[i] = scale * gaps[i];
  return (log_sum_exp(e) - std::log(static_cast<double>(gaps.size()))) / n_norm;
}

// Jackknife std err of log_mean_exp_scaled over leave-one-out resamples.
double jackknife_lme(const std::vector<double>& gaps, double scale, double n_norm) {
  const std::size_t m = gaps.size();
  std::vector<double> loo(m - 1);
  std::vector<double> stats(m);
  for (std::size_t i = 0; i < m; ++i) {
    std::copy(gaps.begin(), gaps.begin() + static_cast<std::ptrdiff_t>(i), loo.begin());
    std::copy(gaps.begin() + static_cast<std::ptrdiff_t>(i) + 1, gaps.end(),
              loo.begin() + static_cast<std::ptrdiff_t>(i));
    stats[i] = log_mean_exp_scaled(loo, scale, n_norm);
  }
  const double sbar = mean_of(stats);
  double ss = 0.0;
  for (const double s : stats) ss += (s - sbar) * (s - sbar);
  return std::sqrt(ss * (static_cast<double>(m) - 1.0) / static_cast<double>(m));
}

double gauss_nll_const(double noise_var) {
  return 0.5 * std::log(2.0 * std::numbers::pi * noise_var);
}

// Quadratic-exact first derivative on a possibly non-uniform grid.
Eigen::VectorXd nonuniform_derivative(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  const int n = static_cast<int>(x.size());
  Eigen::VectorXd d(n);
  for (int i = 0; i < n; ++i) {
    const int j = std::clamp(i, 1, n - 2);
    const double h1 = x[j] - x[j - 1];
    const double h2 = x[j + 1] - x[j];
    const double t = x[i];
    // Derivative of the quadratic through (x[j-1..j+1], y[j-1..j+1]) at t.
    const double a = y[j - 1] / (h1 * (h1 + h2));
    const double b = y[j] / (h1 * h2);
    const double c = y[j + 1] / (h2 * (h1 + h2));
    d[i] = a * (2.0 * t - x[j] - x[j + 1]) - b * (2.0 * t - x[j - 1] - x[j + 1]) +
           c * (2.0 * t - x[j - 1] - x[j]);
  }
  return d;
}

// Value of the local quadratic interpolant of (x, y) around index j at t.
double quadratic_interp(const Eigen::VectorXd& x, const Eigen::VectorXd& y, int j, double t) {
  const int n = static_cast<int>(x.size());
  const int c = std::clamp(j, 1, n - 2);
  const double x0 = x[c - 1], x1 = x[c], x2 = x[c + 1];
  const double l0 = (t - x1) * (t - x2) / ((x0 - x1) * (x0 - x2));
  const double l1 = (t - x0) * (t - x2) / ((x1 - x0) * (x1 - x2));
  const double l2 = (t - x0) * (t - x1) / ((x2 - x0) * (x2 - x1));
  return y[c - 1] * l0 + y[c] * l1 + y[c + 1] * l2;
}

}  // namespace

CgfEstimate empirical_cgf(const ModelSpec& model, const DataGenSpec& spec,
                          const Eigen::VectorXd& theta, const Eigen::VectorXd& lambdas,
                          int M, int n, const QuadratureRule& quad, RandomStream& rng) {
  if (M < 100) throw std::invalid_argument("empirical_cgf: M must be >= 100");
  if (n < 1) throw std::invalid_argument("empirical_cgf: n must be >= 1");
  for (int i = 0; i < lambdas.size(); ++i) {
    if (lambdas[i] <= 0.0) throw std::invalid_argument("empirical_cgf: lambdas must be > 0");
  }
  const double pop_loss = expected_log_loss(model, spec, theta, quad);
  std::vector<double> gaps(static_cast<std::size_t>(M));  // n (L - Lhat_j)
  for (int j = 0; j < M; ++j) {
    const Dataset d = sample_dataset(spec, n, rng);
    gaps[static_cast<std::size_t>(j)] = n * (pop_loss - empirical_log_loss(model, d, theta));
  }
  CgfEstimate out;
  out.lambdas = lambdas;
  out.theta = theta;
  out.resamples = M;
  out.n = n;
  out.values.resize(lambdas.size());
  out.std_errs.resize(lambdas.size());
  for (int i = 0; i < lambdas.size(); ++i) {
    bool finite = true;
    for (const double g : gaps) {
      if (!std::isfinite(lambdas[i] * g)) finite = false;
    }
    if (!finite) {
      out.truncated = true;
      out.values[i] = std::numeric_limits<double>::quiet_NaN();
      out.std_errs[i] = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    out.values[i] = log_mean_exp_scaled(gaps, lambdas[i], n);
    out.std_errs[i] = jackknife_lme(gaps, lambdas[i], n);
  }
  return out;
}

REstimate empirical_r(const ModelSpec& model, const DataGenSpec& spec, int prior_samples,
                      const Eigen::VectorXd& lambdas, int M, int n,
                      const QuadratureRule& quad, RandomStream& rng) {
  if (prior_samples < 100) throw std::invalid_argument("empirical_r: prior_samples >= 100");
  if (M < 2) throw std::invalid_argument("empirical_r: M must be >= 2");
  const QuadraticForm loss_quad = expected_loss_quadratic(model, spec, quad);
  const Eigen::MatrixXd thetas = sample(model.prior, rng, prior_samples);
  // gaps[s][j] = n * Delta(theta_s, D_sj)
  std::vector<std::vector<double>> gaps(static_cast<std::size_t>(prior_samples));
  for (int s = 0; s < prior_samples; ++s) {
    const Eigen::VectorXd theta = thetas.row(s).transpose();
    const double pop = loss_quad(theta);
    auto& row = gaps[static_cast<std::size_t>(s)];
    row.resize(static_cast<std::size_t>(M));
    for (int j = 0; j < M; ++j) {
      const Dataset d = sample_dataset(spec, n, rng);
      row[static_cast<std::size_t>(j)] = n * (pop - empirical_log_loss(model, d, theta));
    }
  }
  REstimate out;
  out.lambdas = lambdas;
  out.prior_samples = prior_samples;
  out.resamples = M;
  out.n = n;
  out.values.resize(lambdas.size());
  out.std_errs.resize(lambdas.size());
  std::vector<double> all;
  all.reserve(static_cast<std::size_t>(prior_samples) * static_cast<std::size_t>(M));
  for (int i = 0; i < lambdas.size(); ++i) {
    const double lam = lambdas[i];
    all.clear();
    bool finite = true;
    for (const auto& row : gaps) {
      for (const double g : row) {
        const double e = lam * g;
        if (!std::isfinite(e)) finite = false;
        all.push_back(e);
      }
    }
    if (!finite) {
      out.truncated = true;
      out.values[i] = std::numeric_limits<double>::quiet_NaN();
      out.std_errs[i] = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    out.values[i] = log_sum_exp(all) - std::log(static_cast<double>(all.size()));
    // Jackknife over prior-draw blocks (datasets inside a block share theta).
    std::vector<double> stats(static_cast<std::size_t>(prior_samples));
    std::vector<double> loo;
    loo.reserve(all.size());
    for (int s = 0; s < prior_samples; ++s) {
      loo.clear();
      for (int s2 = 0; s2 < prior_samples; ++s2) {
        if (s2 == s) continue;
        for (const double g : gaps[static_cast<std::size_t>(s2)]) loo.push_back(lam * g);
      }
      stats[static_cast<std::size_t>(s)] =
          log_sum_exp(loo) - std::log(static_cast<double>(loo.size()));
    }
    const double sbar = mean_of(stats);
    double ss = 0.0;
    for (const double s : stats) ss += (s - sbar) * (s - sbar);
    out.std_errs[i] = std::sqrt(ss * (static_cast<double>(prior_samples) - 1.0) /
                                static_cast<double>(prior_samples));
  }
  return out;
}

BoundReport alquier_expectation_bound(const ModelSpec& model, const DataGenSpec& spec,
                                      double lambda, const RhoBuilder& rho_builder, int M,
                                      int n, const QuadratureRule& quad, RandomStream& rng) {
  if (lambda <= 0.0) throw std::invalid_argument("alquier_expectation_bound: lambda <= 0");
  const QuadraticForm loss_quad = expected_loss_quadratic(model, spec, quad);
  std::vector<double> lhs(static_cast<std::size_t>(M));
  std::vector<double> train(static_cast<std::size_t>(M));
  std::vector<double> kls(static_cast<std::size_t>(M));
  for (int j = 0; j < M; ++j) {
    const Dataset d = sample_dataset(spec, n, rng);
    const Gaussian rho = rho_builder(d);
    lhs[static_cast<std::size_t>(j)] = quadratic_form_moments(rho, loss_quad).mean;
    train[static_cast<std::size_t>(j)] =
        quadratic_form_moments(rho, nll_sum_quadratic(model, d)).mean / n;
    kls[static_cast<std::size_t>(j)] = kl_divergence(rho, model.prior);
  }
  Eigen::VectorXd one_lambda(1);
  one_lambda[0] = lambda;
  const REstimate r =
      empirical_r(model, spec, std::max(100, M / 2), one_lambda, std::max(2, M / 2), n,
                  quad, rng);

  BoundReport b;
  b.lambda = lambda;
  b.lhs = mean_of(lhs);
  b.train_term = mean_of(train);
  b.kl_term = mean_of(kls) / (lambda * n);
  b.r_term = r.values[0] / (lambda * n);
  b.rhs = b.train_term + b.kl_term + b.r_term;
  const double se_lhs = stderr_of_mean(lhs);
  const double se_train = stderr_of_mean(train);
  const double se_kl = stderr_of_mean(kls) / (lambda * n);
  const double se_r = r.std_errs[0] / (lambda * n);
  b.mc_slack =
      3.0 * std::sqrt(se_lhs * se_lhs + se_train * se_train + se_kl * se_kl + se_r * se_r);
  b.holds = b.lhs <= b.rhs + b.mc_slack;
  return b;
}

double optimal_lambda_variance(double kl_expected, int n, double avg_loss_variance) {
  if (kl_expected <= 0.0 || n <= 0 || avg_loss_variance <= 0.0) {
    throw std::invalid_argument("optimal_lambda_variance: all inputs must be > 0");
  }
  return std::sqrt(2.0 * kl_expected / (n * avg_loss_variance));
}

IntersectionResult lambda_intersection_search(const Eigen::VectorXd& lambdas,
                                              const Eigen::VectorXd& r_values,
                                              double kl_expected, int n) {
  const int m = static_cast<int>(lambdas.size());
  if (m < 20) throw std::invalid_argument("lambda_intersection_search: need >= 20 points");
  if (r_values.size() != m) {
    throw dimension_error("lambda_intersection_search: grid length mismatch");
  }
  const auto objective_at_node = [&](int i) {
    return (kl_expected + r_values[i]) / (lambdas[i] * n);
  };
  int argmin = 0;
  for (int i = 1; i < m; ++i) {
    if (objective_at_node(i) < objective_at_node(argmin)) argmin = i;
  }

  // Stationarity residual R - lambda R' + KL: positive left of the
  // minimizer, negative right of it.
  const Eigen::VectorXd deriv = nonuniform_derivative(lambdas, r_values);
  Eigen::VectorXd psi(m);
  for (int i = 0; i < m; ++i) psi[i] = r_values[i] - lambdas[i] * deriv[i] + kl_expected;

  IntersectionResult out;
  int bracket = -1;
  for (int i = 0; i + 1 < m; ++i) {
    if (psi[i] > 0.0 && psi[i + 1] <= 0.0) {
      bracket = i;
      break;
    }
  }
  if (bracket < 0) {
    out.lambda = lambdas[argmin];
    out.objective = objective_at_node(argmin);
    out.boundary = true;
    return out;
  }
  // Secant root between the bracketing nodes, objective via the local
  // quadratic interpolant of R.
  const double t = psi[bracket] / (psi[bracket] - psi[bracket + 1]);
  const double lam = lambdas[bracket] + t * (lambdas[bracket + 1] - lambdas[bracket]);
  const double r_at = quadratic_interp(lambdas, r_values, bracket, lam);
  const double obj = (kl_expected + r_at) / (lam * n);
  if (obj <= objective_at_node(argmin)) {
    out.lambda = lam;
    out.objective = obj;
    out.boundary = false;
  } else {
    out.lambda = lambdas[argmin];
    out.objective = objective_at_node(argmin);
    out.boundary = (argmin == 0 || argmin == m - 1);
  }
  return out;
}

TiltedVariance tilted_variance_check(const ModelSpec& model, const DataGenSpec& spec,
                                     const Eigen::VectorXd& theta, double lambda, int mc,
                                     RandomStream& rng) {
  if (lambda < 0.0) throw std::invalid_argument("tilted_variance_check: lambda < 0");
  if (mc < 10000) throw std::invalid_argument("tilted_variance_check: mc must be >= 1e4");
  const double s2 = model.noise_var_model;
  const double c0 = gauss_nll_const(s2);
  std::vector<double> losses(static_cast<std::size_t>(mc));
  for (int i = 0; i < mc; ++i) {
    const double x = rng.uniform(-1.0, 1.0);
    const Conditional c = true_conditional(spec, x);
    const double y = c.mean + std::sqrt(c.var) * rng.normal();
    const double r = y - theta.dot(fourier_features(x, model.basis_order_model));
    losses[static_cast<std::size_t>(i)] = c0 + r * r / (2.0 * s2);
  }

  // Self-normalized weighted central moments of the losses with weights
  // proportional to exp(-lambda * loss), max-subtracted inside each batch.
  const auto weighted_moments = [lambda](const std::vector<double>& ls, double* m2,
                                         double* m4) {
    double wmax = -std::numeric_limits<double>::infinity();
    for (const double l : ls) wmax = std::max(wmax, -lambda * l);
    double wsum = 0.0, wl = 0.0;
    for (const double l : ls) {
      const double w = std::exp(-lambda * l - wmax);
      wsum += w;
      wl += w * l;
    }
    const double mean = wl / wsum;
    double s2sum = 0.0, s4sum = 0.0;
    for (const double l : ls) {
      const double w = std::exp(-lambda * l - wmax);
      const double d = l - mean;
      s2sum += w * d * d;
      s4sum += w * d * d * d * d;
    }
    *m2 = s2sum / wsum;
    *m4 = s4sum / wsum;
  };

  TiltedVariance out;
  double m2 = 0.0, m4 = 0.0;
  weighted_moments(losses, &m2, &m4);
  out.v_tilted = m2;
  out.fourth_cumulant = m4 - 3.0 * m2 * m2;
  out.v_plain = variance_of(losses);

  // ESS from globally normalized weights.
  {
    double wmax = -std::numeric_limits<double>::infinity();
    for (const double l : losses) wmax = std::max(wmax, -lambda * l);
    double wsum = 0.0, w2sum = 0.0;
    for (const double l : losses) {
      const double w = std::exp(-lambda * l - wmax);
      wsum += w;
      w2sum += w * w;
    }
    out.ess = wsum * wsum / w2sum;
  }
  out.unreliable = out.ess < 50.0;

  // Batch-means standard errors.
  const int groups = 50;
  const int base = mc / groups;
  std::vector<double> tilted_g;
  std::vector<double> plain_g;
  for (int g = 0; g < groups; ++g) {
    const int len = (g < groups - 1) ? base : mc - g * base;
    const std::vector<double> part(losses.begin() + static_cast<std::ptrdiff_t>(g) * base,
                                   losses.begin() + static_cast<std::ptrdiff_t>(g) * base +
                                       len);
    double gm2 = 0.0, gm4 = 0.0;
    weighted_moments(part, &gm2, &gm4);
    tilted_g.push_back(gm2);
    plain_g.push_back(variance_of(part));
  }
  out.se_tilted = stderr_of_mean(tilted_g);
  out.se_plain = stderr_of_mean(plain_g);
  return out;
}

PriorPredictiveVariance prior_predictive_variance(const ModelSpec& model,
                                                  const DataGenSpec& spec, int prior_samples,
                                                  int M, int n, const QuadratureRule& quad,
                                                  RandomStream& rng) {
  if (prior_samples < 100 || M < 100) {
    throw std::invalid_argument("prior_predictive_variance: counts must be >= 100");
  }
  const Eigen::MatrixXd thetas = sample(model.prior, rng, prior_samples);
  PriorPredictiveVariance out;
  std::vector<double> lls(static_cast<std::size_t>(M));
  for (int s = 0; s < prior_samples; ++s) {
    const Eigen::VectorXd theta = thetas.row(s).transpose();
    for (int j = 0; j < M; ++j) {
      const Dataset d = sample_dataset(spec, n, rng);
      lls[static_cast<std::size_t>(j)] = -nll_sum_quadratic(model, d)(theta);
    }
    out.mc += variance_of(lls);
    out.closed_form += n * loss_variance_under_nu(model, spec, theta, quad);
  }
  out.mc /= prior_samples;
  out.closed_form /= prior_samples;
  return out;
}

double loss_variance_under_nu(const ModelSpec& model, const DataGenSpec& spec,
                              const Eigen::VectorXd& theta, const QuadratureRule& quad) {
  // loss = c0 + (y - theta.phi(x))^2 / (2 s2) with y | x ~ N(m_t(x), sv2):
  // conditional moments are polynomial in delta(x) = m_t(x) - theta.phi(x).
  const double s2 = model.noise_var_model;
  const double sv2 = spec.noise_var_true;
  const double c0 = gauss_nll_const(s2);
  double e1 = 0.0;  // E_x E[loss | x]
  double e2 = 0.0;  // E_x E[loss^2 | x]
  for (int k = 0; k < quad.order; ++k) {
    const double x = quad.nodes[k];
    const double w = 0.5 * quad.weights[k];
    const double delta =
        true_conditional(spec, x).mean -
        theta.dot(fourier_features(x, model.basis_order_model));
    const double d2 = delta * delta;
    const double q = (sv2 + d2) / (2.0 * s2);
    e1 += w * (c0 + q);
    const double fourth = 3.0 * sv2 * sv2 + 6.0 * sv2 * d2 + d2 * d2;
    e2 += w * (c0 * c0 + 2.0 * c0 * q + fourth / (4.0 * s2 * s2));
  }
  return e2 - e1 * e1;
}

double cgf_exact(const ModelSpec& model, const DataGenSpec& spec,
                 const Eigen::VectorXd& theta, double lambda, const QuadratureRule& quad) {
  // J(lambda) = lambda L + ln E_nu[e^{-lambda loss}] for i.i.d. samples.
  // With loss = c0 + r^2/(2 s2), r = y - theta.phi(x), y|x Gaussian:
  //   E_y[e^{-a r^2}] = exp(-a delta^2 / (1 + 2 a sv2)) / sqrt(1 + 2 a sv2),
  // a = lambda / (2 s2).
  const double s2 = model.noise_var_model;
  const double sv2 = spec.noise_var_true;
  const double c0 = gauss_nll_const(s2);
  const double a = lambda / (2.0 * s2);
  const double pop_loss = expected_log_loss(model, spec, theta, quad);
  double acc = 0.0;
  for (int k = 0; k < quad.order; ++k) {
    const double x = quad.nodes[k];
    const double w = 0.5 * quad.weights[k];
    const double delta =
        true_conditional(spec, x).mean -
        theta.dot(fourier_features(x, model.basis_order_model));
    const double denom = 1.0 + 2.0 * a * sv2;
    acc += w * std::exp(-a * delta * delta / denom) / std::sqrt(denom);
  }
  return lambda * pop_loss - lambda * c0 + std::log(acc);
}

Eigen::VectorXd min_norm_mle(const ModelSpec& model, const Dataset& data) {
  if (data.size() == 0) throw std::invalid_argument("min_norm_mle: empty dataset");
  const Eigen::MatrixXd phi = design_matrix(model, data.xs);
  return phi.bdcSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(data.ys);
}

}  // namespace cpe
