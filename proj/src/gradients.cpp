#include "cpe/gradients.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace cpe {

namespace {

void require_likelihood_like(const TemperedPosterior& post, const char* where) {
  if (post.kind != TemperKind::Likelihood && post.kind != TemperKind::DataAugmented) {
    throw std::invalid_argument(std::string(where) +
                                ": Prior/Full tempering is handled by grad_meta");
  }
}

// Rank-1 Sherman-Morrison update of (mean, cov) with observation
// y = phi . theta + N(0, noise_var), then E[q] under the update.
double updated_quadratic_mean(const Gaussian& g, const QuadraticForm& q,
                              const Eigen::VectorXd& phi, double y, double noise_var,
                              double base_trace_as) {
  const Eigen::VectorXd v = g.cov * phi;
  const double denom = noise_var + phi.dot(v);
  const double gain = (y - g.mean.dot(phi)) / denom;
  const Eigen::VectorXd mean_new = g.mean + gain * v;
  const double trace_term = base_trace_as - v.dot(q.A * v) / denom;
  return trace_term + mean_new.dot(q.A * mean_new) + q.b.dot(mean_new) + q.c;
}

struct NuDraw {
  double x = 0.0;
  double y = 0.0;
};

NuDraw draw_nu(const DataGenSpec& spec, RandomStream& rng) {
  NuDraw d;
  d.x = rng.uniform(-1.0, 1.0);
  const Conditional c = true_conditional(spec, d.x);
  d.y = c.mean + std::sqrt(c.var) * rng.normal();
  return d;
}

// Mean and std err of per-group estimates (batch means).
McEstimate batch_means(const std::vector<double>& group_estimates) {
  McEstimate e;
  e.value = mean_of(group_estimates);
  e.std_err = group_estimates.size() >= 2 ? stderr_of_mean(group_estimates) : 0.0;
  return e;
}

double sample_cov(const std::vector<double>& a, const std::vector<double>& b) {
  const double ma = mean_of(a);
  const double mb = mean_of(b);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - ma) * (b[i] - mb);
  return s / (static_cast<double>(a.size()) - 1.0);
}

}  // namespace

double grad_empirical_gibbs(const TemperedPosterior& post) {
  require_likelihood_like(post, "grad_empirical_gibbs");
  const QuadraticForm q = posterior_nll_sum_quadratic(post);
  return -quadratic_form_moments(post.gaussian, q).variance;
}

double grad_gibbs_test(const TemperedPosterior& post, const DataGenSpec& spec,
                       const QuadratureRule& quad) {
  require_likelihood_like(post, "grad_gibbs_test");
  const QuadraticForm nll = posterior_nll_sum_quadratic(post);
  const QuadraticForm loss = expected_loss_quadratic(*post.model, spec, quad);
  return -quadratic_form_covariance(post.gaussian, nll, loss);
}

McEstimate grad_bayes_test(const TemperedPosterior& post, const DataGenSpec& spec,
                           RandomStream& rng, int m) {
  require_likelihood_like(post, "grad_bayes_test");
  if (m < 2) throw std::invalid_argument("grad_bayes_test: m must be >= 2");
  const QuadraticForm q = posterior_nll_sum_quadratic(post);
  const Gaussian& g = post.gaussian;
  const double base = quadratic_form_moments(g, q).mean;
  const double base_trace_as = (q.A * g.cov).trace();
  const double noise_var = post.model->noise_var_model;
  std::vector<double> updated(static_cast<std::size_t>(m));
  for (int j = 0; j < m; ++j) {
    const NuDraw d = draw_nu(spec, rng);
    const Eigen::VectorXd phi = fourier_features(d.x, post.model->basis_order_model);
    updated[static_cast<std::size_t>(j)] =
        updated_quadratic_mean(g, q, phi, d.y, noise_var, base_trace_as);
  }
  McEstimate e;
  e.value = mean_of(updated) - base;
  e.std_err = stderr_of_mean(updated);
  return e;
}

namespace {

struct SScoreData {
  std::vector<double> neg_s;  // -S per scored draw
  std::vector<double> nll;    // -ln p(D|theta) per scored draw
};

SScoreData compute_s_scores(const TemperedPosterior& post, const DataGenSpec& spec,
                            RandomStream& rng, int m, int k) {
  if (m < 2 || k < 4) {
    throw std::invalid_argument("grad_bayes_via_s: need m >= 2 and k >= 4");
  }
  const ModelSpec& model = *post.model;
  const int dim = model.basis_order_model;
  const double s2 = model.noise_var_model;
  const double log_norm = -0.5 * std::log(2.0 * std::numbers::pi * s2);

  const int k_den = k / 2;
  const int k_eval = k - k_den;
  const Eigen::MatrixXd theta_den = sample(post.gaussian, rng, k_den);
  const Eigen::MatrixXd theta_eval = sample(post.gaussian, rng, k_eval);

  Eigen::MatrixXd phis(dim, m);
  Eigen::VectorXd ys(m);
  for (int i = 0; i < m; ++i) {
    const NuDraw d = draw_nu(spec, rng);
    phis.col(i) = fourier_features(d.x, dim);
    ys[i] = d.y;
  }

  // One nu-sample at a time keeps memory at O(k) instead of O(k * m).
  SScoreData out;
  out.neg_s.assign(static_cast<std::size_t>(k_eval), 0.0);
  std::vector<double> logs(static_cast<std::size_t>(k_den));
  Eigen::VectorXd pred_den(k_den);
  Eigen::VectorXd pred_eval(k_eval);
  for (int i = 0; i < m; ++i) {
    pred_den.noalias() = theta_den * phis.col(i);
    pred_eval.noalias() = theta_eval * phis.col(i);
    for (int j = 0; j < k_den; ++j) {
      const double r = ys[i] - pred_den[j];
      logs[static_cast<std::size_t>(j)] = log_norm - r * r / (2.0 * s2);
    }
    const double log_predictive =
        log_sum_exp(logs) - std::log(static_cast<double>(k_den));
    if (log_predictive < std::log(1e-300)) {
      throw std::runtime_error("grad_bayes_via_s: predictive density underflow");
    }
    for (int j = 0; j < k_eval; ++j) {
      const double r = ys[i] - pred_eval[j];
      const double logp = log_norm - r * r / (2.0 * s2);
      out.neg_s[static_cast<std::size_t>(j)] +=
          std::exp(logp - log_predictive) / static_cast<double>(m);
    }
  }

  const QuadraticForm q = posterior_nll_sum_quadratic(post);
  out.nll.resize(static_cast<std::size_t>(k_eval));
  for (int j = 0; j < k_eval; ++j) {
    out.nll[static_cast<std::size_t>(j)] = q(theta_eval.row(j).transpose());
  }
  return out;
}

}  // namespace

McEstimate grad_bayes_via_s(const TemperedPosterior& post, const DataGenSpec& spec,
                            RandomStream& rng, int m, int k) {
  require_likelihood_like(post, "grad_bayes_via_s");
  const SScoreData d = compute_s_scores(post, spec, rng, m, k);
  // -Cov(n Lhat, S) = -Cov(nll, -neg_s) = Cov(nll, neg_s), batched for the
  // standard error.
  const std::size_t k_eval = d.nll.size();
  const std::size_t groups = std::min<std::size_t>(20, k_eval / 2);
  std::vector<double> per_group;
  per_group.reserve(groups);
  const std::size_t base = k_eval / groups;
  std::size_t start = 0;
  for (std::size_t gidx = 0; gidx < groups; ++gidx) {
    const std::size_t len = (gidx < groups - 1) ? base : k_eval - start;
    const std::vector<double> a(d.nll.begin() + static_cast<std::ptrdiff_t>(start),
                                d.nll.begin() + static_cast<std::ptrdiff_t>(start + len));
    const std::vector<double> b(d.neg_s.begin() + static_cast<std::ptrdiff_t>(start),
                                d.neg_s.begin() + static_cast<std::ptrdiff_t>(start + len));
    per_group.push_back(sample_cov(a, b));
    start += len;
  }
  return batch_means(per_group);
}

McEstimate s_score_normalization(const TemperedPosterior& post, const DataGenSpec& spec,
                                 RandomStream& rng, int m, int k) {
  require_likelihood_like(post, "s_score_normalization");
  const SScoreData d = compute_s_scores(post, spec, rng, m, k);
  McEstimate e;
  e.value = mean_of(d.neg_s);
  e.std_err = stderr_of_mean(d.neg_s);
  return e;
}

double grad_meta(const TemperedPosterior& post, GibbsTarget target, const DataGenSpec& spec,
                 const QuadratureRule& quad) {
  if (post.kind != TemperKind::Prior && post.kind != TemperKind::Full) {
    throw std::invalid_argument("grad_meta: Likelihood/DataAugmented have dedicated ops");
  }
  QuadraticForm c = log_prior_quadratic(*post.model);
  if (post.kind == TemperKind::Full) {
    c += -nll_sum_quadratic(*post.model, *post.dataset);  // + ln p(D|theta)
  }
  const QuadraticForm f = (target == GibbsTarget::TrainGibbs)
                              ? nll_sum_quadratic(*post.model, *post.dataset)
                              : expected_loss_quadratic(*post.model, spec, quad);
  return quadratic_form_covariance(post.gaussian, c, f);
}

McEstimate second_grad_gibbs_test(const TemperedPosterior& post, const DataGenSpec& spec,
                                  const QuadratureRule& quad, RandomStream& rng, int k) {
  require_likelihood_like(post, "second_grad_gibbs_test");
  if (k < 100) throw std::invalid_argument("second_grad_gibbs_test: k must be >= 100");
  const int n = post.dataset->size();
  if (n == 0) return {0.0, 0.0};
  // Normalized Lhat and exact per-draw L, then
  // n^2 (Cov(Lhat^2, L) - 2 E[Lhat] Cov(Lhat, L)) per batch.
  const QuadraticForm nll = nll_sum_quadratic(*post.model, *post.dataset);
  const QuadraticForm loss = expected_loss_quadratic(*post.model, spec, quad);
  const Eigen::MatrixXd thetas = sample(post.gaussian, rng, k);
  const int groups = 20;
  std::vector<double> per_group;
  per_group.reserve(static_cast<std::size_t>(groups));
  const int base = k / groups;
  int start = 0;
  for (int gidx = 0; gidx < groups; ++gidx) {
    const int len = (gidx < groups - 1) ? base : k - start;
    std::vector<double> lhat(static_cast<std::size_t>(len));
    std::vector<double> lhat2(static_cast<std::size_t>(len));
    std::vector<double> lpop(static_cast<std::size_t>(len));
    for (int j = 0; j < len; ++j) {
      const Eigen::VectorXd th = thetas.row(start + j).transpose();
      const double a = nll(th) / n;
      lhat[static_cast<std::size_t>(j)] = a;
      lhat2[static_cast<std::size_t>(j)] = a * a;
      lpop[static_cast<std::size_t>(j)] = loss(th);
    }
    const double est = static_cast<double>(n) * n *
                       (sample_cov(lhat2, lpop) - 2.0 * mean_of(lhat) * sample_cov(lhat, lpop));
    per_group.push_back(est);
    start += len;
  }
  return batch_means(per_group);
}

double finite_difference(const std::function<double(double)>& loss_curve, double lambda,
                         double h) {
  if (h <= 0.0) throw std::invalid_argument("finite_difference: h must be > 0");
  return (loss_curve(lambda + h) - loss_curve(lambda - h)) / (2.0 * h);
}

const char* to_string(CpeLabel label) {
  switch (label) {
    case CpeLabel::CPE: return "CPE";
    case CpeLabel::WPE: return "WPE";
    case CpeLabel::Neutral: return "Neutral";
  }
  return "?";
}

CpeVerdict make_cpe_verdict(double grad_at_one, double std_err) {
  CpeVerdict v;
  v.grad_at_one = grad_at_one;
  v.std_err = std_err;
  v.threshold = std::max(3.0 * std_err, 1e-4);
  if (grad_at_one < -v.threshold) {
    v.label = CpeLabel::CPE;
  } else if (grad_at_one > v.threshold) {
    v.label = CpeLabel::WPE;
  } else {
    v.label = CpeLabel::Neutral;
  }
  return v;
}

CpeVerdict classify_cpe(const ModelSpec& model, const DataGenSpec& spec, const Dataset& data,
                        RandomStream& rng, int m) {
  const TemperedPosterior post = likelihood_tempered(model, data, 1.0);
  const McEstimate e = grad_bayes_test(post, spec, rng, m);
  return make_cpe_verdict(e.value, e.std_err);
}

GradientReport gradient_report(const TemperedPosterior& post, const DataGenSpec& spec,
                               const QuadratureRule& quad, RandomStream& rng, int m) {
  GradientReport r;
  r.d_gibbs_train = grad_empirical_gibbs(post);
  r.d_gibbs_test = grad_gibbs_test(post, spec, quad);
  const McEstimate bayes = grad_bayes_test(post, spec, rng, m);
  r.d_bayes_test = bayes.value;
  r.se_bayes_test = bayes.std_err;
  r.method = GradMethod::MonteCarlo;
  r.mc_samples = m;
  return r;
}

}  // namespace cpe
