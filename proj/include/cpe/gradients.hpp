#pragma once

#include <functional>

#include "cpe/losses.hpp"

namespace cpe {

enum class GradMethod { ClosedForm, MonteCarlo, FiniteDifference };

/// Temperature gradients of the three losses at one posterior. All
/// identities are taken in the sum convention (no 1/n): under it the train
/// gradient is exactly -V(ln p(D|theta)) and the Bayes gradient is exactly
/// the updated-posterior Gibbs difference. `method` describes how
/// d_bayes_test was obtained; the Gibbs gradients are always closed-form
/// here (std errs 0).
struct GradientReport {
  double d_gibbs_train = 0.0;  // d/dlambda of the sum-form train loss, <= 0
  double d_gibbs_test = 0.0;
  double d_bayes_test = 0.0;
  GradMethod method = GradMethod::ClosedForm;
  double se_gibbs_train = 0.0;
  double se_gibbs_test = 0.0;
  double se_bayes_test = 0.0;
  long mc_samples = 0;
};

struct McEstimate {
  double value = 0.0;
  double std_err = 0.0;
};

/// d/dlambda of the sum-form empirical Gibbs loss:
/// -V_{p^lambda}(ln p(D|theta)), closed form, always <= 0.
/// For DataAugmented posteriors the pseudo log-likelihood takes the place
/// of ln p(D|theta). Prior/Full kinds belong to grad_meta.
double grad_empirical_gibbs(const TemperedPosterior& post);

/// d/dlambda of the Gibbs test loss: -Cov_{p^lambda}(-ln p(D|theta), -L)
/// = Cov(ln p(D|theta), L), closed form via quadratic_form_covariance.
double grad_gibbs_test(const TemperedPosterior& post, const DataGenSpec& spec,
                       const QuadratureRule& quad);

/// d/dlambda of the Bayes loss as the updated-posterior Gibbs difference:
/// mean over m fresh nu-draws of E_{p~(y,x)}[-ln p(D|theta)] minus
/// E_{p^lambda}[-ln p(D|theta)], both closed form per draw (sum convention).
McEstimate grad_bayes_test(const TemperedPosterior& post, const DataGenSpec& spec,
                           RandomStream& rng, int m);

/// Same gradient through the relative-performance score
/// S(theta) = -E_nu[p(y|x,theta) / E_post[p(y|x,theta)]]:
/// returns -Cov(theta-samples)(-ln p(D|theta), S(theta)). The predictive
/// denominator is self-normalized from half of the k posterior draws; the
/// other half carries the covariance, so the mean of -S over the scored
/// draws is a statistical check rather than an algebraic identity.
/// Throws on predictive underflow (all densities below ~1e-300).
McEstimate grad_bayes_via_s(const TemperedPosterior& post, const DataGenSpec& spec,
                            RandomStream& rng, int m, int k);

/// Mean of -S over the scored posterior draws (should sit near 1) from the
/// same split-sample construction as grad_bayes_via_s.
McEstimate s_score_normalization(const TemperedPosterior& post, const DataGenSpec& spec,
                                 RandomStream& rng, int m, int k);

enum class GibbsTarget { TrainGibbs, TestGibbs };

/// Tempering gradient for Prior/Full kinds via the covariance meta-identity
/// d E_rho[f] = Cov_rho(c, f) with c = ln p(theta) (prior tempering) or
/// ln p(D|theta) + ln p(theta) (full tempering). Closed form.
double grad_meta(const TemperedPosterior& post, GibbsTarget target, const DataGenSpec& spec,
                 const QuadratureRule& quad);

/// Second lambda-derivative of the Gibbs test loss,
/// n^2 (Cov(Lhat^2, L) - 2 E[Lhat] Cov(Lhat, L)) with normalized Lhat,
/// by Monte Carlo over k posterior draws with exact per-draw losses.
McEstimate second_grad_gibbs_test(const TemperedPosterior& post, const DataGenSpec& spec,
                                  const QuadratureRule& quad, RandomStream& rng, int k);

/// Central difference (f(lambda+h) - f(lambda-h)) / (2h). The curve must be
/// defined on [lambda-h, lambda+h]; tempered-loss curves need lambda >= h.
double finite_difference(const std::function<double(double)>& loss_curve, double lambda,
                         double h);

enum class CpeLabel { CPE, WPE, Neutral };

struct CpeVerdict {
  double grad_at_one = 0.0;
  double std_err = 0.0;
  double threshold = 0.0;
  CpeLabel label = CpeLabel::Neutral;
};

const char* to_string(CpeLabel label);

/// Classify from d_bayes and its std err: CPE below -threshold, WPE above
/// +threshold, Neutral in the band max(3 std errs, 1e-4 nats).
CpeVerdict make_cpe_verdict(double grad_at_one, double std_err);

/// Bayes gradient at lambda = 1 with m nu-draws, labelled per the
/// neutral-band rule.
CpeVerdict classify_cpe(const ModelSpec& model, const DataGenSpec& spec, const Dataset& data,
                        RandomStream& rng, int m);

/// Closed-form Gibbs gradients plus the Monte Carlo Bayes gradient.
GradientReport gradient_report(const TemperedPosterior& post, const DataGenSpec& spec,
                               const QuadratureRule& quad, RandomStream& rng, int m);

}  // namespace cpe
