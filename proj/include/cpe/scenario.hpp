#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cpe/gradients.hpp"
#include "cpe/pacbayes.hpp"

namespace cpe {

struct McCounts {
  int nu_samples = 5000;        // fresh nu-draws per Bayes gradient
  int posterior_samples = 100000;  // posterior draws for MC cross-checks
  int resamples = 200;          // dataset resamples for PAC-Bayes runs
};

struct ScenarioConfig {
  std::string name;
  DataGenSpec data_gen;
  ModelSpec model;
  int n_train = 5;
  std::vector<double> lambda_grid;
  int seeds = 20;
  McCounts mc_counts;
  int quadrature_order = 128;
  std::optional<TransformSet> transforms;
};

/// One row of a lambda sweep. The CSV column order is fixed:
/// lambda,seed,gibbs_train_norm,gibbs_test,bayes_test,
/// d_gibbs_train,d_gibbs_test,d_bayes_test,d_bayes_stderr
struct SweepRecord {
  double lambda = 0.0;
  int seed = 0;
  double gibbs_train_norm = 0.0;
  double gibbs_test = 0.0;
  double bayes_test = 0.0;
  double d_gibbs_train = 0.0;
  double d_gibbs_test = 0.0;
  double d_bayes_test = 0.0;
  double d_bayes_stderr = 0.0;
};

/// The four Bayesian-linear-regression settings: a shared all-ones
/// order-10 Fourier truth with unit noise, n = 5, and the four
/// likelihood/prior choices (1.0/2.0, 0.15 at order 20/2.0, 3.0/2.0,
/// 1.0/0.5).
std::vector<ScenarioConfig> builtin_scenarios();

/// Lookup by name in the catalog; null when absent.
const ScenarioConfig* find_builtin_scenario(const std::vector<ScenarioConfig>& catalog,
                                            const std::string& name);

/// Config files mirror ScenarioConfig field names; see README for the
/// sub-object schemas.
ScenarioConfig load_scenario_json(const std::string& path);
std::string scenario_to_json_string(const ScenarioConfig& cfg);

struct LambdaMedians {
  double lambda = 0.0;
  double gibbs_train_norm = 0.0;
  double gibbs_test = 0.0;
  double bayes_test = 0.0;
  double d_gibbs_train = 0.0;
  double d_gibbs_test = 0.0;
  double d_bayes_test = 0.0;
};

struct SweepSummary {
  std::string scenario;
  int seeds = 0;
  std::vector<LambdaMedians> per_lambda;
  CpeVerdict verdict_at_one;  // from the median gradient at lambda = 1
  std::vector<SweepRecord> records;
  std::vector<double> grad_at_one_per_seed;
};

/// Full sweep: per seed and lambda builds the tempered posterior, computes
/// losses and gradients, writes the CSV, and returns per-lambda medians plus
/// the lambda = 1 verdict. Violations of the exact inequalities (train
/// gradient sign, train-loss monotonicity, Jensen) abort with a diagnostic
/// naming the violated result. Output is byte-identical for any thread
/// count at a fixed master seed.
SweepSummary run_sweep(const ScenarioConfig& cfg, const std::string& out_csv,
                       std::uint64_t master_seed, int threads);

void write_sweep_summary_json(const SweepSummary& summary, const std::string& path);

struct GradCheckRow {
  double lambda = 0.0;
  std::string loss;  // "gibbs_train_sum" | "gibbs_test" | "bayes_test"
  double closed_form = 0.0;  // for bayes: the FD of the closed-form curve
  double mc = 0.0;
  double mc_stderr = 0.0;
  double fd = 0.0;
  double rel_err_closed_vs_fd = 0.0;
  double z_mc_vs_closed = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckRow> rows;
  double max_rel_err_gibbs = 0.0;  // closed vs FD over both Gibbs losses
  bool train_grads_nonpositive = true;
  bool mc_within_3se = true;
  bool pass = false;
};

/// Closed-form vs finite-difference vs Monte Carlo gradients on a fixed
/// dataset at lambda in {0.25, 0.5, 1, 2, 4}.
GradCheckReport run_grad_check(const ScenarioConfig& cfg, const std::string& out_csv,
                               std::uint64_t master_seed);

struct DaCompareSeedRow {
  int seed = 0;
  double d_gibbs_plain = 0.0;
  double d_gibbs_da = 0.0;
  double d_bayes_plain = 0.0;
  double d_bayes_plain_se = 0.0;
  double d_bayes_da = 0.0;
  double d_bayes_da_se = 0.0;
};

struct DaCompareReport {
  std::vector<DaCompareSeedRow> rows;
  double median_d_gibbs_plain = 0.0;
  double median_d_gibbs_da = 0.0;
  double median_d_bayes_plain = 0.0;
  double median_d_bayes_da = 0.0;
  /// Median over seeds of the paired difference d_gibbs_da - d_gibbs_plain
  /// (same dataset on both sides, so dataset-level noise cancels).
  double median_paired_gibbs_diff = 0.0;
  bool da_strengthens_gibbs = false;  // median paired difference <= 0
};

/// Gibbs and Bayes gradients at lambda = 1 with and without the given
/// transforms, per seed, under the config's own data-generating spec. The
/// Bayes gradients reuse one nu-draw stream per seed for both posteriors
/// (common random numbers), so identity transforms reproduce the plain
/// values bit for bit.
DaCompareReport run_da_compare(const ScenarioConfig& cfg, const TransformSet& transforms,
                               const std::string& out_csv, std::uint64_t master_seed,
                               int threads);

struct PacBayesReport {
  std::vector<BoundReport> bounds;
  bool all_bounds_hold = false;
  CgfEstimate cgf_prior_mean;
  CgfEstimate cgf_prior_draw;
  CgfEstimate cgf_mle;
  REstimate r_estimate;
  double kl_expected = 0.0;         // E_D[KL(rho_1 | pi)] over resamples
  double prior_loss_variance = 0.0;  // E_pi[V_nu(loss)], closed form per draw
  double lambda_star_variance = 0.0;
  IntersectionResult lambda_star_intersection;
  PriorPredictiveVariance ppv;
};

/// J grids for three representative models, the R grid, bound reports at
/// five lambdas, both optimal-lambda procedures, and the prior predictive
/// variance. Writes lambda,J,J_stderr / lambda,R,R_stderr CSVs and a JSON
/// report under the given prefix.
PacBayesReport run_pacbayes(const ScenarioConfig& cfg, const std::string& out_prefix,
                            std::uint64_t master_seed);

}  // namespace cpe
