#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "cpe/scenario.hpp"

using namespace cpe;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ScenarioConfig small_config() {
  auto cfg = builtin_scenarios()[0];
  cfg.seeds = 4;
  cfg.lambda_grid = {0.25, 1.0, 2.0};
  cfg.mc_counts.nu_samples = 400;
  cfg.mc_counts.posterior_samples = 20000;
  cfg.mc_counts.resamples = 100;
  return cfg;
}

}  // namespace

TEST_CASE("builtin scenario catalog carries the four reference settings") {
  const auto catalog = builtin_scenarios();
  REQUIRE(catalog.size() == 4);

  CHECK(catalog[0].name == "no-misspec");
  CHECK(catalog[0].model.noise_var_model == 1.0);
  CHECK(catalog[0].model.basis_order_model == 10);
  CHECK(catalog[0].model.prior.cov(0, 0) == 2.0);

  CHECK(catalog[1].name == "misspec-likelihood-I");
  CHECK(catalog[1].model.basis_order_model == 20);
  CHECK(catalog[1].model.noise_var_model == 0.15);
  CHECK(catalog[1].model.prior.cov(0, 0) == 2.0);

  CHECK(catalog[2].name == "misspec-likelihood-II");
  CHECK(catalog[2].model.noise_var_model == 3.0);

  CHECK(catalog[3].name == "misspec-prior");
  CHECK(catalog[3].model.prior.cov(0, 0) == 0.5);

  for (const auto& cfg : catalog) {
    CHECK(cfg.n_train == 5);
    CHECK(cfg.seeds == 20);
    CHECK(cfg.data_gen.basis_order_true == 10);
    CHECK(cfg.data_gen.noise_var_true == 1.0);
    CHECK((cfg.data_gen.true_coeffs.array() == 1.0).all());
    bool has_one = false;
    for (const double l : cfg.lambda_grid) has_one = has_one || l == 1.0;
    CHECK(has_one);
  }
  CHECK(find_builtin_scenario(catalog, "misspec-prior") == &catalog[3]);
  CHECK(find_builtin_scenario(catalog, "nope") == nullptr);
}

TEST_CASE("scenario JSON round trip") {
  auto cfg = builtin_scenarios()[1];
  cfg.transforms = TransformSet::identity_mirror();
  const std::string text = scenario_to_json_string(cfg);
  const std::string path = "tmp_scenario.json";
  {
    std::ofstream out(path);
    out << text;
  }
  const ScenarioConfig back = load_scenario_json(path);
  CHECK(back.name == cfg.name);
  CHECK(back.model.basis_order_model == 20);
  CHECK(back.model.noise_var_model == 0.15);
  CHECK(back.model.prior.cov(0, 0) == 2.0);
  CHECK(back.n_train == 5);
  CHECK(back.seeds == cfg.seeds);
  CHECK(back.lambda_grid == cfg.lambda_grid);
  CHECK(back.mc_counts.nu_samples == cfg.mc_counts.nu_samples);
  CHECK((back.data_gen.true_coeffs - cfg.data_gen.true_coeffs).norm() == 0.0);
  REQUIRE(back.transforms.has_value());
  CHECK(back.transforms->size() == 2);
  CHECK(back.transforms->transforms[1].name == "mirror");
  std::remove(path.c_str());
}

TEST_CASE("run_sweep: records, invariants, medians, verdict") {
  const auto cfg = small_config();
  const std::string out = "tmp_sweep.csv";
  const SweepSummary summary = run_sweep(cfg, out, 7, 2);

  CHECK(summary.scenario == "no-misspec");
  CHECK(summary.records.size() == 12);  // 4 seeds x 3 lambdas
  REQUIRE(summary.per_lambda.size() == 3);
  CHECK(summary.per_lambda[1].lambda == 1.0);
  CHECK(summary.grad_at_one_per_seed.size() == 4);

  // Jensen and the train-gradient sign on every record.
  for (const auto& r : summary.records) {
    CHECK(r.bayes_test <= r.gibbs_test + 1e-9);
    CHECK(r.d_gibbs_train <= 1e-12);
  }
  // Per-seed monotone train loss along lambda.
  for (int s = 0; s < cfg.seeds; ++s) {
    double prev = 1e300;
    for (const auto& r : summary.records) {
      if (r.seed != s) continue;
      CHECK(r.gibbs_train_norm < prev);
      prev = r.gibbs_train_norm;
    }
  }

  const std::string text = slurp(out);
  CHECK(text.rfind("lambda,seed,gibbs_train_norm,gibbs_test,bayes_test,d_gibbs_train,"
                   "d_gibbs_test,d_bayes_test,d_bayes_stderr\n",
                   0) == 0);
  int lines = 0;
  for (const char c : text) lines += (c == '\n');
  CHECK(lines == 13);  // header + 12 records

  write_sweep_summary_json(summary, "tmp_sweep_summary.json");
  const std::string sj = slurp("tmp_sweep_summary.json");
  CHECK(sj.find("verdict_at_lambda_1") != std::string::npos);
  std::remove("tmp_sweep_summary.json");
  std::remove(out.c_str());
}

TEST_CASE("run_sweep verdict: misspec-likelihood-II reads as CPE at 20 seeds") {
  auto cfg = builtin_scenarios()[2];
  cfg.mc_counts.nu_samples = 1500;
  const SweepSummary summary = run_sweep(cfg, "tmp_sweep_m2.csv", 2024, 8);
  CHECK(summary.verdict_at_one.label == CpeLabel::CPE);
  CHECK(summary.verdict_at_one.grad_at_one < 0.0);
  CHECK(summary.verdict_at_one.threshold >= 3.0 * summary.verdict_at_one.std_err);
  std::remove("tmp_sweep_m2.csv");
}

TEST_CASE("run_sweep is byte-identical across thread counts") {
  const auto cfg = small_config();
  const SweepSummary s1 = run_sweep(cfg, "tmp_sweep_t1.csv", 7, 1);
  const SweepSummary s8 = run_sweep(cfg, "tmp_sweep_t8.csv", 7, 8);
  CHECK(slurp("tmp_sweep_t1.csv") == slurp("tmp_sweep_t8.csv"));
  CHECK(s1.verdict_at_one.grad_at_one == s8.verdict_at_one.grad_at_one);
  std::remove("tmp_sweep_t1.csv");
  std::remove("tmp_sweep_t8.csv");
}

TEST_CASE("run_sweep rejects malformed configs") {
  auto cfg = small_config();
  cfg.lambda_grid = {};
  CHECK_THROWS(run_sweep(cfg, "tmp_bad.csv", 1, 1));
  cfg.lambda_grid = {0.5, 2.0};  // no 1.0
  CHECK_THROWS(run_sweep(cfg, "tmp_bad.csv", 1, 1));
  cfg.lambda_grid = {1.0, 0.5};  // not ascending
  CHECK_THROWS(run_sweep(cfg, "tmp_bad.csv", 1, 1));
  cfg.lambda_grid = {0.5, 1.0};
  cfg.seeds = 0;
  CHECK_THROWS(run_sweep(cfg, "tmp_bad.csv", 1, 1));
}

TEST_CASE("run_grad_check: closed vs FD vs MC on the baseline scenario") {
  auto cfg = small_config();
  cfg.mc_counts.posterior_samples = 40000;
  cfg.mc_counts.nu_samples = 2000;
  const GradCheckReport report = run_grad_check(cfg, "tmp_gradcheck.csv", 3);
  CHECK(report.max_rel_err_gibbs <= 1e-5);
  CHECK(report.train_grads_nonpositive);
  CHECK(report.mc_within_3se);
  CHECK(report.pass);
  CHECK(report.rows.size() == 15);  // 5 lambdas x 3 losses

  const std::string text = slurp("tmp_gradcheck.csv");
  CHECK(text.rfind("lambda,loss,", 0) == 0);
  std::remove("tmp_gradcheck.csv");
}

TEST_CASE("run_da_compare: identity transforms change nothing") {
  auto cfg = small_config();
  cfg.seeds = 3;
  const DaCompareReport report = run_da_compare(cfg, TransformSet::identity_only(),
                                                "tmp_da_id.csv", 5, 2);
  for (const auto& r : report.rows) {
    CHECK(r.d_gibbs_plain == doctest::Approx(r.d_gibbs_da).epsilon(1e-12));
  }
  CHECK(report.da_strengthens_gibbs);  // equality counts as "at least as negative"
  std::remove("tmp_da_id.csv");
}

TEST_CASE("run_da_compare: mirror DA under a mirror-invariant truth strengthens") {
  // Data-starved regime: the mirrored copies carry genuine new information.
  auto cfg = small_config();
  cfg.seeds = 20;
  cfg.mc_counts.nu_samples = 1000;
  cfg.data_gen = mirror_invariant_spec(10, 1.0);
  const DaCompareReport inv = run_da_compare(cfg, TransformSet::identity_mirror(),
                                             "tmp_da_mirror.csv", 11, 4);
  CHECK(inv.median_paired_gibbs_diff <= 0.0);
  CHECK(inv.da_strengthens_gibbs);
  std::remove("tmp_da_mirror.csv");

  // Harmful DA: an anti-symmetric (sine-only) truth, for which the mirror
  // transform cancels every informative component of the pseudo likelihood.
  auto harm = cfg;
  harm.n_train = 15;
  harm.data_gen.true_coeffs.setZero();
  for (int k = 3; k <= 10; k += 2) harm.data_gen.true_coeffs[k - 1] = 1.0;
  harm.data_gen.noise_var_true = 0.25;
  const DaCompareReport bad = run_da_compare(harm, TransformSet::identity_mirror(),
                                             "tmp_da_harm.csv", 11, 4);
  CHECK(bad.median_paired_gibbs_diff > 0.0);
  CHECK_FALSE(bad.da_strengthens_gibbs);
  std::remove("tmp_da_harm.csv");
}

TEST_CASE("run_pacbayes: bounds hold and the optimal-lambda routes agree loosely") {
  auto cfg = small_config();
  cfg.mc_counts.resamples = 150;
  const PacBayesReport report = run_pacbayes(cfg, "tmp_pb", 13);
  CHECK(report.all_bounds_hold);
  REQUIRE(report.bounds.size() == 5);
  for (const auto& b : report.bounds) CHECK(b.holds);

  CHECK(report.lambda_star_variance > 0.0);
  CHECK(report.lambda_star_intersection.lambda > 0.0);
  // The two procedures optimize different surrogates; on the baseline
  // scenario they land within a factor of two of each other.
  const double ratio = report.lambda_star_variance / report.lambda_star_intersection.lambda;
  CHECK(ratio >= 0.5);
  CHECK(ratio <= 2.0);

  // J at the smallest grid lambda is statistically zero.
  CHECK(std::abs(report.cgf_prior_mean.values[0]) <=
        5.0 * report.cgf_prior_mean.std_errs[0]);

  CHECK(std::abs(report.ppv.mc / report.ppv.closed_form - 1.0) <= 0.2);

  for (const char* path : {"tmp_pb.J.prior-mean.csv", "tmp_pb.J.prior-draw.csv",
                           "tmp_pb.J.mle.csv", "tmp_pb.R.csv", "tmp_pb.report.json"}) {
    const std::string text = slurp(path);
    CHECK(!text.empty());
    std::remove(path);
  }
  const std::string rcsv_header = "lambda,R,R_stderr";
  (void)rcsv_header;
}
