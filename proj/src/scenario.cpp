#include "cpe/scenario.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <mutex>
#include <stdexcept>
#include <thread>

namespace cpe {

namespace {

using nlohmann::json;

// Stream-id layout: a tag byte in the top bits keeps every consumer of the
// master seed on a distinct, schedule-independent stream.
constexpr std::uint64_t kTagDataset = 1ULL << 56;
constexpr std::uint64_t kTagSweepGrad = 2ULL << 56;
constexpr std::uint64_t kTagGradCheck = 3ULL << 56;
constexpr std::uint64_t kTagDaCompare = 4ULL << 56;
constexpr std::uint64_t kTagPacBayes = 5ULL << 56;

std::uint64_t seed_stream(int seed) { return kTagDataset | static_cast<std::uint64_t>(seed); }

// Locale-independent, 17 significant digits (round-trippable doubles).
std::string fmt17(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v,
                                 std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

void parallel_for(int num_tasks, int threads, const std::function<void(int)>& fn) {
  threads = std::max(1, std::min(threads, num_tasks));
  if (threads == 1) {
    for (int i = 0; i < num_tasks; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(threads));
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&]() {
      for (;;) {
        const int i = next.fetch_add(1);
        if (i >= num_tasks) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

void validate_config(const ScenarioConfig& cfg) {
  if (cfg.lambda_grid.empty()) throw std::invalid_argument("scenario: empty lambda grid");
  bool has_one = false;
  for (std::size_t i = 0; i < cfg.lambda_grid.size(); ++i) {
    if (cfg.lambda_grid[i] < 0.0) throw std::invalid_argument("scenario: lambda < 0 in grid");
    if (i > 0 && cfg.lambda_grid[i] <= cfg.lambda_grid[i - 1]) {
      throw std::invalid_argument("scenario: lambda grid must be strictly ascending");
    }
    if (std::abs(cfg.lambda_grid[i] - 1.0) < 1e-12) has_one = true;
  }
  if (!has_one) throw std::invalid_argument("scenario: lambda grid must contain 1");
  if (cfg.seeds < 1) throw std::invalid_argument("scenario: seeds must be >= 1");
  if (cfg.n_train < 0) throw std::invalid_argument("scenario: n_train must be >= 0");
}

double median_stderr(const std::vector<double>& values) {
  if (values.size() < 2) return 0.0;
  return bootstrap_median_stderr(values);
}

ScenarioConfig make_scenario(const std::string& name, int k_model, double noise_var_model,
                             double prior_var) {
  ScenarioConfig cfg;
  cfg.name = name;
  cfg.data_gen.basis_order_true = 10;
  cfg.data_gen.true_coeffs = Eigen::VectorXd::Ones(10);
  cfg.data_gen.noise_var_true = 1.0;
  cfg.model.basis_order_model = k_model;
  cfg.model.noise_var_model = noise_var_model;
  cfg.model.prior = Gaussian::isotropic(k_model, 0.0, prior_var);
  cfg.n_train = 5;
  cfg.lambda_grid = {0.1, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 4.0, 6.0, 8.0};
  cfg.seeds = 20;
  cfg.quadrature_order = 128;
  return cfg;
}

}  // namespace

std::vector<ScenarioConfig> builtin_scenarios() {
  std::vector<ScenarioConfig> catalog;
  catalog.push_back(make_scenario("no-misspec", 10, 1.0, 2.0));
  catalog.push_back(make_scenario("misspec-likelihood-I", 20, 0.15, 2.0));
  catalog.push_back(make_scenario("misspec-likelihood-II", 10, 3.0, 2.0));
  catalog.push_back(make_scenario("misspec-prior", 10, 1.0, 0.5));
  return catalog;
}

const ScenarioConfig* find_builtin_scenario(const std::vector<ScenarioConfig>& catalog,
                                            const std::string& name) {
  for (const auto& cfg : catalog) {
    if (cfg.name == name) return &cfg;
  }
  return nullptr;
}

ScenarioConfig load_scenario_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_scenario_json: cannot open " + path);
  json j;
  in >> j;

  ScenarioConfig cfg;
  cfg.name = j.at("name").get<std::string>();

  const json& dg = j.at("data_gen");
  cfg.data_gen.basis_order_true = dg.at("basis_order_true").get<int>();
  if (dg.at("true_coeffs").is_array()) {
    const auto coeffs = dg.at("true_coeffs").get<std::vector<double>>();
    if (static_cast<int>(coeffs.size()) != cfg.data_gen.basis_order_true) {
      throw std::runtime_error("load_scenario_json: true_coeffs length != basis_order_true");
    }
    cfg.data_gen.true_coeffs =
        Eigen::Map<const Eigen::VectorXd>(coeffs.data(), static_cast<Eigen::Index>(coeffs.size()));
  } else {
    cfg.data_gen.true_coeffs = Eigen::VectorXd::Constant(
        cfg.data_gen.basis_order_true, dg.at("true_coeffs").get<double>());
  }
  cfg.data_gen.noise_var_true = dg.at("noise_var_true").get<double>();
  if (dg.value("input_law", std::string("uniform[-1,1]")) != "uniform[-1,1]") {
    throw std::runtime_error("load_scenario_json: unsupported input_law");
  }

  const json& mj = j.at("model");
  cfg.model.basis_order_model = mj.at("basis_order_model").get<int>();
  cfg.model.noise_var_model = mj.at("noise_var_model").get<double>();
  const double prior_var = mj.at("prior_var").get<double>();
  const double prior_mean = mj.value("prior_mean", 0.0);
  cfg.model.prior = Gaussian::isotropic(cfg.model.basis_order_model, prior_mean, prior_var);

  cfg.n_train = j.at("n_train").get<int>();
  cfg.lambda_grid = j.at("lambda_grid").get<std::vector<double>>();
  cfg.seeds = j.value("seeds", 20);
  if (j.contains("mc_counts")) {
    const json& mc = j.at("mc_counts");
    cfg.mc_counts.nu_samples = mc.value("nu_samples", cfg.mc_counts.nu_samples);
    cfg.mc_counts.posterior_samples =
        mc.value("posterior_samples", cfg.mc_counts.posterior_samples);
    cfg.mc_counts.resamples = mc.value("resamples", cfg.mc_counts.resamples);
  }
  cfg.quadrature_order = j.value("quadrature_order", 128);
  if (j.contains("transforms")) {
    const json& tj = j.at("transforms");
    cfg.transforms = TransformSet::from_names(
        tj.at("names").get<std::vector<std::string>>(),
        tj.value("weights", std::vector<double>{}));
  }
  validate_config(cfg);
  return cfg;
}

std::string scenario_to_json_string(const ScenarioConfig& cfg) {
  json j;
  j["name"] = cfg.name;
  j["data_gen"] = {
      {"basis_order_true", cfg.data_gen.basis_order_true},
      {"true_coeffs",
       std::vector<double>(cfg.data_gen.true_coeffs.data(),
                           cfg.data_gen.true_coeffs.data() + cfg.data_gen.true_coeffs.size())},
      {"noise_var_true", cfg.data_gen.noise_var_true},
      {"input_law", "uniform[-1,1]"}};
  j["model"] = {{"basis_order_model", cfg.model.basis_order_model},
                {"noise_var_model", cfg.model.noise_var_model},
                {"prior_mean", cfg.model.prior.mean[0]},
                {"prior_var", cfg.model.prior.cov(0, 0)}};
  j["n_train"] = cfg.n_train;
  j["lambda_grid"] = cfg.lambda_grid;
  j["seeds"] = cfg.seeds;
  j["mc_counts"] = {{"nu_samples", cfg.mc_counts.nu_samples},
                    {"posterior_samples", cfg.mc_counts.posterior_samples},
                    {"resamples", cfg.mc_counts.resamples}};
  j["quadrature_order"] = cfg.quadrature_order;
  if (cfg.transforms) {
    std::vector<std::string> names;
    for (const auto& t : cfg.transforms->transforms) names.push_back(t.name);
    j["transforms"] = {{"names", names},
                       {"weights", std::vector<double>(cfg.transforms->weights.data(),
                                                       cfg.transforms->weights.data() +
                                                           cfg.transforms->weights.size())}};
  }
  return j.dump(2);
}

SweepSummary run_sweep(const ScenarioConfig& cfg, const std::string& out_csv,
                       std::uint64_t master_seed, int threads) {
  validate_config(cfg);
  const QuadratureRule quad = gauss_legendre(cfg.quadrature_order);
  const int num_lambdas = static_cast<int>(cfg.lambda_grid.size());

  std::vector<std::vector<SweepRecord>> per_seed(static_cast<std::size_t>(cfg.seeds));
  parallel_for(cfg.seeds, threads, [&](int s) {
    RandomStream data_rng(master_seed, seed_stream(s));
    const Dataset data = sample_dataset(cfg.data_gen, cfg.n_train, data_rng);
    auto& rows = per_seed[static_cast<std::size_t>(s)];
    rows.resize(static_cast<std::size_t>(num_lambdas));
    double prev_train_sum = 0.0;
    for (int i = 0; i < num_lambdas; ++i) {
      const double lambda = cfg.lambda_grid[static_cast<std::size_t>(i)];
      const TemperedPosterior post = likelihood_tempered(cfg.model, data, lambda);
      const LossReport losses = loss_report(post, cfg.data_gen, quad);
      RandomStream grad_rng(master_seed,
                            kTagSweepGrad | (static_cast<std::uint64_t>(s) << 20) |
                                static_cast<std::uint64_t>(i));
      const GradientReport grads =
          gradient_report(post, cfg.data_gen, quad, grad_rng, cfg.mc_counts.nu_samples);

      if (grads.d_gibbs_train > 1e-12) {
        throw std::runtime_error(
            "run_sweep: train-loss gradient positive; violates the exact identity "
            "d/dlambda = -V(ln p(D|theta)) <= 0 (seed " +
            std::to_string(s) + ", lambda " + std::to_string(lambda) + ")");
      }
      if (losses.bayes_test > losses.gibbs_test + 1e-9) {
        throw std::runtime_error(
            "run_sweep: Jensen inequality violated (Bayes loss above Gibbs loss) at seed " +
            std::to_string(s) + ", lambda " + std::to_string(lambda));
      }
      if (i > 0 && cfg.n_train > 0 && losses.gibbs_train_sum > prev_train_sum + 1e-9) {
        throw std::runtime_error(
            "run_sweep: train loss increased along lambda; violates the monotone "
            "train-loss corollary of the negative train gradient (seed " +
            std::to_string(s) + ")");
      }
      prev_train_sum = losses.gibbs_train_sum;

      SweepRecord& r = rows[static_cast<std::size_t>(i)];
      r.lambda = lambda;
      r.seed = s;
      r.gibbs_train_norm = losses.gibbs_train_norm;
      r.gibbs_test = losses.gibbs_test;
      r.bayes_test = losses.bayes_test;
      r.d_gibbs_train = grads.d_gibbs_train;
      r.d_gibbs_test = grads.d_gibbs_test;
      r.d_bayes_test = grads.d_bayes_test;
      r.d_bayes_stderr = grads.se_bayes_test;
    }
  });

  std::ofstream out(out_csv);
  if (!out) throw std::runtime_error("run_sweep: cannot open " + out_csv);
  out << "lambda,seed,gibbs_train_norm,gibbs_test,bayes_test,d_gibbs_train,d_gibbs_test,"
         "d_bayes_test,d_bayes_stderr\n";
  for (const auto& rows : per_seed) {
    for (const auto& r : rows) {
      out << fmt17(r.lambda) << ',' << r.seed << ',' << fmt17(r.gibbs_train_norm) << ','
          << fmt17(r.gibbs_test) << ',' << fmt17(r.bayes_test) << ','
          << fmt17(r.d_gibbs_train) << ',' << fmt17(r.d_gibbs_test) << ','
          << fmt17(r.d_bayes_test) << ',' << fmt17(r.d_bayes_stderr) << '\n';
    }
  }
  out.close();

  SweepSummary summary;
  summary.scenario = cfg.name;
  summary.seeds = cfg.seeds;
  for (const auto& rows : per_seed) {
    summary.records.insert(summary.records.end(), rows.begin(), rows.end());
  }
  for (int i = 0; i < num_lambdas; ++i) {
    std::vector<double> train, test, bayes, dtrain, dtest, dbayes;
    for (int s = 0; s < cfg.seeds; ++s) {
      const SweepRecord& r = per_seed[static_cast<std::size_t>(s)][static_cast<std::size_t>(i)];
      train.push_back(r.gibbs_train_norm);
      test.push_back(r.gibbs_test);
      bayes.push_back(r.bayes_test);
      dtrain.push_back(r.d_gibbs_train);
      dtest.push_back(r.d_gibbs_test);
      dbayes.push_back(r.d_bayes_test);
    }
    LambdaMedians m;
    m.lambda = cfg.lambda_grid[static_cast<std::size_t>(i)];
    m.gibbs_train_norm = median_of(train);
    m.gibbs_test = median_of(test);
    m.bayes_test = median_of(bayes);
    m.d_gibbs_train = median_of(dtrain);
    m.d_gibbs_test = median_of(dtest);
    m.d_bayes_test = median_of(dbayes);
    summary.per_lambda.push_back(m);
    if (std::abs(m.lambda - 1.0) < 1e-12) {
      summary.grad_at_one_per_seed = dbayes;
      double se = median_stderr(dbayes);
      if (cfg.seeds == 1) {
        se = per_seed[0][static_cast<std::size_t>(i)].d_bayes_stderr;
      }
      summary.verdict_at_one = make_cpe_verdict(median_of(dbayes), se);
    }
  }
  return summary;
}

void write_sweep_summary_json(const SweepSummary& summary, const std::string& path) {
  json j;
  j["scenario"] = summary.scenario;
  j["seeds"] = summary.seeds;
  json grid = json::array();
  for (const auto& m : summary.per_lambda) {
    grid.push_back({{"lambda", m.lambda},
                    {"gibbs_train_norm", m.gibbs_train_norm},
                    {"gibbs_test", m.gibbs_test},
                    {"bayes_test", m.bayes_test},
                    {"d_gibbs_train", m.d_gibbs_train},
                    {"d_gibbs_test", m.d_gibbs_test},
                    {"d_bayes_test", m.d_bayes_test}});
  }
  j["per_lambda_medians"] = grid;
  j["verdict_at_lambda_1"] = {{"grad", summary.verdict_at_one.grad_at_one},
                              {"std_err", summary.verdict_at_one.std_err},
                              {"threshold", summary.verdict_at_one.threshold},
                              {"label", to_string(summary.verdict_at_one.label)}};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_sweep_summary_json: cannot open " + path);
  out << j.dump(2) << '\n';
}

GradCheckReport run_grad_check(const ScenarioConfig& cfg, const std::string& out_csv,
                               std::uint64_t master_seed) {
  validate_config(cfg);
  const QuadratureRule quad = gauss_legendre(cfg.quadrature_order);
  RandomStream data_rng(master_seed, seed_stream(0));
  const Dataset data = sample_dataset(cfg.data_gen, cfg.n_train, data_rng);
  const std::vector<double> lambdas = {0.25, 0.5, 1.0, 2.0, 4.0};
  const double h = 1e-4;

  const auto train_sum_curve = [&](double lam) {
    return gibbs_losses(likelihood_tempered(cfg.model, data, lam), cfg.data_gen, quad)
        .train_sum;
  };
  const auto test_curve = [&](double lam) {
    return gibbs_losses(likelihood_tempered(cfg.model, data, lam), cfg.data_gen, quad).test;
  };
  const auto bayes_curve = [&](double lam) {
    return bayes_loss(likelihood_tempered(cfg.model, data, lam), cfg.data_gen, quad);
  };

  GradCheckReport report;
  const QuadraticForm loss_quad = expected_loss_quadratic(cfg.model, cfg.data_gen, quad);
  int lam_idx = 0;
  for (const double lam : lambdas) {
    const TemperedPosterior post = likelihood_tempered(cfg.model, data, lam);
    const QuadraticForm nll = nll_sum_quadratic(cfg.model, data);

    // Monte Carlo Gibbs gradients from one posterior sample cloud, batched
    // for standard errors.
    RandomStream mc_rng(master_seed, kTagGradCheck | static_cast<std::uint64_t>(lam_idx));
    const int k = cfg.mc_counts.posterior_samples;
    const Eigen::MatrixXd thetas = sample(post.gaussian, mc_rng, k);
    const int groups = 20;
    std::vector<double> var_g, cov_g;
    const int base = k / groups;
    for (int g = 0; g < groups; ++g) {
      const int len = (g < groups - 1) ? base : k - g * base;
      std::vector<double> nv(static_cast<std::size_t>(len)), lv(static_cast<std::size_t>(len));
      for (int j = 0; j < len; ++j) {
        const Eigen::VectorXd th = thetas.row(g * base + j).transpose();
        nv[static_cast<std::size_t>(j)] = nll(th);
        lv[static_cast<std::size_t>(j)] = loss_quad(th);
      }
      const double mn = mean_of(nv), ml = mean_of(lv);
      double vv = 0.0, cv = 0.0;
      for (int j = 0; j < len; ++j) {
        vv += (nv[static_cast<std::size_t>(j)] - mn) * (nv[static_cast<std::size_t>(j)] - mn);
        cv += (nv[static_cast<std::size_t>(j)] - mn) * (lv[static_cast<std::size_t>(j)] - ml);
      }
      var_g.push_back(-vv / (len - 1));
      cov_g.push_back(-cv / (len - 1));
    }

    struct Entry {
      const char* name;
      double closed, mc, mc_se, fd;
    };
    RandomStream bayes_rng(master_seed,
                           kTagGradCheck | (1ULL << 32) | static_cast<std::uint64_t>(lam_idx));
    const McEstimate bayes_mc =
        grad_bayes_test(post, cfg.data_gen, bayes_rng, cfg.mc_counts.nu_samples);
    const double fd_bayes = finite_difference(bayes_curve, lam, h);
    const Entry entries[3] = {
        {"gibbs_train_sum", grad_empirical_gibbs(post), mean_of(var_g),
         stderr_of_mean(var_g), finite_difference(train_sum_curve, lam, h)},
        {"gibbs_test", grad_gibbs_test(post, cfg.data_gen, quad), mean_of(cov_g),
         stderr_of_mean(cov_g), finite_difference(test_curve, lam, h)},
        {"bayes_test", fd_bayes, bayes_mc.value, bayes_mc.std_err, fd_bayes},
    };
    for (const Entry& e : entries) {
      GradCheckRow row;
      row.lambda = lam;
      row.loss = e.name;
      row.closed_form = e.closed;
      row.mc = e.mc;
      row.mc_stderr = e.mc_se;
      row.fd = e.fd;
      row.rel_err_closed_vs_fd =
          std::abs(e.closed - e.fd) / std::max({std::abs(e.closed), std::abs(e.fd), 1e-300});
      row.z_mc_vs_closed = e.mc_se > 0.0 ? std::abs(e.mc - e.closed) / e.mc_se : 0.0;
      if (row.loss != "bayes_test") {
        report.max_rel_err_gibbs = std::max(report.max_rel_err_gibbs, row.rel_err_closed_vs_fd);
      }
      if (row.loss == "gibbs_train_sum" && (e.closed > 0.0 || e.fd > 1e-9)) {
        report.train_grads_nonpositive = false;
      }
      if (row.z_mc_vs_closed > 3.0) report.mc_within_3se = false;
      report.rows.push_back(row);
    }
    ++lam_idx;
  }
  report.pass =
      report.max_rel_err_gibbs <= 1e-5 && report.train_grads_nonpositive && report.mc_within_3se;

  std::ofstream out(out_csv);
  if (!out) throw std::runtime_error("run_grad_check: cannot open " + out_csv);
  out << "lambda,loss,closed_form,mc,mc_stderr,fd,rel_err_closed_vs_fd,z_mc_vs_closed\n";
  for (const auto& r : report.rows) {
    out << fmt17(r.lambda) << ',' << r.loss << ',' << fmt17(r.closed_form) << ','
        << fmt17(r.mc) << ',' << fmt17(r.mc_stderr) << ',' << fmt17(r.fd) << ','
        << fmt17(r.rel_err_closed_vs_fd) << ',' << fmt17(r.z_mc_vs_closed) << '\n';
  }
  return report;
}

DaCompareReport run_da_compare(const ScenarioConfig& cfg, const TransformSet& transforms,
                               const std::string& out_csv, std::uint64_t master_seed,
                               int threads) {
  validate_config(cfg);
  const QuadratureRule quad = gauss_legendre(cfg.quadrature_order);
  DaCompareReport report;
  report.rows.resize(static_cast<std::size_t>(cfg.seeds));
  parallel_for(cfg.seeds, threads, [&](int s) {
    RandomStream data_rng(master_seed, seed_stream(s));
    const Dataset data = sample_dataset(cfg.data_gen, cfg.n_train, data_rng);
    const TemperedPosterior plain = likelihood_tempered(cfg.model, data, 1.0);
    const TemperedPosterior da = da_tempered(cfg.model, data, transforms, 1.0);
    DaCompareSeedRow row;
    row.seed = s;
    row.d_gibbs_plain = grad_gibbs_test(plain, cfg.data_gen, quad);
    row.d_gibbs_da = grad_gibbs_test(da, cfg.data_gen, quad);
    // Common random numbers: the same nu draws feed both posteriors.
    RandomStream rng_plain(master_seed, kTagDaCompare | static_cast<std::uint64_t>(s));
    RandomStream rng_da(master_seed, kTagDaCompare | static_cast<std::uint64_t>(s));
    const McEstimate bp = grad_bayes_test(plain, cfg.data_gen, rng_plain,
                                          cfg.mc_counts.nu_samples);
    const McEstimate bd = grad_bayes_test(da, cfg.data_gen, rng_da, cfg.mc_counts.nu_samples);
    row.d_bayes_plain = bp.value;
    row.d_bayes_plain_se = bp.std_err;
    row.d_bayes_da = bd.value;
    row.d_bayes_da_se = bd.std_err;
    report.rows[static_cast<std::size_t>(s)] = row;
  });

  std::vector<double> gp, gd, bp, bd, paired;
  for (const auto& r : report.rows) {
    gp.push_back(r.d_gibbs_plain);
    gd.push_back(r.d_gibbs_da);
    bp.push_back(r.d_bayes_plain);
    bd.push_back(r.d_bayes_da);
    paired.push_back(r.d_gibbs_da - r.d_gibbs_plain);
  }
  report.median_d_gibbs_plain = median_of(gp);
  report.median_d_gibbs_da = median_of(gd);
  report.median_d_bayes_plain = median_of(bp);
  report.median_d_bayes_da = median_of(bd);
  report.median_paired_gibbs_diff = median_of(paired);
  report.da_strengthens_gibbs = report.median_paired_gibbs_diff <= 0.0;

  std::ofstream out(out_csv);
  if (!out) throw std::runtime_error("run_da_compare: cannot open " + out_csv);
  out << "seed,d_gibbs_plain,d_gibbs_da,d_bayes_plain,d_bayes_plain_stderr,d_bayes_da,"
         "d_bayes_da_stderr\n";
  for (const auto& r : report.rows) {
    out << r.seed << ',' << fmt17(r.d_gibbs_plain) << ',' << fmt17(r.d_gibbs_da) << ','
        << fmt17(r.d_bayes_plain) << ',' << fmt17(r.d_bayes_plain_se) << ','
        << fmt17(r.d_bayes_da) << ',' << fmt17(r.d_bayes_da_se) << '\n';
  }
  return report;
}

namespace {

void write_curve_csv(const std::string& path, const char* value_name,
                     const Eigen::VectorXd& lambdas, const Eigen::VectorXd& values,
                     const Eigen::VectorXd& std_errs) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("run_pacbayes: cannot open " + path);
  out << "lambda," << value_name << ',' << value_name << "_stderr\n";
  for (int i = 0; i < lambdas.size(); ++i) {
    out << fmt17(lambdas[i]) << ',' << fmt17(values[i]) << ',' << fmt17(std_errs[i]) << '\n';
  }
}

json bound_to_json(const BoundReport& b) {
  return {{"lambda", b.lambda},   {"lhs", b.lhs},
          {"train_term", b.train_term}, {"kl_term", b.kl_term},
          {"r_term", b.r_term},   {"rhs", b.rhs},
          {"mc_slack", b.mc_slack}, {"holds", b.holds}};
}

}  // namespace

PacBayesReport run_pacbayes(const ScenarioConfig& cfg, const std::string& out_prefix,
                            std::uint64_t master_seed) {
  validate_config(cfg);
  const QuadratureRule quad = gauss_legendre(cfg.quadrature_order);
  const int n = cfg.n_train;
  const int M = std::max(100, cfg.mc_counts.resamples);
  const int prior_samples = 200;

  // Geometric lambda grid, 20 points spanning 1e-3 .. 8.
  Eigen::VectorXd grid(20);
  for (int i = 0; i < 20; ++i) {
    grid[i] = 1e-3 * std::pow(8.0 / 1e-3, static_cast<double>(i) / 19.0);
  }

  PacBayesReport report;

  RandomStream data_rng(master_seed, seed_stream(0));
  const Dataset data = sample_dataset(cfg.data_gen, n, data_rng);

  const Eigen::VectorXd theta_mean = cfg.model.prior.mean;
  RandomStream draw_rng(master_seed, kTagPacBayes | 1);
  const Eigen::VectorXd theta_draw = sample(cfg.model.prior, draw_rng, 1).row(0).transpose();
  const Eigen::VectorXd theta_mle = min_norm_mle(cfg.model, data);

  RandomStream cgf_rng(master_seed, kTagPacBayes | 2);
  report.cgf_prior_mean =
      empirical_cgf(cfg.model, cfg.data_gen, theta_mean, grid, M, n, quad, cgf_rng);
  RandomStream cgf_rng2(master_seed, kTagPacBayes | 3);
  report.cgf_prior_draw =
      empirical_cgf(cfg.model, cfg.data_gen, theta_draw, grid, M, n, quad, cgf_rng2);
  RandomStream cgf_rng3(master_seed, kTagPacBayes | 4);
  report.cgf_mle =
      empirical_cgf(cfg.model, cfg.data_gen, theta_mle, grid, M, n, quad, cgf_rng3);

  RandomStream r_rng(master_seed, kTagPacBayes | 5);
  report.r_estimate =
      empirical_r(cfg.model, cfg.data_gen, prior_samples, grid, M, n, quad, r_rng);

  const std::vector<double> bound_lambdas = {0.1, 0.5, 1.0, 2.0, 4.0};
  report.all_bounds_hold = true;
  int bidx = 0;
  for (const double lam : bound_lambdas) {
    RandomStream b_rng(master_seed, kTagPacBayes | (16ULL + static_cast<std::uint64_t>(bidx)));
    const RhoBuilder rho = [&](const Dataset& d) {
      return likelihood_tempered(cfg.model, d, lam).gaussian;
    };
    const BoundReport b =
        alquier_expectation_bound(cfg.model, cfg.data_gen, lam, rho, M, n, quad, b_rng);
    report.all_bounds_hold = report.all_bounds_hold && b.holds;
    report.bounds.push_back(b);
    ++bidx;
  }

  // E_D[KL(rho_1 | pi)] for the Bayesian posterior, and E_pi[V_nu(loss)]
  // with the closed-form per-draw variance.
  RandomStream kl_rng(master_seed, kTagPacBayes | 6);
  std::vector<double> kls(static_cast<std::size_t>(M));
  for (int j = 0; j < M; ++j) {
    const Dataset d = sample_dataset(cfg.data_gen, n, kl_rng);
    kls[static_cast<std::size_t>(j)] =
        kl_divergence(likelihood_tempered(cfg.model, d, 1.0).gaussian, cfg.model.prior);
  }
  report.kl_expected = mean_of(kls);
  RandomStream pv_rng(master_seed, kTagPacBayes | 7);
  const Eigen::MatrixXd prior_draws = sample(cfg.model.prior, pv_rng, prior_samples);
  double vsum = 0.0;
  for (int s = 0; s < prior_samples; ++s) {
    vsum += loss_variance_under_nu(cfg.model, cfg.data_gen, prior_draws.row(s).transpose(),
                                   quad);
  }
  report.prior_loss_variance = vsum / prior_samples;
  report.lambda_star_variance =
      optimal_lambda_variance(report.kl_expected, n, report.prior_loss_variance);
  report.lambda_star_intersection = lambda_intersection_search(
      report.r_estimate.lambdas, report.r_estimate.values, report.kl_expected, n);

  RandomStream ppv_rng(master_seed, kTagPacBayes | 8);
  report.ppv = prior_predictive_variance(cfg.model, cfg.data_gen, 100, M, n, quad, ppv_rng);

  write_curve_csv(out_prefix + ".J.prior-mean.csv", "J", report.cgf_prior_mean.lambdas,
                  report.cgf_prior_mean.values, report.cgf_prior_mean.std_errs);
  write_curve_csv(out_prefix + ".J.prior-draw.csv", "J", report.cgf_prior_draw.lambdas,
                  report.cgf_prior_draw.values, report.cgf_prior_draw.std_errs);
  write_curve_csv(out_prefix + ".J.mle.csv", "J", report.cgf_mle.lambdas,
                  report.cgf_mle.values, report.cgf_mle.std_errs);
  write_curve_csv(out_prefix + ".R.csv", "R", report.r_estimate.lambdas,
                  report.r_estimate.values, report.r_estimate.std_errs);

  json j;
  j["scenario"] = cfg.name;
  json bounds = json::array();
  for (const auto& b : report.bounds) bounds.push_back(bound_to_json(b));
  j["bounds"] = bounds;
  j["all_bounds_hold"] = report.all_bounds_hold;
  j["kl_expected"] = report.kl_expected;
  j["prior_loss_variance"] = report.prior_loss_variance;
  j["lambda_star_variance"] = report.lambda_star_variance;
  j["lambda_star_intersection"] = {{"lambda", report.lambda_star_intersection.lambda},
                                   {"objective", report.lambda_star_intersection.objective},
                                   {"boundary", report.lambda_star_intersection.boundary}};
  j["prior_predictive_variance"] = {{"mc", report.ppv.mc},
                                    {"closed_form", report.ppv.closed_form}};
  std::ofstream jout(out_prefix + ".report.json");
  if (!jout) throw std::runtime_error("run_pacbayes: cannot open " + out_prefix + ".report.json");
  jout << j.dump(2) << '\n';
  return report;
}

}  // namespace cpe
