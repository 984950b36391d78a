#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cpe/scenario.hpp"

namespace {

struct CommonOptions {
  std::string scenario = "no-misspec";
  int seeds = -1;
  std::uint64_t master_seed = 0;
  std::string lambda_grid;
  std::string out;
  int mc_nu = -1;
  int mc_post = -1;
  int quad_order = -1;
  int threads = 1;
};

void add_common(CLI::App* cmd, CommonOptions* opt) {
  cmd->add_option("--scenario", opt->scenario, "Builtin scenario name or JSON config path");
  cmd->add_option("--seeds", opt->seeds, "Number of dataset seeds");
  cmd->add_option("--master-seed", opt->master_seed, "Master seed (u64)");
  cmd->add_option("--lambda-grid", opt->lambda_grid, "Comma-separated ascending grid with 1");
  cmd->add_option("--out", opt->out, "Output path (CSV, or prefix for pacbayes)");
  cmd->add_option("--mc-nu", opt->mc_nu, "Fresh nu-draws per Bayes gradient");
  cmd->add_option("--mc-post", opt->mc_post, "Posterior draws for MC cross-checks");
  cmd->add_option("--quad-order", opt->quad_order, "Gauss-Legendre order");
  cmd->add_option("--threads", opt->threads, "Worker threads");
}

cpe::ScenarioConfig resolve_scenario(const CommonOptions& opt) {
  const auto catalog = cpe::builtin_scenarios();
  cpe::ScenarioConfig cfg;
  if (const auto* found = cpe::find_builtin_scenario(catalog, opt.scenario)) {
    cfg = *found;
  } else {
    try {
      cfg = cpe::load_scenario_json(opt.scenario);
    } catch (const std::exception& e) {
      std::string names;
      for (const auto& c : catalog) names += " " + c.name;
      throw std::runtime_error(std::string(e.what()) +
                               "\n'" + opt.scenario +
                               "' is neither a builtin scenario (" + names.substr(1) +
                               ") nor a readable JSON config");
    }
  }
  if (opt.seeds > 0) cfg.seeds = opt.seeds;
  if (opt.mc_nu > 0) cfg.mc_counts.nu_samples = opt.mc_nu;
  if (opt.mc_post > 0) cfg.mc_counts.posterior_samples = opt.mc_post;
  if (opt.quad_order > 0) cfg.quadrature_order = opt.quad_order;
  if (!opt.lambda_grid.empty()) {
    std::vector<double> grid;
    std::size_t pos = 0;
    const std::string& s = opt.lambda_grid;
    while (pos < s.size()) {
      std::size_t next = s.find(',', pos);
      if (next == std::string::npos) next = s.size();
      grid.push_back(std::stod(s.substr(pos, next - pos)));
      pos = next + 1;
    }
    cfg.lambda_grid = grid;
  }
  return cfg;
}

std::string default_out(const CommonOptions& opt, const std::string& stem) {
  if (!opt.out.empty()) return opt.out;
  return stem + ".csv";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Exact tempered inference for conjugate Gaussian linear regression:\n"
               "lambda sweeps, gradient checks, data-augmentation comparisons, and\n"
               "PAC-Bayes diagnostics."};
  app.require_subcommand(1);

  CommonOptions opt;

  auto* scenarios_cmd = app.add_subcommand("scenarios", "List the builtin scenario catalog");
  bool as_json = false;
  scenarios_cmd->add_flag("--json", as_json, "Print full configs as JSON");

  auto* sweep_cmd = app.add_subcommand("sweep", "Lambda sweep: losses + gradients per seed");
  add_common(sweep_cmd, &opt);

  auto* grad_cmd = app.add_subcommand("grad-check",
                                      "Closed-form vs finite-difference vs MC gradients");
  add_common(grad_cmd, &opt);

  auto* da_cmd = app.add_subcommand("da-compare",
                                    "Gradients at lambda=1 with and without data "
                                    "augmentation");
  add_common(da_cmd, &opt);
  std::string transforms_arg = "identity,mirror";
  bool mirror_invariant = false;
  da_cmd->add_option("--transforms", transforms_arg,
                     "Comma-separated transform names (identity, mirror)");
  da_cmd->add_flag("--mirror-invariant", mirror_invariant,
                   "Replace the data-generating spec by the mirror-invariant one");

  auto* pb_cmd = app.add_subcommand("pacbayes",
                                    "CGF/R grids, expectation bound, optimal lambda");
  add_common(pb_cmd, &opt);

  CLI11_PARSE(app, argc, argv);

  try {
    if (scenarios_cmd->parsed()) {
      for (const auto& cfg : cpe::builtin_scenarios()) {
        if (as_json) {
          std::cout << cpe::scenario_to_json_string(cfg) << '\n';
        } else {
          std::printf("%-22s K_model=%-3d noise_var_model=%-5.3g prior_var=%.3g n=%d\n",
                      cfg.name.c_str(), cfg.model.basis_order_model,
                      cfg.model.noise_var_model, cfg.model.prior.cov(0, 0), cfg.n_train);
        }
      }
      return 0;
    }

    if (sweep_cmd->parsed()) {
      const auto cfg = resolve_scenario(opt);
      const std::string out = default_out(opt, "sweep_" + cfg.name);
      const auto summary = cpe::run_sweep(cfg, out, opt.master_seed, opt.threads);
      cpe::write_sweep_summary_json(summary, out + ".summary.json");
      std::printf("wrote %s and %s.summary.json\n", out.c_str(), out.c_str());
      std::printf("verdict at lambda=1: %s (median grad %.6g, band %.3g)\n",
                  cpe::to_string(summary.verdict_at_one.label),
                  summary.verdict_at_one.grad_at_one, summary.verdict_at_one.threshold);
      return 0;
    }

    if (grad_cmd->parsed()) {
      const auto cfg = resolve_scenario(opt);
      const std::string out = default_out(opt, "grad_check_" + cfg.name);
      const auto report = cpe::run_grad_check(cfg, out, opt.master_seed);
      std::printf("wrote %s\n", out.c_str());
      std::printf("max rel err (closed vs FD, Gibbs losses): %.3g\n",
                  report.max_rel_err_gibbs);
      std::printf("train gradients nonpositive: %s\n",
                  report.train_grads_nonpositive ? "yes" : "NO");
      std::printf("MC within 3 std errs of closed form: %s\n",
                  report.mc_within_3se ? "yes" : "NO");
      std::printf("%s\n", report.pass ? "PASS" : "FAIL");
      return report.pass ? 0 : 1;
    }

    if (da_cmd->parsed()) {
      auto cfg = resolve_scenario(opt);
      if (mirror_invariant) {
        cfg.data_gen = cpe::mirror_invariant_spec(cfg.data_gen.basis_order_true,
                                                  cfg.data_gen.noise_var_true);
      }
      std::vector<std::string> names;
      std::size_t pos = 0;
      while (pos < transforms_arg.size()) {
        std::size_t next = transforms_arg.find(',', pos);
        if (next == std::string::npos) next = transforms_arg.size();
        names.push_back(transforms_arg.substr(pos, next - pos));
        pos = next + 1;
      }
      const auto transforms = cpe::TransformSet::from_names(names);
      const std::string out = default_out(opt, "da_compare_" + cfg.name);
      const auto report =
          cpe::run_da_compare(cfg, transforms, out, opt.master_seed, opt.threads);
      std::printf("wrote %s\n", out.c_str());
      std::printf("median dG/dlambda at 1: plain %.6g, with DA %.6g -> %s\n",
                  report.median_d_gibbs_plain, report.median_d_gibbs_da,
                  report.da_strengthens_gibbs ? "DA strengthens (more negative)"
                                              : "DA does not strengthen");
      std::printf("median dB/dlambda at 1: plain %.6g, with DA %.6g\n",
                  report.median_d_bayes_plain, report.median_d_bayes_da);
      return 0;
    }

    if (pb_cmd->parsed()) {
      const auto cfg = resolve_scenario(opt);
      const std::string prefix = opt.out.empty() ? "pacbayes_" + cfg.name : opt.out;
      const auto report = cpe::run_pacbayes(cfg, prefix, opt.master_seed);
      std::printf("wrote %s.{J.*,R}.csv and %s.report.json\n", prefix.c_str(),
                  prefix.c_str());
      for (const auto& b : report.bounds) {
        std::printf("bound lambda=%-5.3g lhs=%.5g rhs=%.5g %s\n", b.lambda, b.lhs, b.rhs,
                    b.holds ? "holds" : "VIOLATED");
      }
      std::printf("optimal lambda: variance form %.4g, intersection %.4g%s\n",
                  report.lambda_star_variance, report.lambda_star_intersection.lambda,
                  report.lambda_star_intersection.boundary ? " (grid boundary)" : "");
      std::printf("prior predictive variance: mc %.5g, closed form %.5g\n", report.ppv.mc,
                  report.ppv.closed_form);
      return report.all_bounds_hold ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
