// eivigp: fit integrated Gaussian process sea-level models and run the
// validation suites.
//
//   eivigp fit --mode sigp --data cw.csv --out runs/cw
//   eivigp validate scenarios --sims 200 --out runs/scen
//   eivigp validate cv --mode eivigp --data nc.csv --out runs/cv

#include <cstdio>
#include <fstream>
#include <iostream>
#include <random>

#include <omp.h>

#include "CLI11.hpp"
#include "igp/errors.hpp"
#include "igp/run.hpp"

namespace {

enum ExitCode { kOk = 0, kInput = 2, kNumerical = 3, kStrict = 4 };

struct Cli {
  std::string mode = "sigp";
  std::string gia = "preset";
  std::string data, out = "run";
  std::size_t grid_m = 0;
  int quad_order = igp::kDefaultQuadratureOrder;
  int iters = 5000, burnin = 500, thin = 3, chains = 2;
  std::uint64_t seed = 1;
  double kappa = 2.0, time_scale = 1000.0;
  bool strict = false;
  bool long_run = false;
  int threads = 0;
  std::size_t eval_points = 200;
  std::vector<double> prior_rho, prior_tau2, prior_upsilon2, prior_alpha;
};

void add_model_flags(CLI::App* app, Cli& c) {
  app->add_option("--mode", c.mode, "sigp or eivigp")->check(CLI::IsMember({"sigp", "eivigp"}));
  app->add_option("--data", c.data, "Input file (instrumental: year,level,sigma; proxy: rsl,year,sigma,age2sigma[,site])");
  app->add_option("--gia", c.gia, "preset | none | gamma[@t0] | site=gamma[@t0];site=...");
  app->add_option("--grid-m", c.grid_m, "Rate grid size (0: 30 for sigp, 50 for eivigp)");
  app->add_option("--quad-order", c.quad_order, "Chebyshev-Gauss order");
  app->add_option("--iters", c.iters, "Iterations per chain");
  app->add_option("--burnin", c.burnin, "Burn-in iterations");
  app->add_option("--thin", c.thin, "Thinning interval");
  app->add_option("--chains", c.chains, "Number of chains");
  app->add_flag("--long", c.long_run, "50000 iterations, 5000 burn-in, thin 15");
  app->add_option("--seed", c.seed, "Master seed");
  app->add_option("--out", c.out, "Output directory");
  app->add_option("--kappa", c.kappa, "Kernel power in (0, 2]");
  app->add_option("--time-scale", c.time_scale, "Years per internal time unit");
  app->add_option("--threads", c.threads, "Worker threads (0: all)");
  app->add_option("--prior-rho", c.prior_rho, "Beta a b")->expected(2);
  app->add_option("--prior-tau2", c.prior_tau2, "Gamma shape rate")->expected(2);
  app->add_option("--prior-upsilon2", c.prior_upsilon2, "Gamma shape rate")->expected(2);
  app->add_option("--prior-alpha", c.prior_alpha, "Normal mean sd")->expected(2);
}

igp::RunConfig to_config(const Cli& c, const CLI::App* app) {
  igp::RunConfig config;
  config.mode = igp::parse_mode(c.mode);
  config.data = c.data;
  config.gia = igp::parse_gia_spec(c.gia);
  config.out_dir = c.out;
  config.threads = c.threads;
  config.strict = c.strict;
  config.eval_points = c.eval_points;
  auto& s = config.settings;
  s.mode = config.mode;
  s.grid_m = c.grid_m;
  s.quad_order = c.quad_order;
  s.kappa = c.kappa;
  s.years_per_unit = c.time_scale;
  if (c.long_run) {
    s.chains = igp::ChainConfig::long_run();
    if (app->count("--iters")) s.chains.n_iterations = c.iters;
    if (app->count("--burnin")) s.chains.burn_in = c.burnin;
    if (app->count("--thin")) s.chains.thin = c.thin;
    if (app->count("--chains")) s.chains.n_chains = c.chains;
  } else {
    s.chains.n_iterations = c.iters;
    s.chains.burn_in = c.burnin;
    s.chains.thin = c.thin;
    s.chains.n_chains = c.chains;
  }
  s.chains.seed = c.seed;
  if (!c.prior_rho.empty()) s.priors.rho = {c.prior_rho[0], c.prior_rho[1]};
  if (!c.prior_tau2.empty()) s.priors.tau2 = {c.prior_tau2[0], c.prior_tau2[1]};
  if (!c.prior_upsilon2.empty()) s.priors.upsilon2 = {c.prior_upsilon2[0], c.prior_upsilon2[1]};
  if (!c.prior_alpha.empty()) s.priors.alpha = {c.prior_alpha[0], c.prior_alpha[1]};
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Integrated Gaussian process models for sea-level rates"};
  app.require_subcommand(1);
  Cli cli;

  auto* fit = app.add_subcommand("fit", "Fit a model and write summaries, draws, diagnostics and a manifest");
  add_model_flags(fit, cli);
  fit->add_flag("--strict", cli.strict, "Exit with code 4 when a diagnostic threshold is exceeded");
  fit->add_option("--eval-points", cli.eval_points, "Summary grid size");

  auto* validate = app.add_subcommand("validate", "Run a validation suite");
  validate->require_subcommand(1);
  auto* scenarios = validate->add_subcommand("scenarios", "Simulation coverage study over the seven presets");
  int n_sims = 200;
  std::vector<std::string> labels;
  std::string scen_out = "validation";
  std::uint64_t scen_seed = 1;
  int scen_threads = 0;
  scenarios->add_option("--sims", n_sims, "Simulations per scenario")->check(CLI::PositiveNumber);
  scenarios->add_option("--scenario", labels, "Subset of scenario labels (a-g)");
  scenarios->add_option("--seed", scen_seed, "Master seed");
  scenarios->add_option("--out", scen_out, "Output directory");
  scenarios->add_option("--threads", scen_threads, "Worker threads (0: all)");

  auto* cv = validate->add_subcommand("cv", "k-fold cross-validation against the least-squares baseline");
  add_model_flags(cv, cli);
  igp::CvRunOptions cv_opts;
  cv->add_option("--folds", cv_opts.k, "Number of folds");
  cv->add_option("--lsr-degree", cv_opts.lsr_degree, "Polynomial degree of the baseline");
  cv->add_option("--paths", cv_opts.n_paths, "Posterior paths per prediction");

  auto* simulate = app.add_subcommand("simulate", "Write a synthetic data set drawn from the integrated process");
  double sim_sigma2 = 1.0, sim_rho = 0.2, sim_age_sd = 0.0;
  std::uint64_t sim_seed = 1;
  std::string sim_out = "simulated.csv";
  igp::Design design;
  simulate->add_option("--sigma2", sim_sigma2, "Rate variance");
  simulate->add_option("--rho", sim_rho, "Correlation per time unit");
  simulate->add_option("--n", design.n_obs, "Number of observations");
  simulate->add_option("--start", design.start_year, "First year");
  simulate->add_option("--span", design.span_years, "Span in years");
  simulate->add_option("--noise", design.noise_sd, "Level noise sd (m)");
  simulate->add_option("--age-sd", sim_age_sd, "Age error sd (years); > 0 writes proxy format");
  simulate->add_option("--seed", sim_seed, "Seed");
  simulate->add_option("--out", sim_out, "Output file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInput;
  }

  try {
    if (*fit) {
      const auto config = to_config(cli, fit);
      const auto report = igp::fit_to_directory(config);
      for (const auto& w : report.warnings) std::cerr << "warning: " << w << '\n';
      std::cout << "wrote " << config.out_dir.string() << '\n';
      if (report.flagged && config.strict) return kStrict;
      return kOk;
    }
    if (*simulate) {
      design.level_sd = design.noise_sd > 0.0 ? design.noise_sd : 0.05;
      auto sim = igp::simulate_dataset(sim_sigma2, sim_rho, design, sim_seed);
      std::ofstream out(sim_out);
      if (!out) throw igp::InputError("cannot write " + sim_out);
      if (sim_age_sd > 0.0) {
        igp::Rng rng(igp::derive_seed(sim_seed, 7));
        std::normal_distribution<double> normal;
        for (auto& r : sim.records) {
          r.age += sim_age_sd * normal(rng);
          r.age_sd = sim_age_sd;
        }
        igp::write_proxy(out, sim.records);
      } else {
        igp::write_instrumental(out, sim.records);
      }
      std::cout << "wrote " << sim_out << '\n';
      return kOk;
    }
    if (*scenarios) {
      if (scen_threads > 0) omp_set_num_threads(scen_threads);
      igp::ScenarioRunOptions opts;
      opts.n_sims = n_sims;
      opts.seed = scen_seed;
      opts.labels = labels;
      const auto results = igp::run_scenarios(opts, scen_out);
      std::printf("%-9s %9s %9s %7s\n", "scenario", "cov95", "cov68", "failed");
      for (const auto& r : results)
        std::printf("%-9s %9.3f %9.3f %7d\n", r.label.c_str(), r.coverage95, r.coverage68, r.n_failed);
      return kOk;
    }
    if (*cv) {
      const auto config = to_config(cli, cv);
      const auto rows = igp::run_cv(config, cv_opts);
      std::filesystem::create_directories(config.out_dir);
      igp::write_cv_table(config.out_dir / "cv.csv", rows);
      std::printf("%-8s %9s %9s %9s\n", "model", "coverage", "width", "score");
      for (const auto& r : rows)
        std::printf("%-8s %9.4f %9.4f %9.4f\n", igp::to_string(r.model), r.result.empirical_coverage,
                    r.result.avg_interval_width, r.result.avg_interval_score);
      return kOk;
    }
  } catch (const igp::InputError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kInput;
  } catch (const igp::ParameterDomainError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kInput;
  } catch (const igp::UnsupportedInputError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kInput;
  } catch (const igp::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kInput;
  }
  return kOk;
}
