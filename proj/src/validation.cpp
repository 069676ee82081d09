#include "igp/validation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <boost/math/distributions/students_t.hpp>

#include "igp/errors.hpp"

namespace igp {

double interval_score(double l, double u, double x, double alpha) {
  if (l > u) throw ParameterDomainError("interval_score needs l <= u");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ParameterDomainError("interval_score needs 0 < alpha < 1");
  double s = u - l;
  if (x < l) s += 2.0 / alpha * (l - x);
  if (x > u) s += 2.0 / alpha * (x - u);
  return s;
}

void ScenarioSpec::validate() const {
  if (!(sigma2_mean > 0.0 && sigma2_var > 0.0 && rho_mean > 0.0 && rho_var > 0.0))
    throw ValidationError("scenario means and variances must be positive");
  if (!(rho_mean < 1.0 && rho_var < rho_mean * (1.0 - rho_mean)))
    throw ValidationError("scenario rho moments are not attainable by a Beta distribution");
  if (n_sims < 1) throw ValidationError("scenario needs n_sims >= 1");
}

std::vector<ScenarioSpec> ScenarioSpec::presets(int n_sims, std::uint64_t seed) {
  struct Row {
    const char* label;
    double s_mean, s_var, r_mean, r_var, c95, c68;
  };
  static constexpr Row rows[] = {
      {"a", 1.0, 0.1, 0.2, 0.01, 0.954, 0.679},  {"b", 2.0, 0.1, 0.2, 0.01, 0.969, 0.733},
      {"c", 0.5, 0.1, 0.1, 0.01, 0.931, 0.656},  {"d", 1.0, 0.5, 0.2, 0.1, 0.868, 0.604},
      {"e", 1.0, 0.02, 0.2, 0.001, 0.963, 0.715}, {"f", 2.0, 0.5, 0.4, 0.1, 0.962, 0.716},
      {"g", 0.5, 0.02, 0.1, 0.001, 0.936, 0.661},
  };
  std::vector<ScenarioSpec> out;
  std::uint64_t index = 0;
  for (const auto& r : rows) {
    ScenarioSpec s;
    s.label = r.label;
    s.sigma2_mean = r.s_mean;
    s.sigma2_var = r.s_var;
    s.rho_mean = r.r_mean;
    s.rho_var = r.r_var;
    s.n_sims = n_sims;
    s.seed = derive_seed(seed, index++);
    s.reported95 = r.c95;
    s.reported68 = r.c68;
    out.push_back(s);
  }
  return out;
}

GammaShapeRate gamma_from_moments(double mean, double var) { return {mean * mean / var, mean / var}; }

BetaShapes beta_from_moments(double mean, double var) {
  const double common = mean * (1.0 - mean) / var - 1.0;
  return {mean * common, (1.0 - mean) * common};
}

SimulatedDataset simulate_dataset(double sigma2, double rho, const Design& design, std::uint64_t seed) {
  if (design.n_obs < 2) throw ValidationError("design needs at least two observations");
  if (!(sigma2 >= 0.0)) throw ValidationError("sigma2 must be non-negative");
  Rng rng(seed);
  std::normal_distribution<double> normal;
  const double first = design.start_year, last = design.start_year + design.span_years;
  const ModelContext ctx = ModelContext::for_span(first, last, design.sim_grid_m, design.quad_order);

  LatentState truth;
  truth.alpha = design.alpha;
  truth.kernel = KernelParams{rho, design.kappa, sigma2 > 0.0 ? sigma2 : 1.0};
  const CholeskyFactor factor = ctx.grid_factor(truth.kernel);
  Eigen::VectorXd z(static_cast<Eigen::Index>(ctx.grid.size()));
  for (Eigen::Index j = 0; j < z.size(); ++j) z(j) = normal(rng);
  truth.w_m = std::sqrt(sigma2) * (factor.lower() * z);

  SimulatedDataset out;
  out.sigma2 = sigma2;
  out.rho = rho;
  const std::vector<double> obs_years = evaluation_grid(first, last, static_cast<std::size_t>(design.n_obs));
  const Eigen::VectorXd levels = levels_at(truth, obs_years, ctx);
  for (std::size_t i = 0; i < obs_years.size(); ++i) {
    ObservationRecord r;
    r.age = obs_years[i];
    r.level = levels(static_cast<Eigen::Index>(i)) + design.noise_sd * normal(rng);
    r.level_sd = design.level_sd;
    r.age_sd = 0.0;
    out.records.push_back(r);
  }
  out.eval_years = evaluation_grid(first, last, design.eval_points);
  const Eigen::VectorXd rate = rates_at(truth, out.eval_years, ctx);
  out.true_rate.assign(rate.data(), rate.data() + rate.size());
  return out;
}

ValidationFit ValidationFit::scenario_default() {
  ValidationFit f;
  f.settings.mode = ModelMode::SIGP;
  f.settings.priors.upsilon2 = GammaPrior{10.0, 10.0};
  f.settings.priors.rho = BetaPrior{2.0, 8.0};
  f.settings.grid_m = 30;
  f.settings.chains.n_iterations = 2000;
  f.settings.chains.burn_in = 500;
  f.settings.chains.thin = 3;
  f.settings.chains.n_chains = 1;
  return f;
}

std::pair<double, double> rate_coverage(const RateSummary& summary, std::span<const double> true_rate) {
  if (true_rate.size() != summary.size()) throw ValidationError("true rate length does not match the summary");
  double in95 = 0.0, in68 = 0.0;
  for (std::size_t j = 0; j < true_rate.size(); ++j) {
    in95 += (true_rate[j] >= summary.lower95[j] && true_rate[j] <= summary.upper95[j]) ? 1.0 : 0.0;
    in68 += (true_rate[j] >= summary.lower68[j] && true_rate[j] <= summary.upper68[j]) ? 1.0 : 0.0;
  }
  const auto n = static_cast<double>(true_rate.size());
  return {in95 / n, in68 / n};
}

ScenarioResult run_scenario(const ScenarioSpec& spec, const ValidationFit& fit) {
  spec.validate();
  const GammaShapeRate gs = gamma_from_moments(spec.sigma2_mean, spec.sigma2_var);
  const BetaShapes bs = beta_from_moments(spec.rho_mean, spec.rho_var);
  const auto n_sims = static_cast<std::size_t>(spec.n_sims);
  std::vector<double> cov95(n_sims, 0.0), cov68(n_sims, 0.0);
  std::vector<char> ok(n_sims, 0);

#pragma omp parallel for schedule(dynamic)
  for (std::size_t s = 0; s < n_sims; ++s) {
    const std::uint64_t sim_seed = derive_seed(spec.seed, s);
    Rng rng(sim_seed);
    const double sigma2 = std::gamma_distribution<double>(gs.shape, 1.0 / gs.rate)(rng);
    const double ga = std::gamma_distribution<double>(bs.a, 1.0)(rng);
    const double gb = std::gamma_distribution<double>(bs.b, 1.0)(rng);
    const double rho = std::clamp(ga / (ga + gb), 1e-300, 1.0 - 1e-12);
    try {
      const SimulatedDataset sim = simulate_dataset(sigma2, rho, spec.design, derive_seed(sim_seed, 1));
      FitSettings settings = fit.settings;
      settings.kappa = spec.design.kappa;
      settings.quad_order = spec.design.quad_order;
      settings.chains.seed = derive_seed(sim_seed, 2);
      const FitProblem problem = make_problem(sim.records, GiaAssignment{}, settings);
      const auto chains = run_chains(problem, settings.chains);
      const RateSummary summary = summarize_rate(chains, sim.eval_years, problem.ctx);
      const auto [c95, c68] = rate_coverage(summary, sim.true_rate);
      cov95[s] = c95;
      cov68[s] = c68;
      ok[s] = 1;
    } catch (const NumericalError&) {
      ok[s] = 0;
    }
  }

  ScenarioResult result;
  result.label = spec.label;
  std::vector<double> c95, c68;
  for (std::size_t s = 0; s < n_sims; ++s) {
    if (!ok[s]) {
      ++result.n_failed;
      continue;
    }
    c95.push_back(cov95[s]);
    c68.push_back(cov68[s]);
  }
  result.n_completed = static_cast<int>(c95.size());
  auto mean_se = [](const std::vector<double>& v, double& mean, double& se) {
    if (v.empty()) return;
    mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    se = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size())) : 0.0;
  };
  mean_se(c95, result.coverage95, result.mc_se95);
  mean_se(c68, result.coverage68, result.mc_se68);
  return result;
}

const char* to_string(CvModel model) {
  switch (model) {
    case CvModel::SIGP: return "S-IGP";
    case CvModel::EIVIGP: return "EIV-IGP";
    case CvModel::LSR: return "LSR";
  }
  return "?";
}

std::vector<std::vector<std::size_t>> make_folds(std::size_t n, int k, std::uint64_t seed) {
  if (k < 2) throw ValidationError("cross-validation needs k >= 2");
  if (n < static_cast<std::size_t>(k)) throw ValidationError("cross-validation needs at least k records");
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<std::vector<std::size_t>> folds(static_cast<std::size_t>(k));
  const auto kk = static_cast<std::size_t>(k);
  for (std::size_t f = 0; f < kk; ++f)
    folds[f].assign(perm.begin() + static_cast<std::ptrdiff_t>(f * n / kk),
                    perm.begin() + static_cast<std::ptrdiff_t>((f + 1) * n / kk));
  return folds;
}

CvResult kfold_cv(std::span<const ObservationRecord> records, const GiaAssignment& gia, CvModel model, int k,
                  std::uint64_t seed, const FitSettings& settings, int lsr_degree, std::size_t n_paths) {
  const auto folds = make_folds(records.size(), k, seed);
  const std::vector<CorrectedObservation> corrected = apply_gia(records, gia);
  const std::size_t n = records.size();
  std::vector<double> lower(n), upper(n);
  std::vector<std::exception_ptr> errors(folds.size());

#pragma omp parallel for schedule(dynamic)
  for (std::size_t f = 0; f < folds.size(); ++f) {
    try {
      std::vector<char> held(n, 0);
      for (std::size_t i : folds[f]) held[i] = 1;
      std::vector<ObservationRecord> train;
      std::vector<CorrectedObservation> test;
      // Targets follow folds[f] order so prediction j belongs to folds[f][j].
      for (std::size_t i : folds[f]) test.push_back(corrected[i]);
      for (std::size_t i = 0; i < n; ++i)
        if (!held[i]) train.push_back(records[i]);
      if (model == CvModel::LSR) {
        std::vector<double> x, y, px;
        for (const auto& obs : test) px.push_back(obs.age());
        for (std::size_t i = 0; i < n; ++i) {
          if (held[i]) continue;
          x.push_back(corrected[i].age());
          y.push_back(corrected[i].level());
        }
        const LsrPrediction p = lsr_baseline(x, y, px, lsr_degree);
        for (std::size_t j = 0; j < folds[f].size(); ++j) {
          lower[folds[f][j]] = p.lower95[j];
          upper[folds[f][j]] = p.upper95[j];
        }
      } else {
        FitSettings fold_settings = settings;
        fold_settings.mode = model == CvModel::SIGP ? ModelMode::SIGP : ModelMode::EIVIGP;
        fold_settings.chains.seed = derive_seed(seed, 1000 + f);
        std::vector<double> extra;
        for (std::size_t i : folds[f]) {
          extra.push_back(records[i].age - 3.0 * records[i].age_sd);
          extra.push_back(records[i].age + 3.0 * records[i].age_sd);
        }
        const FitProblem problem = make_problem(train, gia, fold_settings, extra);
        const auto chains = run_chains(problem, fold_settings.chains);
        const Prediction p = predict_observations(chains, test, problem.ctx, n_paths, derive_seed(seed, 2000 + f));
        for (std::size_t j = 0; j < folds[f].size(); ++j) {
          lower[folds[f][j]] = p.lower95[j];
          upper[folds[f][j]] = p.upper95[j];
        }
      }
    } catch (...) {
      errors[f] = std::current_exception();
    }
  }
  for (std::size_t f = 0; f < errors.size(); ++f) {
    if (!errors[f]) continue;
    try {
      std::rethrow_exception(errors[f]);
    } catch (const std::exception& e) {
      throw NumericalError("cross-validation fold " + std::to_string(f) + " failed: " + e.what());
    }
  }

  CvResult result;
  result.n_points = n;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = corrected[i].level();
    result.empirical_coverage += (x >= lower[i] && x <= upper[i]) ? 1.0 : 0.0;
    result.avg_interval_width += upper[i] - lower[i];
    result.avg_interval_score += interval_score(lower[i], upper[i], x, 0.05);
  }
  const auto nn = static_cast<double>(n);
  result.empirical_coverage /= nn;
  result.avg_interval_width /= nn;
  result.avg_interval_score /= nn;
  return result;
}

LsrFit::LsrFit(std::span<const double> x, std::span<const double> y, int degree) : degree_(degree) {
  if (degree < 0) throw ValidationError("polynomial degree must be non-negative");
  if (x.size() != y.size()) throw ValidationError("LSR needs equal-length x and y");
  const auto p = static_cast<std::size_t>(degree + 1);
  if (x.size() <= p) throw ValidationError("LSR needs more points than coefficients");
  const double n = static_cast<double>(x.size());
  center_ = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : x) ss += (v - center_) * (v - center_);
  scale_ = std::sqrt(ss / n);
  if (!(scale_ > 0.0)) throw ValidationError("LSR design is rank-deficient (all x equal)");

  Eigen::MatrixXd design(static_cast<Eigen::Index>(x.size()), static_cast<Eigen::Index>(p));
  Eigen::VectorXd rhs(static_cast<Eigen::Index>(x.size()));
  for (std::size_t i = 0; i < x.size(); ++i) {
    design.row(static_cast<Eigen::Index>(i)) = basis(x[i]).transpose();
    rhs(static_cast<Eigen::Index>(i)) = y[i];
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (qr.rank() < static_cast<Eigen::Index>(p)) throw ValidationError("LSR design is rank-deficient");
  coef_ = qr.solve(rhs);
  const double rss = (design * coef_ - rhs).squaredNorm();
  const double dof = n - static_cast<double>(p);
  residual_sd_ = std::sqrt(rss / dof);
  xtx_inv_ = (design.transpose() * design).ldlt().solve(Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p)));
  t975_ = boost::math::quantile(boost::math::students_t_distribution<double>(dof), 0.975);
}

Eigen::VectorXd LsrFit::basis(double x) const {
  Eigen::VectorXd b(degree_ + 1);
  const double z = (x - center_) / scale_;
  double v = 1.0;
  for (int k = 0; k <= degree_; ++k, v *= z) b(k) = v;
  return b;
}

double LsrFit::predict(double x) const { return basis(x).dot(coef_); }

double LsrFit::half_width95(double x) const {
  const Eigen::VectorXd b = basis(x);
  return t975_ * residual_sd_ * std::sqrt(1.0 + b.dot(xtx_inv_ * b));
}

Eigen::VectorXd LsrFit::original_coefficients() const {
  // sum_k c_k ((x - m)/s)^k expanded with binomial coefficients.
  Eigen::VectorXd out = Eigen::VectorXd::Zero(degree_ + 1);
  for (int k = 0; k <= degree_; ++k) {
    const double ck = coef_(k) / std::pow(scale_, k);
    double binom = 1.0;
    for (int j = 0; j <= k; ++j) {
      out(j) += ck * binom * std::pow(-center_, k - j);
      binom = binom * (k - j) / (j + 1);
    }
  }
  return out;
}

LsrPrediction lsr_baseline(std::span<const double> train_x, std::span<const double> train_y,
                           std::span<const double> predict_x, int degree) {
  const LsrFit fit(train_x, train_y, degree);
  LsrPrediction out;
  for (double x : predict_x) {
    const double m = fit.predict(x);
    const double h = fit.half_width95(x);
    out.mean.push_back(m);
    out.lower95.push_back(m - h);
    out.upper95.push_back(m + h);
  }
  return out;
}

}  // namespace igp
