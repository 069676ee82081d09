#include "igp/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "igp/errors.hpp"

namespace igp {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

double normal_logpdf(double x, double mean, double var) {
  const double d = x - mean;
  return -0.5 * (kLog2Pi + std::log(var) + d * d / var);
}

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double draw_gamma(Rng& rng, double shape, double rate) {
  return std::gamma_distribution<double>(shape, 1.0 / rate)(rng);
}

double draw_beta(Rng& rng, double a, double b) {
  const double x = draw_gamma(rng, a, 1.0);
  const double y = draw_gamma(rng, b, 1.0);
  return x / (x + y);
}

constexpr const char* kBlockNames[] = {"linear", "rho", "rho_centered", "upsilon2", "upsilon2_centered", "tau2", "chi"};

}  // namespace

const char* to_string(ModelMode mode) { return mode == ModelMode::SIGP ? "sigp" : "eivigp"; }

ModelMode parse_mode(const std::string& text) {
  if (text == "sigp") return ModelMode::SIGP;
  if (text == "eivigp") return ModelMode::EIVIGP;
  throw ValidationError("unknown mode '" + text + "' (expected sigp or eivigp)");
}

ChainConfig ChainConfig::long_run() {
  ChainConfig c;
  c.n_iterations = 50000;
  c.burn_in = 5000;
  c.thin = 15;
  return c;
}

void ChainConfig::validate() const {
  if (n_iterations < 1) throw ValidationError("n_iterations must be >= 1");
  if (burn_in < 0 || burn_in >= n_iterations) throw ValidationError("burn_in must lie in [0, n_iterations)");
  if (thin < 1) throw ValidationError("thin must be >= 1");
  if (n_chains < 1) throw ValidationError("n_chains must be >= 1");
  if (adapt_window < 1) throw ValidationError("adapt_window must be >= 1");
}

std::size_t ChainConfig::draws_per_chain() const {
  return static_cast<std::size_t>((n_iterations - burn_in) / thin);
}

void FitProblem::validate() const {
  priors.validate();
  if (!(kappa > 0.0 && kappa <= 2.0)) throw ValidationError("kappa must lie in (0,2]");
  if (ctx.grid.size() < 2) throw ValidationError("grid needs m >= 2 nodes");
  if (ctx.grid.front() < 0.0) throw ValidationError("grid must start at or after the time origin");
  for (const auto& obs : data) {
    if (mode == ModelMode::SIGP && !obs.age_known())
      throw ValidationError("sigp mode requires age_sd = 0 for every record; use eivigp");
    if (!ctx.grid.contains(ctx.time.to_internal(obs.age())))
      throw ValidationError("observation age outside the grid span");
    if (!(obs.cov_obs(1, 1) > 0.0)) throw ValidationError("level variance must be positive");
  }
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

Sampler::Sampler(FitProblem problem, std::uint64_t seed)
    : problem_(std::move(problem)),
      rng_(seed),
      cache_(problem_.ctx.grid, problem_.ctx.quad, problem_.kappa) {
  problem_.validate();
  const auto& ctx = problem_.ctx;
  records_.reserve(problem_.data.size());
  chis_.resize(problem_.data.size());
  for (std::size_t i = 0; i < problem_.data.size(); ++i) {
    const auto& obs = problem_.data[i];
    const bool fixed = obs.age_known() || problem_.mode == ModelMode::SIGP;
    records_.push_back({obs.age(), obs.level(), obs.cov_obs(0, 0), obs.cov_obs(0, 1), obs.cov_obs(1, 1), fixed});
    chis_[i] = ctx.time.to_internal(obs.age());
    if (!fixed) uncertain_.push_back(i);
  }
  width_chi_.assign(n(), 0.0);
  for (std::size_t i : uncertain_)
    width_chi_[i] = std::max(std::sqrt(records_[i].sxx) / ctx.time.years_per_unit, 1e-3 * ctx.grid.span());
  jump_sum_.assign(kBlockCount, 0.0);
  jump_count_.assign(kBlockCount, 0);
  chi_jump_sum_.assign(n(), 0.0);
  chi_jump_count_.assign(n(), 0);
  for (const char* name : kBlockNames) stats_.push_back({name, 0, 0});
  cache_.set_times(chis_);
  u_ = Eigen::VectorXd::Zero(m());
  RhoScratch scratch;
  if (!compute_rho_scratch(rho_, scratch)) throw NumericalError("grid covariance is not positive definite");
  factor_ = std::move(scratch.factor);
  phi_ = std::move(scratch.phi);
  phiu_ = phi_ * u_;
}

double Sampler::level_scale(double upsilon2) const {
  return problem_.ctx.time.level_factor() * std::sqrt(upsilon2);
}

double Sampler::effective_level(std::size_t i, double chi) const {
  const auto& r = records_[i];
  if (r.fixed) return r.level;
  return r.level - r.sxl / r.sxx * (r.age_year - problem_.ctx.time.to_year(chi));
}

double Sampler::effective_var(std::size_t i, double tau2) const {
  const auto& r = records_[i];
  if (r.fixed) return r.sll + tau2;
  return r.sll + tau2 - r.sxl * r.sxl / r.sxx;
}

double Sampler::age_loglik(std::size_t i, double chi) const {
  const auto& r = records_[i];
  if (r.fixed) return 0.0;
  return normal_logpdf(r.age_year, problem_.ctx.time.to_year(chi), r.sxx);
}

double Sampler::level_loglik(double scale, const Eigen::VectorXd& phiu, double tau2) const {
  double total = 0.0;
  for (std::size_t i = 0; i < n(); ++i)
    total += normal_logpdf(effective_level(i, chis_[i]), alpha_ + scale * phiu(static_cast<Eigen::Index>(i)),
                           effective_var(i, tau2));
  return total;
}

double Sampler::full_loglik() const {
  double total = level_loglik(level_scale(upsilon2_), phiu_, tau2_);
  for (std::size_t i : uncertain_) total += age_loglik(i, chis_[i]);
  return total;
}

bool Sampler::compute_rho_scratch(double rho, RhoScratch& out) const {
  const KernelParams kp{rho, problem_.kappa, 1.0};
  try {
    out.factor = problem_.ctx.grid_factor(kp);
  } catch (const NumericalError&) {
    return false;
  }
  out.rho = rho;
  if (n() == 0) {
    out.phi.resize(0, m());
    return true;
  }
  const Eigen::MatrixXd k = cache_.evaluate(rho);
  out.phi = out.factor.lower().triangularView<Eigen::Lower>().solve(k.transpose()).transpose();
  return true;
}

void Sampler::initialize_from_prior() {
  const auto& p = problem_.priors;
  for (int attempt = 0;; ++attempt) {
    rho_ = std::clamp(draw_beta(rng_, p.rho.a, p.rho.b), 1e-6, 1.0 - 1e-6);
    RhoScratch scratch;
    if (compute_rho_scratch(rho_, scratch)) {
      factor_ = std::move(scratch.factor);
      phi_ = std::move(scratch.phi);
      break;
    }
    if (attempt > 100) throw NumericalError("could not find a factorizable starting rho");
  }
  tau2_ = std::max(draw_gamma(rng_, p.tau2.shape, p.tau2.rate), 1e-8);
  upsilon2_ = std::max(draw_gamma(rng_, p.upsilon2.shape, p.upsilon2.rate), 1e-8);
  std::normal_distribution<double> normal;
  alpha_ = p.alpha.mean + p.alpha.sd * normal(rng_);
  for (Eigen::Index j = 0; j < m(); ++j) u_(j) = normal(rng_);
  for (std::size_t i = 0; i < n(); ++i) chis_[i] = problem_.ctx.time.to_internal(records_[i].age_year);
  cache_.set_times(chis_);
  RhoScratch scratch;
  compute_rho_scratch(rho_, scratch);
  phi_ = std::move(scratch.phi);
  phiu_ = phi_ * u_;
}

void Sampler::set_state(const LatentState& state) {
  state.kernel.validate();
  if (state.w_m.size() != m()) throw ValidationError("w_m length does not match the grid");
  if (state.chis.size() != n()) throw ValidationError("state needs one latent age per record");
  if (!(state.tau2 > 0.0)) throw ParameterDomainError("tau2 must be positive");
  alpha_ = state.alpha;
  tau2_ = state.tau2;
  upsilon2_ = state.kernel.upsilon2;
  rho_ = state.kernel.rho;
  for (std::size_t i = 0; i < n(); ++i)
    chis_[i] = records_[i].fixed ? problem_.ctx.time.to_internal(records_[i].age_year) : state.chis[i];
  cache_.set_times(chis_);
  RhoScratch scratch;
  if (!compute_rho_scratch(rho_, scratch)) throw NumericalError("grid covariance is not positive definite");
  factor_ = std::move(scratch.factor);
  phi_ = std::move(scratch.phi);
  u_ = factor_.lower().triangularView<Eigen::Lower>().solve(state.w_m) / std::sqrt(upsilon2_);
  phiu_ = phi_ * u_;
}

LatentState Sampler::state() const {
  LatentState s;
  s.alpha = alpha_;
  s.tau2 = tau2_;
  s.kernel = KernelParams{rho_, problem_.kappa, upsilon2_};
  s.chis = chis_;
  s.w_m = std::sqrt(upsilon2_) * (factor_.lower() * u_);
  return s;
}

LinearConditional Sampler::linear_conditional() const {
  const auto& p = problem_.priors;
  const Eigen::Index dim = 1 + m();
  LinearConditional out;
  out.precision = Eigen::MatrixXd::Identity(dim, dim);
  out.precision(0, 0) = 1.0 / (p.alpha.sd * p.alpha.sd);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(dim);
  rhs(0) = p.alpha.mean / (p.alpha.sd * p.alpha.sd);
  if (n() > 0) {
    const double scale = level_scale(upsilon2_);
    Eigen::MatrixXd x(static_cast<Eigen::Index>(n()), dim);
    Eigen::VectorXd z(static_cast<Eigen::Index>(n()));
    for (std::size_t i = 0; i < n(); ++i) {
      const auto row = static_cast<Eigen::Index>(i);
      const double inv_sd = 1.0 / std::sqrt(effective_var(i, tau2_));
      x(row, 0) = inv_sd;
      x.row(row).tail(m()) = (scale * inv_sd) * phi_.row(row);
      z(row) = effective_level(i, chis_[i]) * inv_sd;
    }
    out.precision.selfadjointView<Eigen::Lower>().rankUpdate(x.transpose());
    out.precision.triangularView<Eigen::StrictlyUpper>() = out.precision.transpose();
    rhs += x.transpose() * z;
  }
  Eigen::LLT<Eigen::MatrixXd> llt(out.precision);
  out.mean = llt.solve(rhs);
  return out;
}

void Sampler::update_linear_block() {
  const LinearConditional cond = linear_conditional();
  Eigen::LLT<Eigen::MatrixXd> llt(cond.precision);
  if (llt.info() != Eigen::Success || !cond.mean.allFinite()) {
    update_linear_block_elliptical();
    return;
  }
  std::normal_distribution<double> normal;
  Eigen::VectorXd eps(cond.mean.size());
  for (Eigen::Index j = 0; j < eps.size(); ++j) eps(j) = normal(rng_);
  const Eigen::VectorXd draw = cond.mean + llt.matrixU().solve(eps);
  alpha_ = draw(0);
  u_ = draw.tail(m());
  phiu_ = phi_ * u_;
  record(kLinear, true, 0.0, 1);
}

void Sampler::update_linear_block_elliptical() {
  // Elliptical slice on u (prior N(0, I)), then a Gaussian draw of alpha.
  const double scale = level_scale(upsilon2_);
  std::normal_distribution<double> normal;
  Eigen::VectorXd nu(m());
  for (Eigen::Index j = 0; j < m(); ++j) nu(j) = normal(rng_);
  const double level = level_loglik(scale, phiu_, tau2_) + std::log(uniform01(rng_));
  const Eigen::VectorXd phinu = phi_ * nu;
  double theta = 2.0 * std::numbers::pi * uniform01(rng_);
  double lo = theta - 2.0 * std::numbers::pi, hi = theta;
  bool accepted = false;
  for (int step = 0; step < 200; ++step) {
    const Eigen::VectorXd cand = phiu_ * std::cos(theta) + phinu * std::sin(theta);
    if (level_loglik(scale, cand, tau2_) > level) {
      u_ = u_ * std::cos(theta) + nu * std::sin(theta);
      phiu_ = cand;
      accepted = true;
      break;
    }
    if (theta < 0.0) lo = theta;
    else hi = theta;
    theta = lo + (hi - lo) * uniform01(rng_);
  }
  const auto& p = problem_.priors;
  double prec = 1.0 / (p.alpha.sd * p.alpha.sd);
  double rhs = p.alpha.mean * prec;
  for (std::size_t i = 0; i < n(); ++i) {
    const double v = effective_var(i, tau2_);
    prec += 1.0 / v;
    rhs += (effective_level(i, chis_[i]) - scale * phiu_(static_cast<Eigen::Index>(i))) / v;
  }
  alpha_ = rhs / prec + normal(rng_) / std::sqrt(prec);
  record(kLinear, accepted, 0.0, 1);
}

void Sampler::update_rho() {
  const auto& prior = problem_.priors.rho;
  const double scale = level_scale(upsilon2_);
  RhoScratch last;
  auto target = [&](double x) {
    const double rho = logistic(x);
    if (!(rho > 0.0 && rho < 1.0)) return kNegInf;
    if (!compute_rho_scratch(rho, last)) return kNegInf;
    const Eigen::VectorXd phiu = last.phi * u_;
    return prior.log_density(rho) + std::log(rho) + std::log1p(-rho) + level_loglik(scale, phiu, tau2_);
  };
  const double x0 = std::log(rho_) - std::log1p(-rho_);
  const double f0 = prior.log_density(rho_) + std::log(rho_) + std::log1p(-rho_) + level_loglik(scale, phiu_, tau2_);
  SliceOptions opt;
  opt.width = width_rho_;
  const SliceResult res = slice_sample(target, x0, f0, opt, rng_);
  if (res.accepted) {
    const double rho = logistic(res.value);
    if (last.rho != rho && !compute_rho_scratch(rho, last)) throw NumericalError("rho update lost factorization");
    rho_ = rho;
    factor_ = std::move(last.factor);
    phi_ = std::move(last.phi);
    phiu_ = phi_ * u_;
  }
  record(kRho, res.accepted, std::fabs(res.value - x0), res.evaluations);
}

void Sampler::update_rho_centered() {
  // Holds w_m fixed and re-whitens: u' = L(rho)^-1 w / sqrt(upsilon2).
  const auto& prior = problem_.priors.rho;
  const double scale = level_scale(upsilon2_);
  const Eigen::VectorXd lu = factor_.lower().triangularView<Eigen::Lower>() * u_;
  RhoScratch last;
  Eigen::VectorXd last_u;
  auto density = [&](double rho, const CholeskyFactor& factor, const Eigen::VectorXd& u, const Eigen::VectorXd& phiu) {
    return prior.log_density(rho) + std::log(rho) + std::log1p(-rho) - 0.5 * factor.log_determinant() -
           0.5 * u.squaredNorm() + level_loglik(scale, phiu, tau2_);
  };
  auto target = [&](double x) {
    const double rho = logistic(x);
    if (!(rho > 0.0 && rho < 1.0)) return kNegInf;
    if (!compute_rho_scratch(rho, last)) return kNegInf;
    last_u = last.factor.lower().triangularView<Eigen::Lower>().solve(lu);
    return density(rho, last.factor, last_u, last.phi * last_u);
  };
  const double x0 = std::log(rho_) - std::log1p(-rho_);
  SliceOptions opt;
  opt.width = width_rho_c_;
  const SliceResult res = slice_sample(target, x0, density(rho_, factor_, u_, phiu_), opt, rng_);
  if (res.accepted) {
    const double rho = logistic(res.value);
    if (last.rho != rho) target(res.value);
    rho_ = rho;
    factor_ = std::move(last.factor);
    phi_ = std::move(last.phi);
    u_ = std::move(last_u);
    phiu_ = phi_ * u_;
  }
  record(kRhoCentred, res.accepted, std::fabs(res.value - x0), res.evaluations);
}

void Sampler::update_upsilon2() {
  const auto& prior = problem_.priors.upsilon2;
  auto target = [&](double y) {
    const double v = std::exp(y);
    return prior.log_density(v) + y + level_loglik(level_scale(v), phiu_, tau2_);
  };
  const double y0 = std::log(upsilon2_);
  SliceOptions opt;
  opt.width = width_ups_;
  const SliceResult res = slice_sample(target, y0, target(y0), opt, rng_);
  if (res.accepted) upsilon2_ = std::exp(res.value);
  record(kUpsilon2, res.accepted, std::fabs(res.value - y0), res.evaluations);
}

void Sampler::update_upsilon2_centered() {
  // Holds w_m fixed: p(upsilon2 | w) ~ Gamma prior x N(w; 0, upsilon2 C).
  const auto& prior = problem_.priors.upsilon2;
  const double q = upsilon2_ * u_.squaredNorm();  // w^T C^-1 w
  const double half_m = 0.5 * static_cast<double>(m());
  auto target = [&](double y) {
    const double v = std::exp(y);
    return prior.log_density(v) + y - half_m * y - 0.5 * q / v;
  };
  const double y0 = std::log(upsilon2_);
  SliceOptions opt;
  opt.width = width_ups_c_;
  const SliceResult res = slice_sample(target, y0, target(y0), opt, rng_);
  if (res.accepted) {
    const double v = std::exp(res.value);
    const double ratio = std::sqrt(upsilon2_ / v);
    u_ *= ratio;
    phiu_ *= ratio;
    upsilon2_ = v;
  }
  record(kUpsilon2Centred, res.accepted, std::fabs(res.value - y0), res.evaluations);
}

void Sampler::update_tau2() {
  const auto& prior = problem_.priors.tau2;
  const double scale = level_scale(upsilon2_);
  auto target = [&](double y) {
    const double t = std::exp(y);
    return prior.log_density(t) + y + level_loglik(scale, phiu_, t);
  };
  const double y0 = std::log(tau2_);
  SliceOptions opt;
  opt.width = width_tau_;
  const SliceResult res = slice_sample(target, y0, target(y0), opt, rng_);
  if (res.accepted) tau2_ = std::exp(res.value);
  record(kTau2, res.accepted, std::fabs(res.value - y0), res.evaluations);
}

void Sampler::update_chi(std::size_t i) {
  if (records_.at(i).fixed) return;
  const auto row = static_cast<Eigen::Index>(i);
  const double scale = level_scale(upsilon2_);
  const auto lower = factor_.lower().triangularView<Eigen::Lower>();
  Eigen::VectorXd last_phi;
  double last_chi = std::numeric_limits<double>::quiet_NaN();
  auto local = [&](double chi, double phiu_i) {
    return age_loglik(i, chi) +
           normal_logpdf(effective_level(i, chi), alpha_ + scale * phiu_i, effective_var(i, tau2_));
  };
  auto target = [&](double chi) {
    cache_.set_time(i, chi);
    last_phi = lower.solve(cache_.evaluate_row(i, rho_).transpose());
    last_chi = chi;
    return local(chi, last_phi.dot(u_));
  };
  const double x0 = chis_[i];
  SliceOptions opt;
  opt.width = width_chi_[i];
  opt.lower = problem_.ctx.grid.front();
  opt.upper = problem_.ctx.grid.back();
  const SliceResult res = slice_sample(target, x0, local(x0, phiu_(row)), opt, rng_);
  if (res.accepted && res.value != x0) {
    if (last_chi != res.value) target(res.value);
    chis_[i] = res.value;
    phi_.row(row) = last_phi.transpose();
    phiu_(row) = last_phi.dot(u_);
  } else {
    cache_.set_time(i, x0);
  }
  record(kChi, res.accepted, std::fabs(res.value - x0), res.evaluations, i);
}

void Sampler::replace_levels(std::span<const double> levels) {
  if (levels.size() != n()) throw ValidationError("replace_levels needs one level per record");
  for (std::size_t i = 0; i < n(); ++i) {
    records_[i].level = levels[i];
    problem_.data[i].mean_obs(1) = levels[i];
  }
}

void Sampler::record(Block block, bool accepted, double jump, long evaluations, std::size_t index) {
  auto& s = stats_[block];
  (accepted ? s.accepted : s.rejected) += 1;
  s.evaluations += evaluations;
  if (block == kChi) {
    chi_jump_sum_[index] += jump;
    chi_jump_count_[index] += 1;
  } else {
    jump_sum_[block] += jump;
    jump_count_[block] += 1;
  }
}

void Sampler::adapt_widths() {
  auto tuned = [](double current, double sum, long count, double lo, double hi) {
    if (count == 0 || sum <= 0.0) return current;
    return std::clamp(2.0 * sum / static_cast<double>(count), lo, hi);
  };
  width_rho_ = tuned(width_rho_, jump_sum_[kRho], jump_count_[kRho], 1e-3, 20.0);
  width_rho_c_ = tuned(width_rho_c_, jump_sum_[kRhoCentred], jump_count_[kRhoCentred], 1e-3, 20.0);
  width_ups_ = tuned(width_ups_, jump_sum_[kUpsilon2], jump_count_[kUpsilon2], 1e-3, 20.0);
  width_ups_c_ = tuned(width_ups_c_, jump_sum_[kUpsilon2Centred], jump_count_[kUpsilon2Centred], 1e-3, 20.0);
  width_tau_ = tuned(width_tau_, jump_sum_[kTau2], jump_count_[kTau2], 1e-3, 50.0);
  const double span = problem_.ctx.grid.span();
  for (std::size_t i : uncertain_)
    width_chi_[i] = tuned(width_chi_[i], chi_jump_sum_[i], chi_jump_count_[i], 1e-6 * span, span);
  std::fill(jump_sum_.begin(), jump_sum_.end(), 0.0);
  std::fill(jump_count_.begin(), jump_count_.end(), 0);
  std::fill(chi_jump_sum_.begin(), chi_jump_sum_.end(), 0.0);
  std::fill(chi_jump_count_.begin(), chi_jump_count_.end(), 0);
}

void Sampler::iterate(bool adapt) {
  update_linear_block();
  update_rho();
  update_rho_centered();
  update_upsilon2();
  update_upsilon2_centered();
  update_tau2();
  for (std::size_t i : uncertain_) update_chi(i);
  ++iterations_;
  if (adapt && iterations_ % static_cast<std::size_t>(adapt_window_) == 0) adapt_widths();
  check_finite();
}

double Sampler::log_posterior() const {
  const auto& p = problem_.priors;
  double lp = p.rho.log_density(rho_) + p.tau2.log_density(tau2_) + p.upsilon2.log_density(upsilon2_) +
              p.alpha.log_density(alpha_);
  lp -= static_cast<double>(n()) * std::log(problem_.ctx.grid.span());
  const auto mm = static_cast<double>(m());
  lp += -0.5 * (mm * (kLog2Pi + std::log(upsilon2_)) + factor_.log_determinant()) - 0.5 * u_.squaredNorm();
  return lp + full_loglik();
}

void Sampler::check_finite() const {
  const double lp = log_posterior();
  if (std::isfinite(lp)) return;
  std::ostringstream msg;
  msg << "non-finite log posterior after iteration " << iterations_ << " (alpha=" << alpha_ << ", tau2=" << tau2_
      << ", upsilon2=" << upsilon2_ << ", rho=" << rho_ << ", |u|=" << u_.norm() << ")";
  throw NumericalError(msg.str());
}

ChainOutput run_chain(const FitProblem& problem, const ChainConfig& config, int chain_index) {
  config.validate();
  ChainOutput out;
  out.chain_index = chain_index;
  out.seed = derive_seed(config.seed, static_cast<std::uint64_t>(chain_index));
  Sampler sampler(problem, out.seed);
  sampler.set_adapt_window(config.adapt_window);
  sampler.initialize_from_prior();
  out.draws.reserve(config.draws_per_chain());
  out.log_posterior.reserve(config.draws_per_chain());
  for (int it = 1; it <= config.n_iterations; ++it) {
    try {
      sampler.iterate(it <= config.burn_in);
    } catch (const NumericalError& e) {
      throw NumericalError("chain " + std::to_string(chain_index) + ", iteration " + std::to_string(it) + ": " +
                           e.what());
    }
    if (it > config.burn_in && (it - config.burn_in) % config.thin == 0) {
      out.draws.push_back(sampler.state());
      out.log_posterior.push_back(sampler.log_posterior());
    }
  }
  out.stats = sampler.stats();
  return out;
}

std::vector<ChainOutput> run_chains(const FitProblem& problem, const ChainConfig& config) {
  config.validate();
  std::vector<ChainOutput> outputs(static_cast<std::size_t>(config.n_chains));
  std::vector<std::exception_ptr> errors(outputs.size());
#pragma omp parallel for schedule(dynamic)
  for (int c = 0; c < config.n_chains; ++c) {
    try {
      outputs[static_cast<std::size_t>(c)] = run_chain(problem, config, c);
    } catch (...) {
      errors[static_cast<std::size_t>(c)] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return outputs;
}

FitProblem make_problem(std::span<const ObservationRecord> records, const GiaAssignment& gia,
                        const FitSettings& settings, std::span<const double> extra_years) {
  FitProblem problem;
  problem.mode = settings.mode;
  problem.priors = settings.priors;
  problem.kappa = settings.kappa;
  problem.ctx = ModelContext::for_records(records, settings.resolved_grid_m(), settings.quad_order,
                                          settings.years_per_unit, extra_years);
  problem.data = apply_gia(records, gia);
  problem.validate();
  return problem;
}

}  // namespace igp
