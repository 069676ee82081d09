#include "igp/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "igp/errors.hpp"

namespace igp {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

double normal_logpdf(double x, double mean, double var) {
  const double d = x - mean;
  return -0.5 * (kLog2Pi + std::log(var) + d * d / var);
}

double bivariate_logpdf(const Eigen::Vector2d& x, const Eigen::Vector2d& mean, const Eigen::Matrix2d& cov) {
  const double det = cov(0, 0) * cov(1, 1) - cov(0, 1) * cov(1, 0);
  if (!(det > 0.0)) throw ParameterDomainError("bivariate covariance is not positive definite");
  const Eigen::Vector2d d = x - mean;
  const double q = (cov(1, 1) * d(0) * d(0) - 2.0 * cov(0, 1) * d(0) * d(1) + cov(0, 0) * d(1) * d(1)) / det;
  return -(kLog2Pi + 0.5 * std::log(det) + 0.5 * q);
}

}  // namespace

void ObservationRecord::validate() const {
  if (!std::isfinite(level) || !std::isfinite(age)) throw ValidationError("record level and age must be finite");
  if (!(level_sd > 0.0)) throw ValidationError("level_sd must be positive");
  if (!(age_sd >= 0.0)) throw ValidationError("age_sd must be non-negative");
}

const GiaParams& GiaAssignment::for_site(const std::string& site) const {
  if (auto it = by_site.find(site); it != by_site.end()) return it->second;
  return fallback;
}

CorrectedObservation apply_gia(const ObservationRecord& record, const GiaParams& gia) {
  record.validate();
  const double g = gia.gamma / 1000.0;  // m per year
  const double vx = record.age_sd * record.age_sd;
  const double vy = record.level_sd * record.level_sd;
  CorrectedObservation out;
  out.mean_obs << record.age, record.level + g * (gia.t0 - record.age);
  out.cov_obs << vx, -g * vx, -g * vx, g * g * vx + vy;
  return out;
}

std::vector<CorrectedObservation> apply_gia(std::span<const ObservationRecord> records, const GiaAssignment& gia) {
  std::vector<CorrectedObservation> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(apply_gia(r, gia.for_site(r.site)));
  return out;
}

double BetaPrior::log_density(double x) const {
  if (!(x > 0.0 && x < 1.0)) return kNegInf;
  return std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + (a - 1.0) * std::log(x) + (b - 1.0) * std::log1p(-x);
}

double GammaPrior::log_density(double x) const {
  if (!(x > 0.0)) return kNegInf;
  return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(x) - rate * x;
}

double NormalPrior::log_density(double x) const { return normal_logpdf(x, mean, sd * sd); }

void Priors::validate() const {
  auto positive = [](double v, const char* what) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ValidationError(std::string("prior hyperparameter must be positive: ") + what);
  };
  positive(rho.a, "rho.a");
  positive(rho.b, "rho.b");
  positive(tau2.shape, "tau2.shape");
  positive(tau2.rate, "tau2.rate");
  positive(upsilon2.shape, "upsilon2.shape");
  positive(upsilon2.rate, "upsilon2.rate");
  positive(alpha.sd, "alpha.sd");
  if (!std::isfinite(alpha.mean)) throw ValidationError("alpha prior mean must be finite");
}

ModelContext ModelContext::for_span(double first_year, double last_year, std::size_t m, int quad_order,
                                    double years_per_unit) {
  if (m < 2) throw ValidationError("grid needs m >= 2 nodes");
  if (!(years_per_unit > 0.0)) throw ValidationError("time scale must be positive");
  if (!(last_year > first_year)) last_year = first_year + 1.0;
  ModelContext ctx;
  ctx.time = TimeScale{first_year, years_per_unit};
  ctx.grid = Grid::uniform(0.0, ctx.time.to_internal(last_year), m);
  ctx.quad = QuadratureRule::chebyshev_gauss(quad_order);
  return ctx;
}

ModelContext ModelContext::for_records(std::span<const ObservationRecord> records, std::size_t m, int quad_order,
                                       double years_per_unit, std::span<const double> extra_years) {
  if (records.empty() && extra_years.empty()) throw ValidationError("cannot build a grid without data");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  double max_sd = 0.0;
  for (const auto& r : records) {
    lo = std::min(lo, r.age);
    hi = std::max(hi, r.age);
    max_sd = std::max(max_sd, r.age_sd);
  }
  for (double y : extra_years) {
    lo = std::min(lo, y);
    hi = std::max(hi, y);
  }
  return for_span(lo - 3.0 * max_sd, hi + 3.0 * max_sd, m, quad_order, years_per_unit);
}

Eigen::MatrixXd ModelContext::grid_covariance(const KernelParams& kernel) const {
  return rate_cov_matrix(kernel, grid, jitter);
}

CholeskyFactor ModelContext::grid_factor(const KernelParams& kernel) const {
  return factorize_with_jitter(grid_covariance(kernel));
}

Eigen::VectorXd h_values(const LatentState& state, std::span<const double> eval_times, const ModelContext& ctx) {
  if (state.w_m.size() != static_cast<Eigen::Index>(ctx.grid.size()))
    throw ValidationError("w_m length does not match the grid");
  for (double t : eval_times)
    if (!ctx.grid.contains(t)) throw ParameterDomainError("evaluation time outside the grid span");
  const CholeskyFactor factor = ctx.grid_factor(state.kernel);
  const Eigen::VectorXd coef = factor.solve(state.w_m);
  return ctx.time.level_factor() * (cross_cov_matrix(state.kernel, eval_times, ctx.grid, ctx.quad) * coef);
}

double loglik_sigp(const LatentState& state, std::span<const CorrectedObservation> data, const ModelContext& ctx) {
  std::vector<double> times;
  times.reserve(data.size());
  for (const auto& obs : data) {
    if (!obs.age_known()) throw ValidationError("S-IGP likelihood requires age_sd = 0 for every record");
    times.push_back(ctx.time.to_internal(obs.age()));
  }
  const Eigen::VectorXd h = h_values(state, times, ctx);
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double var = data[i].cov_obs(1, 1) + state.tau2;
    if (!(var > 0.0)) throw ParameterDomainError("total level variance must be positive");
    total += normal_logpdf(data[i].level(), state.alpha + h(static_cast<Eigen::Index>(i)), var);
  }
  return total;
}

namespace {

std::vector<double> latent_times(const LatentState& state, std::span<const CorrectedObservation> data,
                                 const ModelContext& ctx) {
  if (state.chis.size() != data.size()) throw ValidationError("state needs one latent age per record");
  std::vector<double> times(data.size());
  for (std::size_t i = 0; i < data.size(); ++i)
    times[i] = data[i].age_known() ? ctx.time.to_internal(data[i].age()) : state.chis[i];
  return times;
}

}  // namespace

double loglik_eiv(const LatentState& state, std::span<const CorrectedObservation> data, const ModelContext& ctx) {
  const std::vector<double> times = latent_times(state, data, ctx);
  const Eigen::VectorXd h = h_values(state, times, ctx);
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& obs = data[i];
    const double mu_level = state.alpha + h(static_cast<Eigen::Index>(i));
    if (obs.age_known()) {
      const double var = obs.cov_obs(1, 1) + state.tau2;
      if (!(var > 0.0)) throw ParameterDomainError("total level variance must be positive");
      total += normal_logpdf(obs.level(), mu_level, var);
    } else {
      Eigen::Matrix2d cov = obs.cov_obs;
      cov(1, 1) += state.tau2;
      total += bivariate_logpdf(obs.mean_obs, Eigen::Vector2d(ctx.time.to_year(times[i]), mu_level), cov);
    }
  }
  return total;
}

Eigen::VectorXd loglik_eiv_gradient(const LatentState& state, std::span<const CorrectedObservation> data,
                                    const ModelContext& ctx) {
  const std::vector<double> times = latent_times(state, data, ctx);
  const CholeskyFactor factor = ctx.grid_factor(state.kernel);
  // dh/dw_m = level_factor * K C^-1, one row per record.
  const Eigen::MatrixXd k = cross_cov_matrix(state.kernel, times, ctx.grid, ctx.quad);
  const Eigen::MatrixXd dh = ctx.time.level_factor() * factor.solve(Eigen::MatrixXd(k.transpose())).transpose();
  const Eigen::VectorXd h = dh * state.w_m;
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(1 + state.w_m.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& obs = data[i];
    const auto row = static_cast<Eigen::Index>(i);
    const double resid_level = obs.level() - state.alpha - h(row);
    double score;  // d loglik_i / d mu_level
    if (obs.age_known()) {
      score = resid_level / (obs.cov_obs(1, 1) + state.tau2);
    } else {
      Eigen::Matrix2d cov = obs.cov_obs;
      cov(1, 1) += state.tau2;
      const Eigen::Vector2d resid(obs.age() - ctx.time.to_year(times[i]), resid_level);
      score = cov.inverse().row(1).dot(resid);
    }
    grad(0) += score;
    grad.tail(state.w_m.size()) += score * dh.row(row).transpose();
  }
  return grad;
}

double log_prior(const LatentState& state, const Priors& priors, const ModelContext& ctx,
                 const CholeskyFactor& grid_cov_factor) {
  const auto& kp = state.kernel;
  if (!(kp.rho > 0.0 && kp.rho < 1.0) || !(state.tau2 > 0.0) || !(kp.upsilon2 > 0.0)) return kNegInf;
  for (double chi : state.chis)
    if (!ctx.grid.contains(chi)) return kNegInf;
  double lp = priors.rho.log_density(kp.rho) + priors.tau2.log_density(state.tau2) +
              priors.upsilon2.log_density(kp.upsilon2) + priors.alpha.log_density(state.alpha);
  lp -= static_cast<double>(state.chis.size()) * std::log(ctx.grid.span());
  const auto m = static_cast<double>(state.w_m.size());
  const Eigen::VectorXd white = grid_cov_factor.lower().triangularView<Eigen::Lower>().solve(state.w_m);
  lp += -0.5 * (m * (kLog2Pi + std::log(kp.upsilon2)) + grid_cov_factor.log_determinant()) -
        0.5 * white.squaredNorm() / kp.upsilon2;
  return lp;
}

}  // namespace igp
