#include "igp/posterior.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "igp/diagnostics.hpp"
#include "igp/errors.hpp"

namespace igp {

namespace {

std::vector<double> to_internal(std::span<const double> years, const ModelContext& ctx) {
  const double tol = 1e-9 * ctx.grid.span();
  std::vector<double> t(years.size());
  for (std::size_t i = 0; i < years.size(); ++i) {
    double s = ctx.time.to_internal(years[i]);
    if (s < ctx.grid.front() - tol || s > ctx.grid.back() + tol)
      throw ParameterDomainError("time " + std::to_string(years[i]) + " lies outside the grid span");
    t[i] = std::clamp(s, ctx.grid.front(), ctx.grid.back());
  }
  return t;
}

std::size_t pooled_count(std::span<const ChainOutput> chains) {
  std::size_t total = 0;
  for (const auto& c : chains) total += c.draws.size();
  return total;
}

double quantile_sorted(const std::vector<double>& sorted, double p) {
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

void require_draws(std::span<const ChainOutput> chains) {
  const std::size_t total = pooled_count(chains);
  if (total == 0) throw UnsupportedInputError("no posterior draws to summarise");
  if (total < 100) throw UnsupportedInputError("summaries need at least 100 pooled draws");
}

}  // namespace

Eigen::VectorXd rates_at(const LatentState& draw, std::span<const double> years, const ModelContext& ctx) {
  const std::vector<double> t = to_internal(years, ctx);
  const CholeskyFactor factor = ctx.grid_factor(draw.kernel);
  const Eigen::VectorXd coef = factor.solve(draw.w_m);
  const auto& nodes = ctx.grid.nodes();
  const double tol = 1e-12 * ctx.grid.span();
  const double log_rho = std::log(draw.kernel.rho);
  Eigen::VectorXd out(static_cast<Eigen::Index>(t.size()));
  for (std::size_t i = 0; i < t.size(); ++i) {
    const auto it = std::lower_bound(nodes.begin(), nodes.end(), t[i] - tol);
    if (it != nodes.end() && std::fabs(*it - t[i]) <= tol) {
      out(static_cast<Eigen::Index>(i)) = draw.w_m(it - nodes.begin());
      continue;
    }
    double acc = 0.0;
    for (std::size_t j = 0; j < nodes.size(); ++j) {
      const double d = std::fabs(t[i] - nodes[j]);
      const double p = draw.kernel.kappa == 2.0 ? d * d : std::pow(d, draw.kernel.kappa);
      acc += std::exp(log_rho * p) * coef(static_cast<Eigen::Index>(j));
    }
    out(static_cast<Eigen::Index>(i)) = acc;
  }
  return out;
}

double rate_at(const LatentState& draw, double year, const ModelContext& ctx) {
  const double y[] = {year};
  return rates_at(draw, y, ctx)(0);
}

Eigen::VectorXd levels_at(const LatentState& draw, std::span<const double> years, const ModelContext& ctx) {
  const std::vector<double> t = to_internal(years, ctx);
  return draw.alpha + h_values(draw, t, ctx).array();
}

CurveSummary summarize_samples(const Eigen::MatrixXd& samples, std::span<const double> years) {
  if (samples.rows() == 0) throw UnsupportedInputError("no posterior draws to summarise");
  if (samples.cols() != static_cast<Eigen::Index>(years.size()))
    throw ValidationError("sample matrix width does not match evaluation times");
  CurveSummary s;
  s.eval_times.assign(years.begin(), years.end());
  const auto t_count = years.size();
  for (auto* v : {&s.mean, &s.mc_se, &s.lower68, &s.upper68, &s.lower95, &s.upper95}) v->resize(t_count);
  std::vector<double> column(static_cast<std::size_t>(samples.rows()));
#pragma omp parallel for schedule(static) firstprivate(column)
  for (std::size_t j = 0; j < t_count; ++j) {
    for (Eigen::Index r = 0; r < samples.rows(); ++r) column[static_cast<std::size_t>(r)] = samples(r, static_cast<Eigen::Index>(j));
    const double mean = samples.col(static_cast<Eigen::Index>(j)).mean();
    double ss = 0.0;
    for (double x : column) ss += (x - mean) * (x - mean);
    const double sd = column.size() > 1 ? std::sqrt(ss / static_cast<double>(column.size() - 1)) : 0.0;
    const double ess = column.size() >= 10 ? effective_sample_size(column) : static_cast<double>(column.size());
    s.mean[j] = mean;
    s.mc_se[j] = sd / std::sqrt(ess);
    std::sort(column.begin(), column.end());
    s.lower95[j] = quantile_sorted(column, 0.025);
    s.lower68[j] = quantile_sorted(column, 0.16);
    s.upper68[j] = quantile_sorted(column, 0.84);
    s.upper95[j] = quantile_sorted(column, 0.975);
  }
  return s;
}

RateSummary summarize_rate(std::span<const ChainOutput> chains, std::span<const double> years,
                           const ModelContext& ctx) {
  require_draws(chains);
  Eigen::MatrixXd samples(static_cast<Eigen::Index>(pooled_count(chains)), static_cast<Eigen::Index>(years.size()));
  Eigen::Index row = 0;
  for (const auto& c : chains)
    for (const auto& d : c.draws) samples.row(row++) = rates_at(d, years, ctx).transpose();
  return RateSummary{summarize_samples(samples, years)};
}

LevelSummary summarize_level(std::span<const ChainOutput> chains, std::span<const double> years,
                             const ModelContext& ctx) {
  require_draws(chains);
  const std::vector<double> t = to_internal(years, ctx);
  const double kappa = chains.front().draws.front().kernel.kappa;
  CrossCovCache cache(ctx.grid, ctx.quad, kappa);
  cache.set_times(t);
  Eigen::MatrixXd samples(static_cast<Eigen::Index>(pooled_count(chains)), static_cast<Eigen::Index>(years.size()));
  Eigen::Index row = 0;
  for (const auto& c : chains)
    for (const auto& d : c.draws) {
      const Eigen::VectorXd coef = ctx.grid_factor(d.kernel).solve(d.w_m);
      samples.row(row++) = (d.alpha + ctx.time.level_factor() * (cache.evaluate(d.kernel.rho) * coef).array()).transpose();
    }
  return LevelSummary{summarize_samples(samples, years)};
}

std::vector<double> evaluation_grid(double first, double last, std::size_t n) {
  if (n == 0) return {};
  if (n == 1) return {first};
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = first + (last - first) * static_cast<double>(i) / static_cast<double>(n - 1);
  out.back() = last;
  return out;
}

std::vector<const LatentState*> select_paths(std::span<const ChainOutput> chains, std::size_t n_paths,
                                             bool& truncated) {
  std::vector<const LatentState*> pooled;
  for (const auto& c : chains)
    for (const auto& d : c.draws) pooled.push_back(&d);
  if (pooled.empty()) throw UnsupportedInputError("no posterior draws for prediction");
  truncated = n_paths > pooled.size();
  if (n_paths >= pooled.size()) return pooled;
  std::vector<const LatentState*> chosen(n_paths);
  for (std::size_t k = 0; k < n_paths; ++k) chosen[k] = pooled[k * pooled.size() / n_paths];
  return chosen;
}

namespace {

Prediction finish_prediction(std::vector<double> targets, const Eigen::MatrixXd& samples, bool truncated) {
  Prediction p;
  p.targets = std::move(targets);
  p.paths_used = static_cast<std::size_t>(samples.rows());
  p.fewer_paths_than_requested = truncated;
  for (Eigen::Index j = 0; j < samples.cols(); ++j) {
    const double mean = samples.col(j).mean();
    const double sd =
        samples.rows() > 1 ? std::sqrt((samples.col(j).array() - mean).square().sum() / static_cast<double>(samples.rows() - 1))
                           : 0.0;
    p.mean.push_back(mean);
    p.sd.push_back(sd);
    p.lower95.push_back(mean - 1.96 * sd);
    p.upper95.push_back(mean + 1.96 * sd);
  }
  return p;
}

}  // namespace

Prediction predict_levels(std::span<const ChainOutput> chains, std::span<const double> target_years,
                          const ModelContext& ctx, std::size_t n_paths) {
  bool truncated = false;
  const auto paths = select_paths(chains, n_paths, truncated);
  Eigen::MatrixXd samples(static_cast<Eigen::Index>(paths.size()), static_cast<Eigen::Index>(target_years.size()));
  for (std::size_t k = 0; k < paths.size(); ++k)
    samples.row(static_cast<Eigen::Index>(k)) = levels_at(*paths[k], target_years, ctx).transpose();
  return finish_prediction({target_years.begin(), target_years.end()}, samples, truncated);
}

Prediction predict_observations(std::span<const ChainOutput> chains, std::span<const CorrectedObservation> targets,
                                const ModelContext& ctx, std::size_t n_paths, std::uint64_t seed) {
  bool truncated = false;
  const auto paths = select_paths(chains, n_paths, truncated);
  Rng rng(seed);
  std::normal_distribution<double> normal;
  const double tol = 1e-9;
  Eigen::MatrixXd samples(static_cast<Eigen::Index>(paths.size()), static_cast<Eigen::Index>(targets.size()));
  std::vector<double> t(targets.size());
  for (std::size_t k = 0; k < paths.size(); ++k) {
    const LatentState& d = *paths[k];
    std::vector<double> shift(targets.size(), 0.0), var(targets.size(), 0.0);
    for (std::size_t i = 0; i < targets.size(); ++i) {
      const auto& obs = targets[i];
      if (obs.age_known()) {
        t[i] = ctx.time.to_internal(obs.age());
        var[i] = obs.cov_obs(1, 1) + d.tau2;
      } else {
        const double sxx = obs.cov_obs(0, 0), sxl = obs.cov_obs(0, 1);
        const double year = obs.age() + std::sqrt(sxx) * normal(rng);
        t[i] = ctx.time.to_internal(year);
        shift[i] = sxl / sxx * (obs.age() - year);
        var[i] = obs.cov_obs(1, 1) + d.tau2 - sxl * sxl / sxx;
      }
      if (t[i] < ctx.grid.front() - tol || t[i] > ctx.grid.back() + tol) {
        if (obs.age_known()) throw ParameterDomainError("prediction target outside the grid span");
      }
      t[i] = std::clamp(t[i], ctx.grid.front(), ctx.grid.back());
    }
    const Eigen::VectorXd h = h_values(d, t, ctx);
    for (std::size_t i = 0; i < targets.size(); ++i)
      samples(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) =
          d.alpha + h(static_cast<Eigen::Index>(i)) + shift[i] + std::sqrt(var[i]) * normal(rng);
  }
  std::vector<double> years;
  for (const auto& obs : targets) years.push_back(obs.age());
  return finish_prediction(std::move(years), samples, truncated);
}

}  // namespace igp
