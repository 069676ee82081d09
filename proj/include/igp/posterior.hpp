#pragma once

// Posterior summaries of the rate and level curves, and predictions obtained
// by integrating sampled rate paths.

#include <cstdint>
#include <span>
#include <vector>

#include "igp/model.hpp"
#include "igp/sampler.hpp"

namespace igp {

/// Pointwise mean, Monte Carlo standard error of the mean, and equal-tailed
/// 68% / 95% bands on calendar-year evaluation times.
struct CurveSummary {
  std::vector<double> eval_times;
  std::vector<double> mean;
  std::vector<double> mc_se;
  std::vector<double> lower68, upper68;
  std::vector<double> lower95, upper95;

  std::size_t size() const noexcept { return eval_times.size(); }
};

/// mm/yr
struct RateSummary : CurveSummary {};
/// metres
struct LevelSummary : CurveSummary {};

/// Kriged rate of one draw at calendar year t (mm/yr). Exactly w_m[k] at grid
/// node k.
double rate_at(const LatentState& draw, double year, const ModelContext& ctx);

/// Rates of one draw at many times, reusing one factorization.
Eigen::VectorXd rates_at(const LatentState& draw, std::span<const double> years, const ModelContext& ctx);

/// alpha + h(t) of one draw at many times (metres).
Eigen::VectorXd levels_at(const LatentState& draw, std::span<const double> years, const ModelContext& ctx);

/// Pools every draw of every chain. Needs >= 100 pooled draws.
RateSummary summarize_rate(std::span<const ChainOutput> chains, std::span<const double> years, const ModelContext& ctx);
LevelSummary summarize_level(std::span<const ChainOutput> chains, std::span<const double> years,
                             const ModelContext& ctx);

/// Summary of an arbitrary (draws x times) matrix; the building block of the
/// two functions above.
CurveSummary summarize_samples(const Eigen::MatrixXd& samples, std::span<const double> years);

/// `n` evenly spaced years covering [first, last].
std::vector<double> evaluation_grid(double first, double last, std::size_t n);

struct Prediction {
  std::vector<double> targets;
  std::vector<double> mean;
  std::vector<double> sd;
  std::vector<double> lower95, upper95;
  std::size_t paths_used = 0;
  bool fewer_paths_than_requested = false;
};

/// Level predictions alpha + h(t) from `n_paths` pooled draws (evenly spaced
/// through the pooled sequence); interval = mean +/- 1.96 sd.
Prediction predict_levels(std::span<const ChainOutput> chains, std::span<const double> target_years,
                          const ModelContext& ctx, std::size_t n_paths = 500);

/// Posterior predictive for held-out observations: per path, the latent age is
/// drawn around the observed age, and observation noise (level variance plus
/// tau^2, conditioned on the age residual) is added.
Prediction predict_observations(std::span<const ChainOutput> chains, std::span<const CorrectedObservation> targets,
                                const ModelContext& ctx, std::size_t n_paths, std::uint64_t seed);

/// Chosen draw indices into the pooled sequence.
std::vector<const LatentState*> select_paths(std::span<const ChainOutput> chains, std::size_t n_paths,
                                             bool& truncated);

}  // namespace igp
