#pragma once

// Simulation-based coverage studies and k-fold cross-validation with interval
// scoring, plus the least-squares polynomial baseline.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "igp/model.hpp"
#include "igp/posterior.hpp"
#include "igp/sampler.hpp"

namespace igp {

/// (u - l) + 2/alpha (l - x) 1{x < l} + 2/alpha (x - u) 1{x > u}.
double interval_score(double l, double u, double x, double alpha);

/// Observation design for simulated data sets.
struct Design {
  int n_obs = 100;
  double start_year = 0.0;
  double span_years = 2000.0;
  double level_sd = 0.05;   // reported sigma_y on every record
  double noise_sd = 0.05;   // sd of the noise actually added
  double alpha = 0.0;
  std::size_t sim_grid_m = 100;
  std::size_t eval_points = 50;
  double kappa = 2.0;
  int quad_order = kDefaultQuadratureOrder;
};

struct ScenarioSpec {
  std::string label;
  double sigma2_mean = 1.0, sigma2_var = 0.1;
  double rho_mean = 0.2, rho_var = 0.01;
  int n_sims = 200;
  Design design;
  std::uint64_t seed = 1;
  // Published coverage for the preset, for side-by-side tables.
  double reported95 = 0.0, reported68 = 0.0;

  void validate() const;
  /// The seven presets (a)-(g).
  static std::vector<ScenarioSpec> presets(int n_sims = 200, std::uint64_t seed = 1);
};

struct GammaShapeRate {
  double shape, rate;
};
struct BetaShapes {
  double a, b;
};
GammaShapeRate gamma_from_moments(double mean, double var);
BetaShapes beta_from_moments(double mean, double var);

struct SimulatedDataset {
  std::vector<ObservationRecord> records;
  std::vector<double> eval_years;
  std::vector<double> true_rate;  // mm/yr at eval_years
  double sigma2 = 0.0, rho = 0.0;
};

/// Rate path w ~ GP(0, sigma2 C) on the design's fine grid, levels
/// y = alpha + h(x) + noise at evenly spaced times. sigma2 = 0 gives w = 0.
SimulatedDataset simulate_dataset(double sigma2, double rho, const Design& design, std::uint64_t seed);

/// Fit configuration used inside validation runs.
struct ValidationFit {
  FitSettings settings;
  static ValidationFit scenario_default();
};

struct ScenarioResult {
  std::string label;
  double coverage95 = 0.0, coverage68 = 0.0;
  int n_completed = 0, n_failed = 0;
  double mc_se95 = 0.0, mc_se68 = 0.0;

  bool failures_acceptable() const { return n_failed * 50 < n_completed + n_failed; }
};

/// Coverage of a single simulated fit: fraction of eval points whose true rate
/// falls inside the 95% / 68% bands.
std::pair<double, double> rate_coverage(const RateSummary& summary, std::span<const double> true_rate);

ScenarioResult run_scenario(const ScenarioSpec& spec, const ValidationFit& fit = ValidationFit::scenario_default());

enum class CvModel { SIGP, EIVIGP, LSR };
const char* to_string(CvModel model);

struct CvResult {
  double empirical_coverage = 0.0;
  double avg_interval_width = 0.0;
  double avg_interval_score = 0.0;
  std::size_t n_points = 0;
};

/// Fold f holds permuted indices [f n / k, (f+1) n / k).
std::vector<std::vector<std::size_t>> make_folds(std::size_t n, int k, std::uint64_t seed);

CvResult kfold_cv(std::span<const ObservationRecord> records, const GiaAssignment& gia, CvModel model, int k,
                  std::uint64_t seed, const FitSettings& settings, int lsr_degree = 2, std::size_t n_paths = 500);

/// Ordinary least-squares polynomial in the standardised age.
class LsrFit {
 public:
  LsrFit(std::span<const double> x, std::span<const double> y, int degree);

  double predict(double x) const;
  /// Half-width of the 95% prediction interval at x.
  double half_width95(double x) const;
  /// Coefficients of 1, x, x^2, ... in the original (unstandardised) variable.
  Eigen::VectorXd original_coefficients() const;
  double residual_sd() const { return residual_sd_; }
  int degree() const { return degree_; }

 private:
  Eigen::VectorXd basis(double x) const;

  int degree_;
  double center_ = 0.0, scale_ = 1.0;
  Eigen::VectorXd coef_;
  Eigen::MatrixXd xtx_inv_;
  double residual_sd_ = 0.0;
  double t975_ = 0.0;
};

struct LsrPrediction {
  std::vector<double> mean, lower95, upper95;
};

LsrPrediction lsr_baseline(std::span<const double> train_x, std::span<const double> train_y,
                           std::span<const double> predict_x, int degree = 2);

}  // namespace igp
