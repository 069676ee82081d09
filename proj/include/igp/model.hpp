#pragma once

// Observation model: GIA correction, priors, latent state and the S-IGP /
// EIV-IGP log densities.

#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "igp/kernel.hpp"

namespace igp {

/// One dated sea-level datum. Levels in metres, ages in years AD, both 1-sigma.
struct ObservationRecord {
  double level = 0.0;
  double level_sd = 0.0;
  double age = 0.0;
  double age_sd = 0.0;
  std::string site;

  void validate() const;
  bool operator==(const ObservationRecord&) const = default;
};

/// Site-specific GIA rate (mm/yr) and core collection year (AD).
struct GiaParams {
  double gamma = 0.0;
  double t0 = 2010.0;
};

/// Per-site GIA lookup with a fallback for records without a known site.
struct GiaAssignment {
  GiaParams fallback;
  std::map<std::string, GiaParams> by_site;

  const GiaParams& for_site(const std::string& site) const;
};

/// A z_i + b and A V_i A^T for one record. Component 0 is age (years AD),
/// component 1 is the GIA-corrected level (m).
struct CorrectedObservation {
  Eigen::Vector2d mean_obs = Eigen::Vector2d::Zero();
  Eigen::Matrix2d cov_obs = Eigen::Matrix2d::Zero();

  double age() const { return mean_obs(0); }
  double level() const { return mean_obs(1); }
  bool age_known() const { return cov_obs(0, 0) == 0.0; }
};

CorrectedObservation apply_gia(const ObservationRecord& record, const GiaParams& gia);
std::vector<CorrectedObservation> apply_gia(std::span<const ObservationRecord> records, const GiaAssignment& gia);

struct BetaPrior {
  double a = 2.0;
  double b = 8.0;
  double log_density(double x) const;
};

/// Shape-rate parameterisation: mean = shape / rate.
struct GammaPrior {
  double shape = 1.0;
  double rate = 1.0;
  double log_density(double x) const;
};

struct NormalPrior {
  double mean = 0.0;
  double sd = 1.0;
  double log_density(double x) const;
};

struct Priors {
  BetaPrior rho{2.0, 8.0};
  GammaPrior tau2{0.1, 10.0};
  GammaPrior upsilon2{80.0, 20.0};
  NormalPrior alpha{0.0, 100.0};

  void validate() const;
};

/// Mapping between calendar years and the internal time axis. Internal time
/// is (year - origin_year) / years_per_unit; with the default kiloyear unit a
/// rate in mm/yr integrates to metres with factor 1.
struct TimeScale {
  double origin_year = 0.0;
  double years_per_unit = 1000.0;

  double to_internal(double year) const { return (year - origin_year) / years_per_unit; }
  double to_year(double t) const { return origin_year + t * years_per_unit; }
  /// Metres of level per (mm/yr x internal unit).
  double level_factor() const { return years_per_unit / 1000.0; }
};

/// Everything fixed for a fit: time axis, grid, quadrature and base jitter.
struct ModelContext {
  TimeScale time;
  Grid grid = Grid({0.0, 1.0});
  QuadratureRule quad = QuadratureRule::chebyshev_gauss(kDefaultQuadratureOrder);
  double jitter = 1e-10;

  /// Uniform grid of m nodes over [min age - 3 max sd, max age + 3 max sd],
  /// with the origin at the padded lower end. `extra_years` widens the span
  /// to cover additional times (for example held-out prediction targets).
  static ModelContext for_records(std::span<const ObservationRecord> records, std::size_t m, int quad_order,
                                  double years_per_unit = 1000.0, std::span<const double> extra_years = {});
  static ModelContext for_span(double first_year, double last_year, std::size_t m, int quad_order,
                               double years_per_unit = 1000.0);

  Eigen::MatrixXd grid_covariance(const KernelParams& kernel) const;
  CholeskyFactor grid_factor(const KernelParams& kernel) const;
};

/// All sampled unknowns. chis are latent true ages on the internal axis, one
/// per observation (pinned to the observed age when age_sd = 0).
struct LatentState {
  double alpha = 0.0;
  double tau2 = 0.01;
  KernelParams kernel;
  std::vector<double> chis;
  Eigen::VectorXd w_m;
};

/// h(t) = K*_hw C**^-1 w_m at internal times.
Eigen::VectorXd h_values(const LatentState& state, std::span<const double> eval_times, const ModelContext& ctx);

/// Sum of N(level; alpha + h(age), sigma_y^2 + tau^2). Requires known ages.
double loglik_sigp(const LatentState& state, std::span<const CorrectedObservation> data, const ModelContext& ctx);

/// Sum of bivariate normal log densities of (age, level) with mean
/// (age(chi_i), alpha + h(chi_i)) and covariance cov_obs + tau^2 B. Records
/// with zero age variance use the univariate form at their observed age.
double loglik_eiv(const LatentState& state, std::span<const CorrectedObservation> data, const ModelContext& ctx);

/// d loglik_eiv / d(alpha, w_m).
Eigen::VectorXd loglik_eiv_gradient(const LatentState& state, std::span<const CorrectedObservation> data,
                                    const ModelContext& ctx);

/// Beta + Gamma + Gamma + Normal + uniform(chi) + MVN(w_m | 0, upsilon2 C**).
/// Returns -inf outside the support.
double log_prior(const LatentState& state, const Priors& priors, const ModelContext& ctx,
                 const CholeskyFactor& grid_cov_factor);

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

}  // namespace igp
