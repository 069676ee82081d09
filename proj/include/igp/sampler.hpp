#pragma once

// MCMC for the S-IGP and EIV-IGP models.
//
// One sweep: conjugate Gibbs draw of (alpha, u) where w_m = sqrt(upsilon2) L u
// and L L^T = C**; slice updates of logit(rho) and log(upsilon2), each once
// with u held fixed and once with w_m held fixed (interweaving: the first
// mixes well when data are weak, the second when they are strong); log(tau2);
// then one slice update per uncertain latent age.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "igp/kernel.hpp"
#include "igp/model.hpp"
#include "igp/slice.hpp"

namespace igp {

enum class ModelMode { SIGP, EIVIGP };

const char* to_string(ModelMode mode);
ModelMode parse_mode(const std::string& text);

struct ChainConfig {
  int n_iterations = 5000;
  int burn_in = 500;
  int thin = 3;
  int n_chains = 2;
  std::uint64_t seed = 1;
  int adapt_window = 50;

  static ChainConfig long_run();
  void validate() const;
  std::size_t draws_per_chain() const;
};

/// Data, priors and fixed model structure for one fit.
struct FitProblem {
  ModelMode mode = ModelMode::SIGP;
  std::vector<CorrectedObservation> data;
  Priors priors;
  ModelContext ctx;
  double kappa = 2.0;

  void validate() const;
};

struct BlockStats {
  std::string block;
  long accepted = 0;
  long rejected = 0;
  long evaluations = 0;  // target density evaluations
};

struct ChainOutput {
  int chain_index = 0;
  std::uint64_t seed = 0;
  std::vector<LatentState> draws;
  std::vector<double> log_posterior;
  std::vector<BlockStats> stats;
};

/// Gaussian full conditional of (alpha, u) in whitened coordinates.
struct LinearConditional {
  Eigen::VectorXd mean;
  Eigen::MatrixXd precision;
};

class Sampler {
 public:
  Sampler(FitProblem problem, std::uint64_t seed);

  /// Over-dispersed start: rho, tau2, upsilon2, alpha and u drawn from their
  /// priors; latent ages at the observed ages.
  void initialize_from_prior();
  void set_state(const LatentState& state);
  LatentState state() const;

  /// One full sweep. With `adapt`, slice widths are re-tuned from the mean
  /// jump size at the end of every adaptation window.
  void iterate(bool adapt = false);
  void set_adapt_window(int iterations) { adapt_window_ = iterations > 0 ? iterations : 1; }

  void update_linear_block();
  void update_linear_block_elliptical();
  void update_rho();
  void update_rho_centered();
  void update_upsilon2();
  void update_upsilon2_centered();
  void update_tau2();
  void update_chi(std::size_t i);

  LinearConditional linear_conditional() const;
  double log_posterior() const;
  const std::vector<BlockStats>& stats() const noexcept { return stats_; }
  const FitProblem& problem() const noexcept { return problem_; }
  std::size_t iterations() const noexcept { return iterations_; }

  /// Swap in new (GIA-corrected) levels without touching the latent state.
  void replace_levels(std::span<const double> levels);

 private:
  enum Block { kLinear, kRho, kRhoCentred, kUpsilon2, kUpsilon2Centred, kTau2, kChi, kBlockCount };

  struct Record {
    double age_year;   // observed (corrected) age
    double level;      // observed corrected level
    double sxx, sxl, sll;  // cov_obs entries (no tau2)
    bool fixed;
  };

  struct RhoScratch {
    double rho = 0.0;
    CholeskyFactor factor;
    Eigen::MatrixXd phi;
  };

  std::size_t n() const noexcept { return records_.size(); }
  Eigen::Index m() const noexcept { return static_cast<Eigen::Index>(problem_.ctx.grid.size()); }
  double level_scale(double upsilon2) const;
  double effective_level(std::size_t i, double chi) const;
  double effective_var(std::size_t i, double tau2) const;
  double age_loglik(std::size_t i, double chi) const;
  double level_loglik(double scale, const Eigen::VectorXd& phiu, double tau2) const;
  double full_loglik() const;
  bool compute_rho_scratch(double rho, RhoScratch& out) const;
  void record(Block block, bool accepted, double jump, long evaluations, std::size_t index = 0);
  void adapt_widths();
  void check_finite() const;

  FitProblem problem_;
  Rng rng_;
  std::vector<Record> records_;
  std::vector<std::size_t> uncertain_;

  double alpha_ = 0.0;
  double tau2_ = 0.01;
  double upsilon2_ = 4.0;
  double rho_ = 0.2;
  Eigen::VectorXd u_;
  std::vector<double> chis_;

  CrossCovCache cache_;
  CholeskyFactor factor_;
  Eigen::MatrixXd phi_;  // n x m, K L^-T
  Eigen::VectorXd phiu_;

  std::vector<BlockStats> stats_;
  double width_rho_ = 1.0, width_rho_c_ = 1.0, width_ups_ = 0.5, width_ups_c_ = 0.5, width_tau_ = 2.0;
  std::vector<double> width_chi_;
  std::vector<double> jump_sum_;
  std::vector<long> jump_count_;
  std::vector<double> chi_jump_sum_;
  std::vector<long> chi_jump_count_;
  std::size_t iterations_ = 0;
  int adapt_window_ = 50;
};

/// Splitmix-style derivation of independent per-job seeds.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

/// One chain with seed derive_seed(config.seed, chain_index).
ChainOutput run_chain(const FitProblem& problem, const ChainConfig& config, int chain_index = 0);

/// config.n_chains chains, run concurrently.
std::vector<ChainOutput> run_chains(const FitProblem& problem, const ChainConfig& config);

/// Settings that turn raw records into a FitProblem.
struct FitSettings {
  ModelMode mode = ModelMode::SIGP;
  Priors priors;
  double kappa = 2.0;
  std::size_t grid_m = 0;  // 0: 30 for S-IGP, 50 for EIV-IGP
  int quad_order = kDefaultQuadratureOrder;
  double years_per_unit = 1000.0;
  ChainConfig chains;

  std::size_t resolved_grid_m() const { return grid_m ? grid_m : (mode == ModelMode::SIGP ? 30 : 50); }
};

FitProblem make_problem(std::span<const ObservationRecord> records, const GiaAssignment& gia,
                        const FitSettings& settings, std::span<const double> extra_years = {});

}  // namespace igp
