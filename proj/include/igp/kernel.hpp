#pragma once

// Covariance machinery for the rate process w and its once-integrated
// counterpart h(chi) = int_0^chi w(u) du.
//
// Times are in internal units (kiloyears by default) measured from the grid
// origin, so every integral starts at zero.

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace igp {

/// Powered-exponential correlation parameters. `upsilon2` is carried here
/// because it scales the same covariance, but rate_cov itself is unit-variance.
struct KernelParams {
  double rho = 0.2;
  double kappa = 2.0;
  double upsilon2 = 4.0;

  /// Throws ParameterDomainError unless 0<rho<1, 0<kappa<=2, upsilon2>0.
  void validate() const;
};

/// Strictly increasing approximation grid x*.
class Grid {
 public:
  explicit Grid(std::vector<double> nodes);

  static Grid uniform(double lo, double hi, std::size_t m);

  const std::vector<double>& nodes() const noexcept { return nodes_; }
  std::size_t size() const noexcept { return nodes_.size(); }
  double front() const noexcept { return nodes_.front(); }
  double back() const noexcept { return nodes_.back(); }
  double span() const noexcept { return back() - front(); }
  bool contains(double t) const noexcept { return t >= front() && t <= back(); }

 private:
  std::vector<double> nodes_;
};

enum class QuadratureWeighting {
  /// Interpolatory weights at the Chebyshev-Gauss nodes (Fejer's first rule).
  /// Exact for polynomials of degree < order; spectrally convergent.
  Interpolatory,
  /// Equal Chebyshev-Gauss weights pi/L with the integrand multiplied by
  /// sqrt(1-v^2) to cancel the Chebyshev weight. Second-order accurate.
  ChebyshevWeightCancel,
};

/// Rule for int_{-1}^{1} f(v) dv ~= sum_k weights[k] * f(nodes[k]).
/// Nodes are always cos((2k-1) pi / (2L)), k = 1..L.
struct QuadratureRule {
  int order = 0;
  QuadratureWeighting weighting = QuadratureWeighting::Interpolatory;
  std::vector<double> nodes;
  std::vector<double> weights;

  static QuadratureRule chebyshev_gauss(
      int order, QuadratureWeighting weighting = QuadratureWeighting::Interpolatory);

  template <class F>
  double integrate(F&& f, double a, double b) const {
    const double half = 0.5 * (b - a);
    const double mid = 0.5 * (a + b);
    double acc = 0.0;
    for (std::size_t k = 0; k < nodes.size(); ++k) acc += weights[k] * f(half * nodes[k] + mid);
    return half * acc;
  }
};

inline constexpr int kDefaultQuadratureOrder = 30;

/// rho^(|dt|^kappa).
double rate_cov(const KernelParams& params, double dt);

/// C** = [rate_cov(x_i - x_j)] + jitter * I. Rows computed in parallel.
Eigen::MatrixXd rate_cov_matrix(const KernelParams& params, const Grid& grid, double jitter);
Eigen::MatrixXd rate_cov_matrix_serial(const KernelParams& params, const Grid& grid, double jitter);

/// int_0^chi rate_cov(u - node) du. The interval is split at `node` when the
/// integrand has a kink there (kappa < 2).
double cross_cov(const KernelParams& params, double chi, double node, const QuadratureRule& quad);

/// n x m matrix K*_hw with rows at `chis`. OpenMP over rows; bitwise equal to
/// the serial reference.
Eigen::MatrixXd cross_cov_matrix(const KernelParams& params, std::span<const double> chis,
                                 const Grid& grid, const QuadratureRule& quad);
Eigen::MatrixXd cross_cov_matrix_serial(const KernelParams& params, std::span<const double> chis,
                                        const Grid& grid, const QuadratureRule& quad);

/// Precomputed quadrature abscissae for fixed (chis, grid, kappa), so that
/// re-evaluating K*_hw for a new rho costs one vectorised exp per abscissa
/// (three per integration point for kappa = 2 on a uniform grid).
/// Rows can be moved individually when a single latent age changes.
class CrossCovCache {
 public:
  CrossCovCache(const Grid& grid, const QuadratureRule& quad, double kappa);

  void set_times(std::span<const double> chis);
  void set_time(std::size_t row, double chi);
  std::size_t rows() const noexcept { return rows_.size(); }
  double time(std::size_t row) const { return rows_[row].chi; }

  Eigen::MatrixXd evaluate(double rho) const;
  Eigen::RowVectorXd evaluate_row(std::size_t row, double rho) const;

 private:
  struct Row {
    double chi = 0.0;
    Eigen::ArrayXXd powered;  // m x P, |u - x_j|^kappa
    Eigen::ArrayXXd weights;  // m x P, quadrature weight times half-width
    // Recurrence path: per integration point, its weight, nearest grid node
    // and offset from that node.
    Eigen::ArrayXd abscissa_weights;
    Eigen::ArrayXd offsets;
    std::vector<Eigen::Index> nearest;
  };
  Row build_row(double chi) const;
  Eigen::RowVectorXd evaluate_recurrence(const Row& row, double log_rho) const;
  void store_separable(std::size_t row);

  // All rows at once, kappa = 2 on a uniform grid: with t = s - x_0,
  // rho^((t - j d)^2) = rho^(t^2) (rho^(-2 t d))^j rho^(j^2 d^2), so the whole
  // matrix is m elementwise products over the n x L abscissa table.
  Eigen::ArrayXXd sep_t_;  // n x L, abscissa minus first node
  Eigen::ArrayXXd sep_w_;  // n x L, weights

  std::vector<double> nodes_;
  QuadratureRule quad_;
  double kappa_;
  // kappa = 2 on a uniform grid: rho^((s - x_j)^2) follows a two-term
  // multiplicative recurrence in j, so each abscissa needs three exps rather
  // than m.
  bool recurrence_ = false;
  double spacing_ = 0.0;
  std::vector<Row> rows_;
};

struct JitterPolicy {
  double initial = 1e-10;
  double growth = 10.0;
  double max = 1e-4;
};

/// Lower Cholesky factor of A + jitter * I, with the jitter actually used.
class CholeskyFactor {
 public:
  CholeskyFactor() = default;
  CholeskyFactor(Eigen::MatrixXd lower, double jitter) : lower_(std::move(lower)), jitter_(jitter) {}

  const Eigen::MatrixXd& lower() const noexcept { return lower_; }
  double jitter() const noexcept { return jitter_; }
  Eigen::Index size() const noexcept { return lower_.rows(); }

  Eigen::MatrixXd solve(const Eigen::MatrixXd& rhs) const;
  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;
  double log_determinant() const;

 private:
  Eigen::MatrixXd lower_;
  double jitter_ = 0.0;
};

/// Tries A as given, then adds policy.initial * I and grows it geometrically
/// up to policy.max. Throws NumericalError when every attempt fails.
CholeskyFactor factorize_with_jitter(const Eigen::MatrixXd& matrix, const JitterPolicy& policy = {});

Eigen::MatrixXd chol_solve(const Eigen::MatrixXd& matrix, const Eigen::MatrixXd& rhs,
                           const JitterPolicy& policy = {});

}  // namespace igp
