#include "igp/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "igp/errors.hpp"

namespace igp {

void KernelParams::validate() const {
  if (!(rho > 0.0 && rho < 1.0)) throw ParameterDomainError("rho must lie in (0,1), got " + std::to_string(rho));
  if (!(kappa > 0.0 && kappa <= 2.0))
    throw ParameterDomainError("kappa must lie in (0,2], got " + std::to_string(kappa));
  if (!(upsilon2 > 0.0)) throw ParameterDomainError("upsilon2 must be positive, got " + std::to_string(upsilon2));
}

Grid::Grid(std::vector<double> nodes) : nodes_(std::move(nodes)) {
  if (nodes_.empty()) throw ValidationError("grid needs at least one node");
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (!std::isfinite(nodes_[i])) throw ValidationError("grid node is not finite");
    if (i > 0 && !(nodes_[i] > nodes_[i - 1])) throw ValidationError("grid nodes must be strictly increasing");
  }
}

Grid Grid::uniform(double lo, double hi, std::size_t m) {
  if (m == 0) throw ValidationError("grid needs at least one node");
  if (m == 1) return Grid({lo});
  if (!(hi > lo)) throw ValidationError("grid upper bound must exceed lower bound");
  std::vector<double> nodes(m);
  const double step = (hi - lo) / static_cast<double>(m - 1);
  for (std::size_t i = 0; i < m; ++i) nodes[i] = lo + step * static_cast<double>(i);
  nodes.back() = hi;
  return Grid(std::move(nodes));
}

QuadratureRule QuadratureRule::chebyshev_gauss(int order, QuadratureWeighting weighting) {
  if (order < 1) throw ValidationError("quadrature order must be >= 1");
  QuadratureRule rule;
  rule.order = order;
  rule.weighting = weighting;
  rule.nodes.resize(order);
  rule.weights.resize(order);
  const double n = static_cast<double>(order);
  for (int k = 0; k < order; ++k) {
    const double theta = (2.0 * (k + 1) - 1.0) * std::numbers::pi / (2.0 * n);
    rule.nodes[k] = std::cos(theta);
    if (weighting == QuadratureWeighting::ChebyshevWeightCancel) {
      rule.weights[k] = std::numbers::pi / n * std::sin(theta);
    } else {
      double s = 0.0;
      for (int j = 1; j <= order / 2; ++j) s += std::cos(2.0 * j * theta) / (4.0 * j * j - 1.0);
      rule.weights[k] = 2.0 / n * (1.0 - 2.0 * s);
    }
  }
  return rule;
}

namespace {

inline double powered_distance(double d, double kappa) {
  d = std::fabs(d);
  return kappa == 2.0 ? d * d : std::pow(d, kappa);
}

inline bool splits_at(double node, double chi, double kappa) { return kappa < 2.0 && node > 0.0 && node < chi; }

}  // namespace

double rate_cov(const KernelParams& params, double dt) {
  params.validate();
  return std::exp(std::log(params.rho) * powered_distance(dt, params.kappa));
}

Eigen::MatrixXd rate_cov_matrix(const KernelParams& params, const Grid& grid, double jitter) {
  params.validate();
  const auto& x = grid.nodes();
  const auto m = static_cast<Eigen::Index>(x.size());
  const double log_rho = std::log(params.rho);
  Eigen::MatrixXd c(m, m);
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) c(i, j) = std::exp(log_rho * powered_distance(x[i] - x[j], params.kappa));
    c(i, i) += jitter;
  }
  return c;
}

Eigen::MatrixXd rate_cov_matrix_serial(const KernelParams& params, const Grid& grid, double jitter) {
  const auto& x = grid.nodes();
  const auto m = static_cast<Eigen::Index>(x.size());
  Eigen::MatrixXd c(m, m);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j) c(i, j) = rate_cov(params, x[i] - x[j]) + (i == j ? jitter : 0.0);
  return c;
}

double cross_cov(const KernelParams& params, double chi, double node, const QuadratureRule& quad) {
  params.validate();
  if (!(chi >= 0.0)) throw ParameterDomainError("cross_cov needs chi >= 0, got " + std::to_string(chi));
  if (chi == 0.0) return 0.0;
  const double log_rho = std::log(params.rho);
  auto integrand = [&](double u) { return std::exp(log_rho * powered_distance(u - node, params.kappa)); };
  if (splits_at(node, chi, params.kappa)) return quad.integrate(integrand, 0.0, node) + quad.integrate(integrand, node, chi);
  return quad.integrate(integrand, 0.0, chi);
}

Eigen::MatrixXd cross_cov_matrix(const KernelParams& params, std::span<const double> chis, const Grid& grid,
                                 const QuadratureRule& quad) {
  params.validate();
  for (double chi : chis)
    if (!(chi >= 0.0)) throw ParameterDomainError("cross_cov needs chi >= 0, got " + std::to_string(chi));
  const auto n = static_cast<Eigen::Index>(chis.size());
  const auto m = static_cast<Eigen::Index>(grid.size());
  Eigen::MatrixXd k(n, m);
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < m; ++j) k(i, j) = cross_cov(params, chis[i], grid.nodes()[j], quad);
  return k;
}

Eigen::MatrixXd cross_cov_matrix_serial(const KernelParams& params, std::span<const double> chis, const Grid& grid,
                                        const QuadratureRule& quad) {
  const auto n = static_cast<Eigen::Index>(chis.size());
  const auto m = static_cast<Eigen::Index>(grid.size());
  Eigen::MatrixXd k(n, m);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < m; ++j) k(i, j) = cross_cov(params, chis[i], grid.nodes()[j], quad);
  return k;
}

CrossCovCache::CrossCovCache(const Grid& grid, const QuadratureRule& quad, double kappa)
    : nodes_(grid.nodes()), quad_(quad), kappa_(kappa) {
  if (!(kappa > 0.0 && kappa <= 2.0)) throw ParameterDomainError("kappa must lie in (0,2]");
  if (kappa == 2.0 && nodes_.size() >= 2) {
    spacing_ = (nodes_.back() - nodes_.front()) / static_cast<double>(nodes_.size() - 1);
    recurrence_ = true;
    for (std::size_t j = 0; j < nodes_.size(); ++j) {
      const double expected = nodes_.front() + static_cast<double>(j) * spacing_;
      if (std::fabs(nodes_[j] - expected) > 1e-12 * (nodes_.back() - nodes_.front())) recurrence_ = false;
    }
  }
}

CrossCovCache::Row CrossCovCache::build_row(double chi) const {
  if (!(chi >= 0.0)) throw ParameterDomainError("cross_cov needs chi >= 0, got " + std::to_string(chi));
  const auto m = static_cast<Eigen::Index>(nodes_.size());
  const auto order = static_cast<Eigen::Index>(quad_.order);
  const Eigen::Index width = kappa_ < 2.0 ? 2 * order : order;
  Row row;
  row.chi = chi;
  if (recurrence_) {
    const double half = 0.5 * chi;
    const double last = static_cast<double>(m - 1);
    row.abscissa_weights.resize(order);
    row.offsets.resize(order);
    row.nearest.resize(static_cast<std::size_t>(order));
    for (Eigen::Index k = 0; k < order; ++k) {
      const double s = half * quad_.nodes[k] + half;
      const auto j0 = static_cast<Eigen::Index>(std::clamp(std::round((s - nodes_.front()) / spacing_), 0.0, last));
      row.abscissa_weights(k) = half * quad_.weights[k];
      row.nearest[static_cast<std::size_t>(k)] = j0;
      row.offsets(k) = s - nodes_[static_cast<std::size_t>(j0)];
    }
    return row;
  }
  row.powered.setZero(m, width);
  row.weights.setZero(m, width);
  auto fill = [&](Eigen::Index j, Eigen::Index offset, double a, double b) {
    const double half = 0.5 * (b - a);
    const double mid = 0.5 * (a + b);
    for (Eigen::Index k = 0; k < order; ++k) {
      row.powered(j, offset + k) = powered_distance(half * quad_.nodes[k] + mid - nodes_[j], kappa_);
      row.weights(j, offset + k) = half * quad_.weights[k];
    }
  };
  if (chi == 0.0) return row;
  for (Eigen::Index j = 0; j < m; ++j) {
    if (splits_at(nodes_[j], chi, kappa_)) {
      fill(j, 0, 0.0, nodes_[j]);
      fill(j, order, nodes_[j], chi);
    } else {
      fill(j, 0, 0.0, chi);
    }
  }
  return row;
}

void CrossCovCache::store_separable(std::size_t row) {
  const auto i = static_cast<Eigen::Index>(row);
  const Row& r = rows_[row];
  for (Eigen::Index k = 0; k < r.offsets.size(); ++k) {
    sep_t_(i, k) = r.offsets(k) + nodes_[static_cast<std::size_t>(r.nearest[static_cast<std::size_t>(k)])] - nodes_.front();
    sep_w_(i, k) = r.abscissa_weights(k);
  }
}

void CrossCovCache::set_times(std::span<const double> chis) {
  rows_.resize(chis.size());
  for (std::size_t i = 0; i < chis.size(); ++i) rows_[i] = build_row(chis[i]);
  if (recurrence_) {
    sep_t_.resize(static_cast<Eigen::Index>(chis.size()), quad_.order);
    sep_w_.resize(static_cast<Eigen::Index>(chis.size()), quad_.order);
    for (std::size_t i = 0; i < chis.size(); ++i) store_separable(i);
  }
}

void CrossCovCache::set_time(std::size_t row, double chi) {
  rows_.at(row) = build_row(chi);
  if (recurrence_) store_separable(row);
}

Eigen::RowVectorXd CrossCovCache::evaluate_recurrence(const Row& r, double a) const {
  const auto m = static_cast<Eigen::Index>(nodes_.size());
  const double d = spacing_;
  const double q = std::exp(2.0 * a * d * d);
  Eigen::RowVectorXd out = Eigen::RowVectorXd::Zero(m);
  if (r.chi == 0.0) return out;
  // Walk outwards from the node nearest each abscissa: every factor is <= 1,
  // so nothing can overflow.
  const Eigen::ArrayXd& g = r.offsets;
  const Eigen::ArrayXd peak = r.abscissa_weights * (a * g.square()).exp();
  const Eigen::ArrayXd up = (a * (d * d - 2.0 * d * g)).exp();
  const Eigen::ArrayXd down = (a * (d * d + 2.0 * d * g)).exp();
  for (Eigen::Index k = 0; k < g.size(); ++k) {
    const Eigen::Index j0 = r.nearest[static_cast<std::size_t>(k)];
    out(j0) += peak(k);
    double e = peak(k), ratio = up(k);
    for (Eigen::Index j = j0 + 1; j < m && e > 0.0; ++j) {
      e *= ratio;
      ratio *= q;
      out(j) += e;
    }
    e = peak(k);
    ratio = down(k);
    for (Eigen::Index j = j0 - 1; j >= 0 && e > 0.0; --j) {
      e *= ratio;
      ratio *= q;
      out(j) += e;
    }
  }
  return out;
}

Eigen::RowVectorXd CrossCovCache::evaluate_row(std::size_t row, double rho) const {
  const double log_rho = std::log(rho);
  const Row& r = rows_[row];
  if (recurrence_) return evaluate_recurrence(r, log_rho);
  return (r.weights * (log_rho * r.powered).exp()).rowwise().sum().transpose();
}

Eigen::MatrixXd CrossCovCache::evaluate(double rho) const {
  const auto n = static_cast<Eigen::Index>(rows_.size());
  const auto m = static_cast<Eigen::Index>(nodes_.size());
  if (recurrence_ && n > 0) {
    const double a = std::log(rho);
    const double reach = sep_t_.abs().maxCoeff() + (nodes_.back() - nodes_.front());
    // Intermediate factors stay within exp(+-600), far from overflow.
    if (-a * reach * reach <= 600.0) {
      const double d = spacing_;
      Eigen::MatrixXd k(n, m);
      const Eigen::ArrayXXd c = sep_w_ * (a * sep_t_.square()).exp();
      const Eigen::ArrayXXd step = (-2.0 * a * d * sep_t_).exp();
      Eigen::ArrayXXd power = c;
      for (Eigen::Index j = 0; j < m; ++j) {
        const double dj = static_cast<double>(j) * d;
        k.col(j) = std::exp(a * dj * dj) * power.rowwise().sum().matrix();
        if (j + 1 < m) power *= step;
      }
      return k;
    }
  }
  Eigen::MatrixXd k(n, m);
  for (Eigen::Index i = 0; i < n; ++i) k.row(i) = evaluate_row(static_cast<std::size_t>(i), rho);
  return k;
}

Eigen::MatrixXd CholeskyFactor::solve(const Eigen::MatrixXd& rhs) const {
  const auto l = lower_.triangularView<Eigen::Lower>();
  return l.transpose().solve(l.solve(rhs));
}

Eigen::VectorXd CholeskyFactor::solve(const Eigen::VectorXd& rhs) const {
  const auto l = lower_.triangularView<Eigen::Lower>();
  return l.transpose().solve(l.solve(rhs));
}

double CholeskyFactor::log_determinant() const { return 2.0 * lower_.diagonal().array().log().sum(); }

namespace {

bool try_cholesky(const Eigen::MatrixXd& a, Eigen::MatrixXd& lower) {
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() != Eigen::Success) return false;
  lower = llt.matrixL();
  const auto d = lower.diagonal().array();
  return d.allFinite() && (d > 0.0).all();
}

}  // namespace

CholeskyFactor factorize_with_jitter(const Eigen::MatrixXd& matrix, const JitterPolicy& policy) {
  if (matrix.rows() != matrix.cols()) throw ValidationError("Cholesky needs a square matrix");
  if (!matrix.allFinite()) throw NumericalError("matrix has non-finite entries");
  Eigen::MatrixXd lower;
  if (try_cholesky(matrix, lower)) return {std::move(lower), 0.0};
  const auto eye = Eigen::MatrixXd::Identity(matrix.rows(), matrix.cols());
  for (double jitter = policy.initial; jitter <= policy.max * (1.0 + 1e-12); jitter *= policy.growth) {
    if (try_cholesky(matrix + jitter * eye, lower)) return {std::move(lower), jitter};
  }
  throw NumericalError("matrix is not positive definite after jitter escalation to " + std::to_string(policy.max));
}

Eigen::MatrixXd chol_solve(const Eigen::MatrixXd& matrix, const Eigen::MatrixXd& rhs, const JitterPolicy& policy) {
  if (rhs.rows() != matrix.rows()) throw ValidationError("chol_solve: right-hand side has wrong row count");
  return factorize_with_jitter(matrix, policy).solve(rhs);
}

}  // namespace igp
