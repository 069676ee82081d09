#pragma once

// Reference computations written independently of the library: plain loops,
// dense quadrature and textbook densities.

#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

inline double trapezoid(const std::function<double(double)>& f, double a, double b, long panels) {
  const double h = (b - a) / static_cast<double>(panels);
  double acc = 0.5 * (f(a) + f(b));
  for (long i = 1; i < panels; ++i) acc += f(a + h * static_cast<double>(i));
  return acc * h;
}

// Composite Simpson, for the double integrals where the trapezoid is too slow.
inline double simpson(const std::function<double(double)>& f, double a, double b, long panels) {
  if (panels % 2) ++panels;
  const double h = (b - a) / static_cast<double>(panels);
  double acc = f(a) + f(b);
  for (long i = 1; i < panels; ++i) acc += (i % 2 ? 4.0 : 2.0) * f(a + h * static_cast<double>(i));
  return acc * h / 3.0;
}

inline double corr(double rho, double kappa, double dt) { return std::pow(rho, std::pow(std::fabs(dt), kappa)); }

// int_0^chi rho^|u - x| du for kappa = 1.
inline double exp_kernel_integral(double rho, double chi, double x) {
  const double b = -std::log(rho);
  auto part = [&](double lo, double hi, double centre, bool below) {
    // integral of exp(-b |u - centre|) over [lo, hi] lying on one side of centre
    if (hi <= lo) return 0.0;
    if (below) return (std::exp(-b * (centre - hi)) - std::exp(-b * (centre - lo))) / b;
    return (std::exp(-b * (lo - centre)) - std::exp(-b * (hi - centre))) / b;
  };
  if (x <= 0.0) return part(0.0, chi, x, false);
  if (x >= chi) return part(0.0, chi, x, true);
  return part(0.0, x, x, true) + part(x, chi, x, false);
}

inline double normal_logpdf(double x, double mean, double var) {
  return -0.5 * std::log(2.0 * std::numbers::pi * var) - 0.5 * (x - mean) * (x - mean) / var;
}

inline double bivariate_logpdf(const Eigen::Vector2d& x, const Eigen::Vector2d& mean, const Eigen::Matrix2d& cov) {
  const double det = cov(0, 0) * cov(1, 1) - cov(0, 1) * cov(1, 0);
  const Eigen::Vector2d d = x - mean;
  const double q = (cov(1, 1) * d(0) * d(0) - 2.0 * cov(0, 1) * d(0) * d(1) + cov(0, 0) * d(1) * d(1)) / det;
  return -std::log(2.0 * std::numbers::pi) - 0.5 * std::log(det) - 0.5 * q;
}

inline double beta_logpdf(double x, double a, double b) {
  return std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + (a - 1.0) * std::log(x) + (b - 1.0) * std::log1p(-x);
}

inline double gamma_logpdf(double x, double shape, double rate) {
  return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(x) - rate * x;
}

inline double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double variance(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

}  // namespace oracle
