#include "igp/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "igp/errors.hpp"

namespace igp {

namespace {

double mean_of(std::span<const double> v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

std::vector<double> autocovariance(std::span<const double> v, std::size_t max_lag) {
  const double mu = mean_of(v);
  const std::size_t n = v.size();
  std::vector<double> acov(max_lag + 1, 0.0);
  for (std::size_t lag = 0; lag <= max_lag; ++lag) {
    double s = 0.0;
    for (std::size_t t = 0; t + lag < n; ++t) s += (v[t] - mu) * (v[t + lag] - mu);
    acov[lag] = s / static_cast<double>(n);
  }
  return acov;
}

}  // namespace

double spectrum0(std::span<const double> values) {
  const std::size_t n = values.size();
  if (n < 2) throw UnsupportedInputError("spectrum0 needs at least two values");
  const auto max_order = std::min<std::size_t>(n - 1, static_cast<std::size_t>(10.0 * std::log10(static_cast<double>(n))));
  const std::vector<double> acov = autocovariance(values, max_order);
  if (!(acov[0] > 0.0)) return 0.0;

  // Levinson-Durbin over orders 0..max_order, keeping the AIC-best model.
  std::vector<double> phi(max_order + 1, 0.0), prev(max_order + 1, 0.0);
  double innovation = acov[0];
  double best_aic = static_cast<double>(n) * std::log(innovation);
  double best_spec = innovation;
  for (std::size_t p = 1; p <= max_order; ++p) {
    double num = acov[p];
    for (std::size_t j = 1; j < p; ++j) num -= prev[j] * acov[p - j];
    const double reflection = num / innovation;
    phi[p] = reflection;
    for (std::size_t j = 1; j < p; ++j) phi[j] = prev[j] - reflection * prev[p - j];
    innovation *= (1.0 - reflection * reflection);
    if (!(innovation > 0.0)) break;
    const double aic = static_cast<double>(n) * std::log(innovation) + 2.0 * static_cast<double>(p);
    if (aic < best_aic) {
      best_aic = aic;
      const double sum_phi = std::accumulate(phi.begin() + 1, phi.begin() + static_cast<std::ptrdiff_t>(p) + 1, 0.0);
      best_spec = innovation / ((1.0 - sum_phi) * (1.0 - sum_phi));
    }
    std::copy(phi.begin(), phi.end(), prev.begin());
  }
  return best_spec;
}

double geweke(std::span<const double> values, double frac_first, double frac_last) {
  if (values.size() < 100) throw UnsupportedInputError("geweke needs a chain of length >= 100");
  if (!(frac_first > 0.0 && frac_last > 0.0 && frac_first + frac_last <= 1.0))
    throw UnsupportedInputError("geweke fractions must be positive and sum to at most 1");
  const std::size_t n = values.size();
  const auto n1 = static_cast<std::size_t>(std::floor(frac_first * static_cast<double>(n)));
  const auto n2 = static_cast<std::size_t>(std::floor(frac_last * static_cast<double>(n)));
  const auto first = values.first(n1);
  const auto last = values.last(n2);
  const double diff = mean_of(first) - mean_of(last);
  const double var = spectrum0(first) / static_cast<double>(n1) + spectrum0(last) / static_cast<double>(n2);
  if (!(var > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  return diff / std::sqrt(var);
}

double gelman_rubin(const std::vector<std::vector<double>>& chains) {
  if (chains.size() < 2) throw UnsupportedInputError("gelman_rubin needs at least two chains");
  const std::size_t n = chains.front().size();
  if (n < 10) throw UnsupportedInputError("gelman_rubin needs chains of length >= 10");
  for (const auto& c : chains)
    if (c.size() != n) throw UnsupportedInputError("gelman_rubin needs chains of equal length");
  const double nn = static_cast<double>(n);
  const double mm = static_cast<double>(chains.size());
  std::vector<double> means;
  double within = 0.0;
  for (const auto& c : chains) {
    const double mu = mean_of(c);
    means.push_back(mu);
    double ss = 0.0;
    for (double x : c) ss += (x - mu) * (x - mu);
    within += ss / (nn - 1.0);
  }
  within /= mm;
  const double grand = mean_of(means);
  double between = 0.0;
  for (double mu : means) between += (mu - grand) * (mu - grand);
  between *= nn / (mm - 1.0);
  if (!(within > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  const double pooled = (nn - 1.0) / nn * within + between / nn;
  return std::sqrt(pooled / within);
}

double effective_sample_size(std::span<const double> values) {
  const std::size_t n = values.size();
  if (n < 10) throw UnsupportedInputError("effective_sample_size needs length >= 10");
  const double mu = mean_of(values);
  auto acov_at = [&](std::size_t lag) {
    double s = 0.0;
    for (std::size_t t = 0; t + lag < n; ++t) s += (values[t] - mu) * (values[t + lag] - mu);
    return s / static_cast<double>(n);
  };
  const double c0 = acov_at(0);
  if (!(c0 > 0.0)) return 1.0;
  double sum_pairs = 0.0;  // sum over k of (rho_{2k} + rho_{2k+1}), k >= 0
  for (std::size_t k = 0; 2 * k + 1 < n; ++k) {
    const double pair = (k == 0 ? 1.0 : acov_at(2 * k) / c0) + acov_at(2 * k + 1) / c0;
    if (pair <= 0.0) break;
    sum_pairs += pair;
  }
  // 1 + 2 sum_{k>=1} rho_k = 2 sum_pairs - 1
  const double tau = std::max(2.0 * sum_pairs - 1.0, 1.0 / static_cast<double>(n));
  return std::min(static_cast<double>(n) / tau, static_cast<double>(n) * std::log10(static_cast<double>(n)));
}

}  // namespace igp
