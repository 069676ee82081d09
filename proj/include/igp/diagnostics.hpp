#pragma once

#include <span>
#include <vector>

namespace igp {

/// Spectral density at frequency zero from an AR(p) fit with p chosen by AIC.
/// Var(mean of n draws) ~= spectrum0 / n.
double spectrum0(std::span<const double> values);

/// Geweke z-score comparing the first `frac_first` and last `frac_last` of a
/// chain. NaN when the chain has zero variance (diagnostic failure).
double geweke(std::span<const double> values, double frac_first = 0.1, double frac_last = 0.5);

/// Potential scale reduction factor. Needs >= 2 chains of equal length >= 10.
double gelman_rubin(const std::vector<std::vector<double>>& chains);

/// n / (1 + 2 sum rho_k), truncated by Geyer's initial positive sequence.
double effective_sample_size(std::span<const double> values);

}  // namespace igp
