#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <random>

namespace igp {

using Rng = std::mt19937_64;

inline double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

struct SliceOptions {
  double width = 1.0;
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();
  int max_step_out = 32;
  int max_shrink = 100;
};

struct SliceResult {
  double value = 0.0;
  double log_density = 0.0;
  bool accepted = true;  // false when shrinkage hit max_shrink; value is then x0
  int evaluations = 0;
};

/// One univariate stepping-out / shrinkage slice update of x0 under log_f.
/// `log_f0` is log_f(x0). Points outside (lower, upper) have zero density.
SliceResult slice_sample(const std::function<double(double)>& log_f, double x0, double log_f0,
                         const SliceOptions& options, Rng& rng);

}  // namespace igp
