#include "igp/slice.hpp"

#include <algorithm>

namespace igp {

SliceResult slice_sample(const std::function<double(double)>& log_f, double x0, double log_f0,
                         const SliceOptions& options, Rng& rng) {
  SliceResult result{x0, log_f0, true, 0};
  auto eval = [&](double x) {
    if (!(x > options.lower && x < options.upper)) return -std::numeric_limits<double>::infinity();
    ++result.evaluations;
    return log_f(x);
  };
  const double level = log_f0 + std::log(uniform01(rng));  // log_f0 - Exp(1)

  double left = x0 - options.width * uniform01(rng);
  double right = left + options.width;
  int j = static_cast<int>(std::floor(options.max_step_out * uniform01(rng)));
  int k = options.max_step_out - 1 - j;
  while (j-- > 0 && left > options.lower && eval(left) > level) left -= options.width;
  while (k-- > 0 && right < options.upper && eval(right) > level) right += options.width;
  left = std::max(left, options.lower);
  right = std::min(right, options.upper);

  for (int step = 0; step < options.max_shrink; ++step) {
    const double x1 = left + (right - left) * uniform01(rng);
    const double f1 = eval(x1);
    if (f1 > level) {
      result.value = x1;
      result.log_density = f1;
      return result;
    }
    if (x1 < x0) left = x1;
    else right = x1;
  }
  result.accepted = false;
  return result;
}

}  // namespace igp
