#include <cmath>
#include <vector>

#include "doctest.h"
#include "igp/slice.hpp"
#include "oracles.hpp"

using namespace igp;

TEST_SUITE("slice") {
  TEST_CASE("standard normal target gives standard normal moments") {
    Rng rng(5);
    auto log_f = [](double x) { return -0.5 * x * x; };
    double x = 3.0, lf = log_f(x);
    std::vector<double> draws;
    for (int i = 0; i < 40000; ++i) {
      const auto r = slice_sample(log_f, x, lf, SliceOptions{}, rng);
      x = r.value;
      lf = r.log_density;
      draws.push_back(x);
    }
    CHECK(std::fabs(oracle::mean(draws)) < 0.03);
    CHECK(oracle::variance(draws) == doctest::Approx(1.0).epsilon(0.04));
  }

  TEST_CASE("sharply peaked target concentrates at the peak") {
    Rng rng(6);
    auto log_f = [](double x) { return -0.5 * (x - 0.3) * (x - 0.3) / 1e-8; };
    double x = 0.29, lf = log_f(x);
    SliceOptions opt;
    opt.width = 0.01;
    for (int i = 0; i < 50; ++i) {
      const auto r = slice_sample(log_f, x, lf, opt, rng);
      x = r.value;
      lf = r.log_density;
    }
    CHECK(std::fabs(x - 0.3) < 1e-3);
  }

  TEST_CASE("bounded support is never left") {
    Rng rng(7);
    // Beta(2, 8) on (0, 1)
    auto log_f = [](double x) { return std::log(x) + 7.0 * std::log1p(-x); };
    SliceOptions opt;
    opt.lower = 0.0;
    opt.upper = 1.0;
    opt.width = 2.0;
    double x = 0.5, lf = log_f(x);
    std::vector<double> draws;
    for (int i = 0; i < 100000; ++i) {
      const auto r = slice_sample(log_f, x, lf, opt, rng);
      x = r.value;
      lf = r.log_density;
      REQUIRE(x > 0.0);
      REQUIRE(x < 1.0);
      draws.push_back(x);
    }
    CHECK(oracle::mean(draws) == doctest::Approx(0.2).epsilon(0.02));
  }

  TEST_CASE("shrinkage cap rejects and keeps the current value") {
    Rng rng(8);
    // The slice is a single point: every proposal other than x0 lies below it.
    // Ten halvings cannot collapse the bracket onto x0, so the cap is hit.
    auto log_f = [](double x) { return x == 1.0 ? 0.0 : -1e300; };
    SliceOptions opt;
    opt.max_shrink = 10;
    const auto r = slice_sample(log_f, 1.0, 0.0, opt, rng);
    CHECK_FALSE(r.accepted);
    CHECK(r.value == 1.0);
    CHECK(r.log_density == 0.0);
    CHECK(r.evaluations >= 10);
  }

  TEST_CASE("same seed, same draws") {
    auto log_f = [](double x) { return -std::fabs(x); };
    Rng a(11), b(11);
    double xa = 0.0, xb = 0.0;
    for (int i = 0; i < 100; ++i) {
      xa = slice_sample(log_f, xa, log_f(xa), SliceOptions{}, a).value;
      xb = slice_sample(log_f, xb, log_f(xb), SliceOptions{}, b).value;
    }
    CHECK(xa == xb);
  }
}
