#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <span>
#include <vector>

#include "doctest.h"
#include "igp/errors.hpp"
#include "igp/validation.hpp"
#include "oracles.hpp"

using namespace igp;

TEST_SUITE("validation") {
  TEST_CASE("interval score examples") {
    CHECK(interval_score(0.0, 1.0, 0.5, 0.05) == doctest::Approx(1.0));
    CHECK(interval_score(0.0, 1.0, 1.5, 0.05) == doctest::Approx(21.0));
    CHECK(interval_score(0.0, 1.0, -0.25, 0.05) == doctest::Approx(11.0));
    CHECK_THROWS_AS(interval_score(1.0, 0.0, 0.5, 0.05), ParameterDomainError);
    CHECK_THROWS_AS(interval_score(0.0, 1.0, 0.5, 1.0), ParameterDomainError);
  }

  TEST_CASE("interval score is at least the width, with equality inside") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int i = 0; i < 1000; ++i) {
      double l = u(rng), r = u(rng), x = u(rng);
      if (l > r) std::swap(l, r);
      const double s = interval_score(l, r, x, 0.05);
      CHECK(s >= r - l);
      CHECK((s == r - l) == (l <= x && x <= r));
    }
  }

  TEST_CASE("scenario presets match the published design") {
    const auto p = ScenarioSpec::presets(200, 1);
    REQUIRE(p.size() == 7);
    const double expected[7][4] = {{1, 0.1, 0.2, 0.01}, {2, 0.1, 0.2, 0.01},  {0.5, 0.1, 0.1, 0.01}, {1, 0.5, 0.2, 0.1},
                                   {1, 0.02, 0.2, 0.001}, {2, 0.5, 0.4, 0.1}, {0.5, 0.02, 0.1, 0.001}};
    std::set<std::uint64_t> seeds;
    for (std::size_t i = 0; i < 7; ++i) {
      CHECK(p[i].label == std::string(1, static_cast<char>('a' + i)));
      CHECK(p[i].sigma2_mean == expected[i][0]);
      CHECK(p[i].sigma2_var == expected[i][1]);
      CHECK(p[i].rho_mean == expected[i][2]);
      CHECK(p[i].rho_var == expected[i][3]);
      CHECK(p[i].n_sims == 200);
      CHECK_NOTHROW(p[i].validate());
      seeds.insert(p[i].seed);
    }
    CHECK(seeds.size() == 7);
    CHECK(p[0].reported95 == 0.954);
    CHECK(p[3].reported68 == 0.604);
    ScenarioSpec bad = p[0];
    bad.rho_var = 0.5;
    CHECK_THROWS_AS(bad.validate(), ValidationError);
  }

  TEST_CASE("moment matching") {
    const auto g = gamma_from_moments(2.0, 0.5);
    CHECK(g.shape / g.rate == doctest::Approx(2.0));
    CHECK(g.shape / (g.rate * g.rate) == doctest::Approx(0.5));
    const auto b = beta_from_moments(0.2, 0.01);
    const double s = b.a + b.b;
    CHECK(b.a / s == doctest::Approx(0.2));
    CHECK(b.a * b.b / (s * s * (s + 1.0)) == doctest::Approx(0.01));
  }

  TEST_CASE("simulation without rate or noise is flat") {
    Design d;
    d.noise_sd = 0.0;
    d.alpha = 0.37;
    d.n_obs = 20;
    const auto sim = simulate_dataset(0.0, 0.2, d, 3);
    REQUIRE(sim.records.size() == 20);
    for (const auto& r : sim.records) CHECK(r.level == 0.37);
    for (double w : sim.true_rate) CHECK(w == 0.0);
    CHECK(sim.eval_years.size() == d.eval_points);
  }

  TEST_CASE("simulation is reproducible") {
    const Design d;
    const auto a = simulate_dataset(1.0, 0.2, d, 11);
    const auto b = simulate_dataset(1.0, 0.2, d, 11);
    const auto c = simulate_dataset(1.0, 0.2, d, 12);
    CHECK(a.records == b.records);
    CHECK(a.true_rate == b.true_rate);
    CHECK(a.records != c.records);
  }

  TEST_CASE("simulated level variance matches the double-integrated covariance") {
    Design d;
    d.n_obs = 5;  // 0, 500, ..., 2000 years
    d.noise_sd = 0.0;
    d.sim_grid_m = 40;
    d.eval_points = 2;
    const double sigma2 = 1.5, rho = 0.2;
    std::vector<double> h1, h3;
    for (std::uint64_t s = 0; s < 8000; ++s) {
      const auto sim = simulate_dataset(sigma2, rho, d, 1000 + s);
      h1.push_back(sim.records[1].level);
      h3.push_back(sim.records[3].level);
    }
    // Var h(t) = sigma2 int_0^t int_0^t rho^((u - v)^2) du dv, t in kiloyears (metres^2)
    auto var_h = [&](double t) {
      return sigma2 * oracle::simpson([&](double u) { return oracle::simpson([&](double v) { return oracle::corr(rho, 2.0, u - v); }, 0.0, t, 200); },
                                      0.0, t, 200);
    };
    CHECK(oracle::variance(h1) == doctest::Approx(var_h(0.5)).epsilon(0.05));
    CHECK(oracle::variance(h3) == doctest::Approx(var_h(1.5)).epsilon(0.05));
  }

  TEST_CASE("rate coverage") {
    RateSummary s;
    s.eval_times = {0, 1, 2, 3};
    s.mean = {0, 0, 0, 0};
    s.lower95 = {-2, -2, -2, -2};
    s.upper95 = {2, 2, 2, 2};
    s.lower68 = {-1, -1, -1, -1};
    s.upper68 = {1, 1, 1, 1};
    s.mc_se = {0, 0, 0, 0};
    const std::vector<double> truth{0.5, 1.5, -3.0, -0.2};
    const auto [c95, c68] = rate_coverage(s, truth);
    CHECK(c95 == doctest::Approx(0.75));
    CHECK(c68 == doctest::Approx(0.5));
    CHECK_THROWS_AS(rate_coverage(s, std::vector<double>{1.0}), ValidationError);
  }

  TEST_CASE("a small scenario run completes") {
    auto spec = ScenarioSpec::presets(3, 5)[0];
    spec.design.n_obs = 40;
    auto fit = ValidationFit::scenario_default();
    fit.settings.chains.n_iterations = 800;
    fit.settings.chains.burn_in = 200;
    fit.settings.chains.thin = 2;
    CHECK(fit.settings.priors.upsilon2.shape == 10.0);
    CHECK(fit.settings.priors.upsilon2.rate == 10.0);
    CHECK(fit.settings.priors.rho.a == 2.0);
    CHECK(fit.settings.priors.rho.b == 8.0);
    const auto r = run_scenario(spec, fit);
    CHECK(r.label == "a");
    CHECK(r.n_completed + r.n_failed == 3);
    CHECK(r.failures_acceptable());
    CHECK(r.coverage95 >= r.coverage68);
    CHECK(r.coverage95 <= 1.0);
    CHECK(r.coverage68 > 0.0);
    const auto again = run_scenario(spec, fit);
    CHECK(again.coverage95 == r.coverage95);
  }

  TEST_CASE("folds partition a permutation") {
    const auto folds = make_folds(103, 10, 7);
    REQUIRE(folds.size() == 10);
    std::vector<int> seen(103, 0);
    for (std::size_t f = 0; f < folds.size(); ++f) {
      CHECK(folds[f].size() == (f + 1) * 103 / 10 - f * 103 / 10);
      for (std::size_t i : folds[f]) ++seen[i];
    }
    CHECK(std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; }));
    CHECK(make_folds(103, 10, 7) == folds);
    CHECK(make_folds(103, 10, 8) != folds);
    CHECK_THROWS_AS(make_folds(5, 10, 1), ValidationError);
    CHECK_THROWS_AS(make_folds(5, 1, 1), ValidationError);
  }

  TEST_CASE("least squares recovers an exact quadratic") {
    std::vector<double> x, y;
    for (int i = 0; i < 30; ++i) {
      x.push_back(1700.0 + 10.0 * i);
      y.push_back(0.5 - 2e-3 * x.back() + 3e-6 * x.back() * x.back());
    }
    const LsrFit fit(x, y, 2);
    const Eigen::VectorXd c = fit.original_coefficients();
    CHECK(c(0) == doctest::Approx(0.5).epsilon(1e-10));
    CHECK(c(1) == doctest::Approx(-2e-3).epsilon(1e-10));
    CHECK(c(2) == doctest::Approx(3e-6).epsilon(1e-10));
    CHECK(fit.residual_sd() < 1e-10);
    for (double xi : x) CHECK(fit.predict(xi) == doctest::Approx(0.5 - 2e-3 * xi + 3e-6 * xi * xi).epsilon(1e-10));
  }

  TEST_CASE("least-squares prediction interval widens with leverage") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> noise(0.0, 0.01);
    std::vector<double> x, y;
    for (int i = 0; i < 40; ++i) {
      x.push_back(static_cast<double>(i));
      y.push_back(0.1 * i + noise(rng));
    }
    const LsrFit fit(x, y, 1);
    const double centre = 19.5;
    double previous = fit.half_width95(centre);
    for (double d = 2.0; d < 60.0; d += 2.0) {
      const double w = fit.half_width95(centre + d);
      CHECK(w > previous);
      CHECK(fit.half_width95(centre - d) == doctest::Approx(w).epsilon(1e-9));
      previous = w;
    }
    const auto p = lsr_baseline(x, y, std::vector<double>{10.0}, 1);
    CHECK(p.upper95[0] - p.mean[0] == doctest::Approx(fit.half_width95(10.0)));
    CHECK_THROWS_AS(LsrFit(std::vector<double>(10, 1.0), std::span<const double>(y).first(10), 1), ValidationError);
    CHECK_THROWS_AS(LsrFit(std::vector<double>{1, 2, 3}, std::vector<double>{1, 2, 3}, 2), ValidationError);
  }

  TEST_CASE("cross-validation runs for every model") {
    std::vector<ObservationRecord> recs;
    std::mt19937_64 rng(9);
    std::normal_distribution<double> noise(0.0, 0.01);
    for (int i = 0; i < 30; ++i) {
      ObservationRecord r;
      r.age = 1900.0 + 3.0 * i;
      r.level = 0.002 * (r.age - 1900.0) + noise(rng);
      r.level_sd = 0.01;
      recs.push_back(r);
    }
    FitSettings settings;
    settings.chains.n_iterations = 600;
    settings.chains.burn_in = 100;
    settings.chains.thin = 1;
    settings.chains.n_chains = 1;
    settings.grid_m = 15;
    for (CvModel model : {CvModel::LSR, CvModel::SIGP}) {
      CAPTURE(to_string(model));
      const auto r = kfold_cv(recs, GiaAssignment{}, model, 5, 3, settings, 1, 200);
      CHECK(r.n_points == 30);
      CHECK(r.empirical_coverage >= 0.0);
      CHECK(r.empirical_coverage <= 1.0);
      CHECK(r.empirical_coverage > 0.6);
      CHECK(r.avg_interval_width > 0.0);
      CHECK(r.avg_interval_width < 0.2);
      CHECK(r.avg_interval_score >= r.avg_interval_width);
      const auto again = kfold_cv(recs, GiaAssignment{}, model, 5, 3, settings, 1, 200);
      CHECK(again.avg_interval_score == r.avg_interval_score);
    }
  }
}
