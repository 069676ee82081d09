#include <cmath>
#include <random>

#include <omp.h>

#include "doctest.h"
#include "igp/errors.hpp"
#include "igp/kernel.hpp"
#include "oracles.hpp"

using namespace igp;

TEST_SUITE("kernel") {
  TEST_CASE("rate_cov examples") {
    CHECK(rate_cov({0.2, 2.0, 1.0}, 0.0) == 1.0);
    CHECK(rate_cov({0.5, 1.0, 1.0}, 2.0) == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(rate_cov({0.2, 2.0, 1.0}, 1.0) == doctest::Approx(0.2).epsilon(1e-15));
  }

  TEST_CASE("rate_cov is a correlation") {
    for (double kappa : {0.5, 1.0, 1.5, 2.0}) {
      const KernelParams p{0.3, kappa, 1.0};
      for (double dt : {0.1, 0.7, 2.5}) {
        CHECK(rate_cov(p, dt) == rate_cov(p, -dt));
        CHECK(rate_cov(p, dt) < 1.0);
        CHECK(rate_cov(p, dt) > 0.0);
      }
      CHECK(rate_cov(p, 1e3) < 1e-12);
    }
  }

  TEST_CASE("parameter domain") {
    CHECK_THROWS_AS(rate_cov({0.0, 2.0, 1.0}, 1.0), ParameterDomainError);
    CHECK_THROWS_AS(rate_cov({1.0, 2.0, 1.0}, 1.0), ParameterDomainError);
    CHECK_THROWS_AS(rate_cov({0.5, 2.5, 1.0}, 1.0), ParameterDomainError);
    CHECK_THROWS_AS(rate_cov({0.5, 0.0, 1.0}, 1.0), ParameterDomainError);
    CHECK_THROWS_AS((KernelParams{0.5, 2.0, 0.0}.validate()), ParameterDomainError);
  }

  TEST_CASE("grid invariants") {
    CHECK_THROWS_AS(Grid({0.0, 0.5, 0.5, 1.0}), ValidationError);
    CHECK_THROWS_AS(Grid({1.0, 0.5}), ValidationError);
    CHECK_THROWS_AS(Grid(std::vector<double>{}), ValidationError);
    const Grid g = Grid::uniform(0.0, 2.0, 5);
    CHECK(g.size() == 5);
    CHECK(g.nodes()[2] == doctest::Approx(1.0));
    CHECK(g.back() == 2.0);
    CHECK(g.contains(1.3));
    CHECK_FALSE(g.contains(2.1));
  }

  TEST_CASE("single-node grid gives [1 + jitter]") {
    const Eigen::MatrixXd c = rate_cov_matrix({0.2, 2.0, 1.0}, Grid({0.7}), 1e-6);
    REQUIRE(c.rows() == 1);
    CHECK(c(0, 0) == doctest::Approx(1.0 + 1e-6).epsilon(1e-15));
  }

  TEST_CASE("random grid covariance is positive definite") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 3.0);
    std::vector<double> nodes(10);
    for (auto& x : nodes) x = u(rng);
    std::sort(nodes.begin(), nodes.end());
    const Eigen::MatrixXd c = rate_cov_matrix({0.3, 2.0, 1.0}, Grid(nodes), 1e-10);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(c);
    CHECK(eig.eigenvalues().minCoeff() > 0.0);
    const CholeskyFactor f = factorize_with_jitter(c);
    CHECK((f.lower().diagonal().array() > 0.0).all());
  }

  TEST_CASE("rate_cov_matrix parallel equals serial") {
    const Grid g = Grid::uniform(0.0, 2.0, 40);
    for (double kappa : {1.0, 2.0}) {
      const KernelParams p{0.25, kappa, 1.0};
      const int saved = omp_get_max_threads();
      omp_set_num_threads(4);
      const Eigen::MatrixXd a = rate_cov_matrix(p, g, 1e-10);
      omp_set_num_threads(saved);
      const Eigen::MatrixXd b = rate_cov_matrix_serial(p, g, 1e-10);
      CHECK((a.array() == b.array()).all());
    }
  }

  TEST_CASE("quadrature rule") {
    const auto q = QuadratureRule::chebyshev_gauss(30);
    double sum = 0.0;
    for (double w : q.weights) sum += w;
    CHECK(sum == doctest::Approx(2.0).epsilon(1e-13));
    for (int k = 0; k < 30; ++k) CHECK(q.nodes[k] == doctest::Approx(std::cos((2.0 * k + 1.0) * std::numbers::pi / 60.0)));
    // exact for polynomials of degree < L
    CHECK(q.integrate([](double v) { return std::pow(v, 20) + v * v * v; }, -1.0, 1.0) ==
          doctest::Approx(2.0 / 21.0).epsilon(1e-13));
    const auto eq = QuadratureRule::chebyshev_gauss(30, QuadratureWeighting::ChebyshevWeightCancel);
    for (int k = 0; k < 30; ++k)
      CHECK(eq.weights[k] / std::sqrt(1.0 - eq.nodes[k] * eq.nodes[k]) == doctest::Approx(std::numbers::pi / 30.0));
  }

  TEST_CASE("cross_cov of an empty interval is zero") {
    const auto q = QuadratureRule::chebyshev_gauss(30);
    for (double node : {0.0, 0.4, 3.0}) CHECK(cross_cov({0.2, 2.0, 1.0}, 0.0, node, q) == 0.0);
    CHECK_THROWS_AS(cross_cov({0.2, 2.0, 1.0}, -0.1, 0.0, q), ParameterDomainError);
  }

  TEST_CASE("cross_cov kappa=1 example") {
    const auto q = QuadratureRule::chebyshev_gauss(30);
    const double rho = std::exp(-1.0);
    const double got = cross_cov({rho, 1.0, 1.0}, 1.0, 0.0, q);
    CHECK(got == doctest::Approx(1.0 - std::exp(-1.0)).epsilon(1e-6));
    const double trap = oracle::trapezoid([&](double u) { return oracle::corr(rho, 1.0, u); }, 0.0, 1.0, 1000000);
    CHECK(std::fabs(got - trap) / trap < 1e-6);
    CHECK(got == doctest::Approx(0.6321).epsilon(1e-4));
  }

  TEST_CASE("cross_cov kappa=2 against a dense trapezoid") {
    const auto q = QuadratureRule::chebyshev_gauss(30);
    const double got = cross_cov({0.2, 2.0, 1.0}, 1.0, 0.5, q);
    const double trap = oracle::trapezoid([](double u) { return oracle::corr(0.2, 2.0, u - 0.5); }, 0.0, 1.0, 1000000);
    CHECK(std::fabs(got - trap) / trap < 1e-6);
  }

  TEST_CASE("cross_cov kappa=1 matches the closed form") {
    const auto q = QuadratureRule::chebyshev_gauss(30);
    for (double rho : {0.05, 0.2, 0.5, 0.9})
      for (double chi : {0.3, 1.0, 2.2})
        for (double node : {0.0, 0.15, 0.8, 1.7, 2.5}) {
          const double exact = oracle::exp_kernel_integral(rho, chi, node);
          const double got = cross_cov({rho, 1.0, 1.0}, chi, node, q);
          CHECK(std::fabs(got - exact) / exact < 1e-6);
        }
  }

  TEST_CASE("doubling quadrature order barely moves smooth integrals") {
    const auto q30 = QuadratureRule::chebyshev_gauss(30);
    const auto q60 = QuadratureRule::chebyshev_gauss(60);
    for (double rho : {0.1, 0.2, 0.6})
      for (double chi : {0.4, 1.3, 2.1})
        for (double node : {0.0, 0.5, 1.9}) {
          const KernelParams p{rho, 2.0, 1.0};
          const double a = cross_cov(p, chi, node, q30);
          const double b = cross_cov(p, chi, node, q60);
          CHECK(std::fabs(a - b) / std::fabs(b) <= 1e-8);
        }
  }

  TEST_CASE("cross_cov_matrix agrees with scalar loops") {
    const auto q = QuadratureRule::chebyshev_gauss(30);
    const Grid g({0.0, 0.4, 1.1, 2.0});
    const std::vector<double> chis{0.0, 0.7, 1.9};
    for (double kappa : {1.0, 1.5, 2.0}) {
      const KernelParams p{0.3, kappa, 1.0};
      const Eigen::MatrixXd k = cross_cov_matrix(p, chis, g, q);
      REQUIRE(k.rows() == 3);
      REQUIRE(k.cols() == 4);
      CHECK(k.row(0).isZero(0.0));
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 4; ++j) CHECK(k(i, j) == cross_cov(p, chis[i], g.nodes()[j], q));
    }
  }

  TEST_CASE("cross_cov_matrix parallel equals serial bitwise") {
    const auto q = QuadratureRule::chebyshev_gauss(30);
    const Grid g = Grid::uniform(0.0, 2.0, 25);
    std::vector<double> chis;
    for (int i = 0; i < 37; ++i) chis.push_back(0.05 * i);
    const int saved = omp_get_max_threads();
    omp_set_num_threads(4);
    const Eigen::MatrixXd a = cross_cov_matrix({0.2, 1.5, 1.0}, chis, g, q);
    omp_set_num_threads(saved);
    const Eigen::MatrixXd b = cross_cov_matrix_serial({0.2, 1.5, 1.0}, chis, g, q);
    CHECK((a.array() == b.array()).all());
  }

  TEST_CASE("CrossCovCache agrees with direct evaluation") {
    const auto q = QuadratureRule::chebyshev_gauss(30);
    std::vector<double> chis;
    for (int i = 0; i < 23; ++i) chis.push_back(0.09 * i + 0.013);
    struct Case {
      Grid grid;
      double kappa;
    };
    const std::vector<Case> cases{{Grid::uniform(0.0, 2.1, 30), 2.0},
                                  {Grid::uniform(0.0, 2.1, 30), 1.0},
                                  {Grid({0.0, 0.3, 0.35, 1.0, 1.6, 2.1}), 2.0},
                                  {Grid::uniform(0.0, 2.1, 12), 1.5}};
    for (const auto& c : cases) {
      CrossCovCache cache(c.grid, q, c.kappa);
      cache.set_times(chis);
      // 1e-200 exercises the guard that falls back to the per-row path.
      for (double rho : {1e-200, 0.01, 0.2, 0.7, 0.999}) {
        const KernelParams p{rho, c.kappa, 1.0};
        const Eigen::MatrixXd direct = cross_cov_matrix_serial(p, chis, c.grid, q);
        const Eigen::MatrixXd cached = cache.evaluate(rho);
        const double scale = direct.cwiseAbs().maxCoeff();
        CHECK((cached - direct).cwiseAbs().maxCoeff() <= 1e-12 * scale);
        for (std::size_t i = 0; i < chis.size(); i += 5)
          CHECK((cache.evaluate_row(i, rho) - direct.row(static_cast<Eigen::Index>(i))).cwiseAbs().maxCoeff() <=
                1e-12 * scale);
      }
      cache.set_time(3, 1.234);
      CHECK(cache.time(3) == 1.234);
      const KernelParams p{0.3, c.kappa, 1.0};
      for (std::size_t j = 0; j < c.grid.size(); ++j)
        CHECK(cache.evaluate(0.3)(3, static_cast<Eigen::Index>(j)) ==
              doctest::Approx(cross_cov(p, 1.234, c.grid.nodes()[j], q)).epsilon(1e-12));
    }
  }

  TEST_CASE("chol_solve examples") {
    const Eigen::MatrixXd rhs = Eigen::MatrixXd::Random(4, 2);
    CHECK((chol_solve(Eigen::MatrixXd::Identity(4, 4), rhs) - rhs).cwiseAbs().maxCoeff() < 1e-14);
    Eigen::MatrixXd a(2, 2);
    a << 2, 1, 1, 2;
    const Eigen::MatrixXd x = chol_solve(a, Eigen::Vector2d(3, 3));
    CHECK(x(0, 0) == doctest::Approx(1.0));
    CHECK(x(1, 0) == doctest::Approx(1.0));
  }

  TEST_CASE("chol_solve residual on random SPD") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> n;
    Eigen::MatrixXd b(20, 20);
    for (int i = 0; i < 20; ++i)
      for (int j = 0; j < 20; ++j) b(i, j) = n(rng);
    const Eigen::MatrixXd a = b * b.transpose() + 0.5 * Eigen::MatrixXd::Identity(20, 20);
    Eigen::VectorXd rhs(20);
    for (int i = 0; i < 20; ++i) rhs(i) = n(rng);
    const Eigen::MatrixXd x = chol_solve(a, rhs);
    CHECK((a * x - rhs).norm() <= 1e-8);
  }

  TEST_CASE("jitter escalation") {
    // rank one: needs jitter, gets the smallest that works
    Eigen::MatrixXd a = Eigen::MatrixXd::Ones(3, 3);
    const CholeskyFactor f = factorize_with_jitter(a);
    CHECK(f.jitter() > 0.0);
    CHECK(f.jitter() <= 1e-4);
    // well conditioned: no jitter
    CHECK(factorize_with_jitter(Eigen::MatrixXd::Identity(3, 3)).jitter() == 0.0);
    // indefinite: beyond any allowed jitter
    Eigen::MatrixXd bad = Eigen::MatrixXd::Identity(2, 2);
    bad(1, 1) = -1.0;
    CHECK_THROWS_AS(factorize_with_jitter(bad), NumericalError);
    CHECK_THROWS_AS(chol_solve(bad, Eigen::Vector2d(1, 1)), NumericalError);
    CHECK_THROWS(chol_solve(Eigen::MatrixXd::Identity(2, 2), Eigen::Vector3d(1, 1, 1)));
  }

  TEST_CASE("dense near-duplicate grid factorizes with jitter") {
    std::vector<double> nodes;
    for (int i = 0; i < 60; ++i) nodes.push_back(i * 1e-3);
    const Eigen::MatrixXd c = rate_cov_matrix({0.2, 2.0, 1.0}, Grid(nodes), 0.0);
    const CholeskyFactor f = factorize_with_jitter(c);
    CHECK((f.lower().diagonal().array() > 0.0).all());
    CHECK(std::isfinite(f.log_determinant()));
  }
}
