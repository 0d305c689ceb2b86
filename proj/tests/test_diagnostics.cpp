#include <doctest.h>

#include <cmath>

#include "evobayes/diagnostics.hpp"
#include "evobayes/rng.hpp"

using namespace evobayes;
using namespace evobayes::diagnostics;

TEST_CASE("hellinger: identical, constant and Gaussian cases") {
  std::vector<double> a(200);
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = std::sin(static_cast<double>(i));
  CHECK(hellinger_empirical(a, a).distance == 0.0);

  const std::vector<double> one(100, 0.0), two(100, std::log(2.0));
  const double expect = std::sqrt(0.5 * (1 - std::sqrt(2.0)) * (1 - std::sqrt(2.0)));
  CHECK(std::abs(hellinger_empirical(one, two).distance - expect) < 1e-12);
  CHECK(hellinger_empirical(one, two).distance == hellinger_empirical(two, one).distance);

  // Q = N(0,1), P = N(m1,1), P' = N(m2,1): d_H^2 = 1 - exp(-(m1-m2)^2/8)
  const double m1 = 0.3, m2 = -0.5;
  NormalStream s(11, 0, 0);
  std::vector<double> la, lb;
  for (int i = 0; i < 20000; ++i) {
    const double x = s();
    la.push_back(m1 * x - 0.5 * m1 * m1);
    lb.push_back(m2 * x - 0.5 * m2 * m2);
  }
  const auto h = hellinger_empirical(la, lb);
  const double exact = std::sqrt(1 - std::exp(-(m1 - m2) * (m1 - m2) / 8));
  CHECK(std::abs(h.distance - exact) <= 3 * h.std_error);
  CHECK(h.distance <= 1 + 3 * h.std_error);
  CHECK_THROWS_AS(hellinger_empirical(one, a), std::invalid_argument);
}

TEST_CASE("mc convergence rate of the LSG posterior mean") {
  const LinearGaussian lg;
  CHECK(lg.posterior_mean() == 0.5);
  const auto r = mc_convergence_experiment(lg, {16, 64, 256, 1024}, 50);
  CHECK(r.slope >= -0.7);
  CHECK(r.slope <= -0.3);
  CHECK(r.paired_fraction >= 0.9);
  CHECK_FALSE(r.high_variance);
  CHECK(mc_convergence_experiment(lg, {16, 64, 256}, 1).high_variance);
  CHECK(std::abs(lsg_posterior_mean(lg, 10000, 1) - 0.5) < 0.05 * 0.5);
}

TEST_CASE("stability: zero perturbation gives identical runs") {
  auto toy = ScalarToy::standard();
  toy.data = 1.0;
  toy.start = 0.0;
  const auto r = stability_experiment(toy, {1.0}, 0.0, {1, 2}, 20);
  CHECK(r.discrepancy[0][0] == 0.0);
  CHECK(r.discrepancy[0][1] == 0.0);
}

TEST_CASE("stability trend on the scalar toy") {
  auto toy = ScalarToy::standard();
  toy.data = 1.0;
  toy.start = 0.0;
  const auto r = stability_experiment(toy, {1.0, 0.25, 0.0625}, 0.01, {1, 2, 3, 4, 5}, 50);
  CHECK(r.monotone);
  CHECK(r.bound_fraction >= 0.9);
}

TEST_CASE("tau order with coupled paths") {
  auto toy = ScalarToy::standard();
  toy.config.sigma_B = 0.1;
  toy.config.sigma_eta = 0.1;
  CHECK(coupled_run(toy, 0.25, 8, 4, 4, 3) == coupled_run(toy, 0.25, 8, 4, 4, 3));
  CHECK(coupled_run(toy, 0.25, 8, 1, 1, 3) == coupled_run(toy, 0.25, 8, 1, 1, 3));
  CHECK_THROWS_AS(coupled_run(toy, 0.25, 8, 3, 16, 1), std::invalid_argument);
  const auto r = tau_order_experiment(toy, 0.25, 8, {4, 16}, 256, {1, 2, 3, 4, 5, 6, 7, 8, 9, 10});
  CHECK(r.median_contraction[0] >= 1.5);
  CHECK(r.median_contraction[1] >= r.median_contraction[0]);
}

TEST_CASE("version-1 martingale checks") {
  std::vector<double> zeros(2000, 0.0);
  const auto r = version1_martingale_check(version1_tail(zeros, 0.01, 4), 0.01);
  CHECK(r.mean_ok);
  CHECK(r.correlation_ok);
  const auto t = version1_martingale_check(version1_tail(zeros, 1e-8, 4), 1e-8);
  CHECK(t.mean < 1e-6);
  std::vector<double> shifted(2000, 0.7);
  CHECK(version1_martingale_check(version1_tail(shifted, 0.01, 4), 0.01, 0.7).mean_ok);
  CHECK_THROWS_AS(version1_martingale_check(std::vector<double>(100, 0.02), 0.01), std::invalid_argument);
}

TEST_CASE("error metrics") {
  scenario::Phantom ph;
  ph.background = 1.0;
  ph.inclusions = {scenario::Inclusion{{0.0, 0.0}, 0.1, 3.0}};
  const std::vector<fem::Point> pos{{0.0, 0.0}, {0.5, 0.0}, {0.0, 0.5}};
  const std::vector<double> truth{3.0, 1.0, 1.0};
  SUBCASE("exact") {
    const auto m = error_metrics(pos, truth, truth, ph);
    CHECK(m.rel_l2 == 0.0);
    CHECK(m.inclusions[0].contrast == 3.0);
    CHECK(m.inclusions[0].true_contrast == 3.0);
    CHECK(m.inclusions[0].distance == 0.0);
  }
  SUBCASE("flat") {
    const auto m = error_metrics(pos, {1.0, 1.0, 1.0}, truth, ph);
    CHECK(m.inclusions[0].contrast == 1.0);
  }
  SUBCASE("hand computed") {
    const auto m = error_metrics(pos, {2.0, 1.5, 0.5}, truth, ph);
    CHECK(std::abs(m.rel_l2 - std::sqrt(1.5 / 11.0)) < 1e-15);
    CHECK(m.background == 1.0);
    CHECK(std::abs(m.background_rms - 0.5) < 1e-15);
    CHECK(m.inclusions[0].peak == 2.0);
    CHECK(m.inclusions[0].contrast == 2.0);
  }
  CHECK_THROWS_AS(error_metrics(pos, {1.0}, truth, ph), std::invalid_argument);
}
