#include <cmath>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "stablelab/billiard.hpp"
#include "stablelab/error.hpp"
#include "stablelab/observables.hpp"

using namespace stablelab;

namespace {

constexpr double kPi = std::numbers::pi;

ObservableSpec single_pole(double x0, double alpha, double c = 1.0) {
  ObservableSpec s;
  s.poles.push_back({x0, 0.0, c});
  s.alpha = alpha;
  return s;
}

}  // namespace

TEST_CASE("interval evaluation") {
  ObservableSpec s = single_pole(0.3, 1.5);
  s.poles.push_back({0.8, 0.0, -2.0});
  s.shift = 0.5;
  const double x = 0.55;
  const double expect = std::pow(0.25, -2.0 / 3.0) - 2.0 * std::pow(0.25, -2.0 / 3.0) + 0.5;
  CHECK(eval(s, x) == doctest::Approx(expect).epsilon(1e-14));
  CHECK(eval(s, 0.3) == std::numeric_limits<double>::infinity());
  CHECK(eval(s, 0.8) == -std::numeric_limits<double>::infinity());
}

TEST_CASE("billiard evaluation and circle distance") {
  ObservableSpec s;
  s.dimension = 2;
  s.alpha = 1.5;
  s.poles.push_back({0.1, 1.0, 1.0});
  const double L = 5.0;
  CHECK(arclength_distance(0.1, 4.9, L) == doctest::Approx(0.2));
  CHECK(arclength_distance(4.9, 0.1, L) == doctest::Approx(0.2));
  CHECK(eval(s, 4.9, 1.3, L) == doctest::Approx(std::pow(0.5, -4.0 / 3.0)).epsilon(1e-13));
  CHECK(std::isinf(eval(s, 0.1, 1.0, L)));
}

TEST_CASE("observable validation") {
  ObservableSpec s = single_pole(0.3, 1.0);
  CHECK_THROWS_AS(s.validate(), InvalidInput);
  s.alpha = 2.0;
  CHECK_THROWS_AS(s.validate(), InvalidInput);
  s.alpha = 0.8;
  CHECK_NOTHROW(s.validate());
  s.dimension = 3;
  CHECK_THROWS_AS(s.validate(), InvalidInput);
  ObservableSpec empty;
  CHECK_THROWS_AS(empty.validate(), InvalidInput);
  CHECK_NOTHROW(empty.validate(true));
  ObservableSpec nan = single_pole(std::nan(""), 1.5);
  CHECK_THROWS_AS(nan.validate(), InvalidInput);
}

TEST_CASE("scaling and centering sequences") {
  CHECK(scaling_bn(1024.0, 1.25) == doctest::Approx(std::pow(1024.0, 0.8)).epsilon(1e-15));
  CHECK(scaling_bn(1.0, 0.5) == 1.0);
  CHECK_THROWS_AS(scaling_bn(0.5, 1.5), InvalidInput);
  CHECK_THROWS_AS(scaling_bn(10.0, 1.0), InvalidInput);
  CHECK(centering_cn(100.0, 0.7, 3.0) == 0.0);
  CHECK(centering_cn(100.0, 1.7, 3.0) == 300.0);
}

TEST_CASE("truncation") {
  const Truncation t = truncate(single_pole(0.5, 1.5), 4.0);
  CHECK(t.raw(0.5 + 0.1) == 0.0);
  CHECK(t.raw(0.5 + 0.13) == doctest::Approx(std::pow(0.13, -2.0 / 3.0)));
  CHECK(t.apply(-4.0) == -4.0);
  CHECK(t.apply(-4.5) == 0.0);
  CHECK_THROWS_AS(truncate(single_pole(0.5, 1.5), 0.0), InvalidInput);
}

TEST_CASE("kernel form and core replacement") {
  ObservableSpec s = single_pole(0.4, 1.5, 2.0);
  s.shift = 1.0;
  const auto k = to_kernel(s);
  REQUIRE(k.poles.size() == 1);
  CHECK(k.poles[0].exponent == doctest::Approx(2.0 / 3.0));
  CHECK(k.shift == 1.0);
  const auto cored = to_kernel(s, 1e-3);
  CHECK(cored.poles[0].core_value == doctest::Approx(std::pow(1e-3, -2.0 / 3.0) / (1.0 - 2.0 / 3.0)));
  CHECK_THROWS_AS(to_kernel(single_pole(0.4, 0.8), 1e-3), InvalidInput);
}

TEST_CASE("cusp integrals with psi = 1") {
  const auto r = cusp_integrals([](double) { return std::pair{1.0, 1.0}; }, 0.0);
  CHECK(r.i == doctest::Approx(kPi / 2).epsilon(1e-10));
  CHECK(r.i_psi == doctest::Approx(kPi / 2).epsilon(1e-10));
  CHECK(r.i_abs == doctest::Approx(kPi / 2).epsilon(1e-10));
  // int_0^pi sin^2 = pi/2.
  const auto q = cusp_integrals([](double) { return std::pair{1.0, -1.0}; }, 2.0);
  CHECK(q.i == doctest::Approx(kPi / 4).epsilon(1e-10));
  CHECK(std::fabs(q.i_psi) < 1e-12);
  CHECK(q.i_abs == doctest::Approx(kPi / 4).epsilon(1e-10));
  CHECK_THROWS_AS(cusp_integrals([](double) { return std::pair{1.0, 1.0}; }, -1.0), InvalidInput);
}

TEST_CASE("Richardson extrapolation") {
  CHECK(richardson_limit([](double h) { return 2.0 + 3.0 * h - h * h; }, 0.5, 4) ==
        doctest::Approx(2.0).epsilon(1e-12));
  CHECK(richardson_limit([](double h) { return std::sin(h) / h; }, 0.5, 6) == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("billiard pole mean against Monte Carlo") {
  const double L = 6.869412654677;
  for (double theta0 : {kPi / 2, 0.3}) {
    const double p = 0.6;
    const double exact = billiard_pole_mean(p, theta0, L);
    Rng rng = make_rng(2, streams::synthetic, 0);
    const int n = 1000000;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
      const double r = L * uniform01(rng);
      const double theta = std::acos(1.0 - 2.0 * uniform01(rng));
      const double v = std::pow(arclength_distance(r, 1.0, L) + std::fabs(theta - theta0), -p);
      sum += v;
      sq += v * v;
    }
    const double mean = sum / n, se = std::sqrt((sq / n - mean * mean) / n);
    CHECK(std::fabs(exact - mean) < 4.0 * se);
  }
  ObservableSpec s;
  s.dimension = 2;
  s.alpha = 1.5;
  s.shift = 0.25;
  s.poles.push_back({1.0, 1.2, 2.0});
  CHECK(billiard_mean(s, L) == doctest::Approx(0.25 + 2.0 * billiard_pole_mean(4.0 / 3.0, 1.2, L)).epsilon(1e-14));
  s.alpha = 0.9;
  CHECK(billiard_mean(s, L) == std::numeric_limits<double>::infinity());
  CHECK_THROWS_AS(billiard_pole_mean(1.0, 1.0, L), InvalidInput);
}

TEST_CASE("Birkhoff mean estimation") {
  const LsvMap m(0.6);
  MeanOptions o;
  o.total_steps = 200000;
  o.chunks = 8;
  ObservableSpec constant;
  constant.shift = 2.5;
  const MeanEstimate c = estimate_mean(m, constant, o);
  CHECK(c.mean == doctest::Approx(2.5).epsilon(1e-12));
  CHECK(c.std_error < 1e-10);
  o.chunks = 1;
  CHECK_THROWS_AS(estimate_mean(m, constant, o), InvalidInput);
}

TEST_CASE("balance function changes sign") {
  const LsvMap m(0.6);
  MeanOptions o;
  o.total_steps = 2000000;
  o.chunks = 16;
  const MeanEstimate lo = balance_function(m, 1.5, 0.05, o);
  const MeanEstimate hi = balance_function(m, 1.5, 0.95, o);
  CHECK(lo.mean > 3.0 * lo.std_error);
  CHECK(hi.mean < -3.0 * hi.std_error);
  CHECK_THROWS_AS(balance_function(m, 0.8, 0.5, o), InvalidInput);
  BalanceOptions b;
  b.mean = o;
  CHECK_THROWS_AS(find_balanced_x0(m, 1.5, 0.6, 0.5, b), InvalidInput);
}
