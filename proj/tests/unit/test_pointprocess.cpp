#include <cmath>
#include <vector>

#include "doctest.h"
#include "stablelab/error.hpp"
#include "stablelab/pointprocess.hpp"
#include "stablelab/rng.hpp"
#include "stablelab/stats.hpp"

using namespace stablelab;

namespace {

std::vector<double> pareto(std::size_t n, double alpha, std::uint64_t seed, std::uint64_t index = 0) {
  Rng rng = make_rng(seed, streams::synthetic, index);
  std::vector<double> v(n);
  for (double& x : v) x = std::pow(uniform_open01(rng), -1.0 / alpha);
  return v;
}

/// AR(1) sequence x_{i+1} = rho x_i + e_i with standard normal noise.
std::vector<double> ar1(std::size_t n, double rho, std::uint64_t seed) {
  Rng rng = make_rng(seed, streams::synthetic, 0);
  std::normal_distribution<double> d;
  std::vector<double> v(n);
  double x = 0.0;
  for (double& y : v) {
    x = rho * x + d(rng);
    y = x;
  }
  return v;
}

}  // namespace

TEST_CASE("exceedance process on a hand-made sequence") {
  const std::vector<double> v{0.1, 5.0, 2.5, 0.0, 10.0};
  const MarkedPoints p = exceedance_process(v, 10.0, 0.25);
  REQUIRE(p.points.size() == 3);
  CHECK(p.points[0].time == doctest::Approx(0.4));
  CHECK(p.points[0].mark == 0.5);
  CHECK(p.points[1].mark == 0.25);  // equality counts
  CHECK(p.points[2].time == 1.0);
  CHECK(p.n == 5);
  CHECK_THROWS_AS(exceedance_process(v, 0.0), InvalidInput);
}

TEST_CASE("iid Pareto exceedances: unit mean at level one, power-law intensity") {
  const double alpha = 1.5;
  const std::size_t n = 4096, reps = 400;
  const double bn = std::pow(static_cast<double>(n), 1.0 / alpha);
  const std::vector<double> marks{1.0, 2.0, 4.0, 8.0};
  std::vector<double> mean(marks.size(), 0.0), counts;
  for (std::size_t r = 0; r < reps; ++r) {
    const auto p = exceedance_process(pareto(n, alpha, 3, r), bn, 1.0);
    counts.push_back(static_cast<double>(p.points.size()));
    for (std::size_t k = 0; k < marks.size(); ++k)
      for (const auto& q : p.points) mean[k] += q.mark > marks[k] ? 1.0 / reps : 0.0;
  }
  CHECK(mean[0] == doctest::Approx(1.0).epsilon(0.15));
  std::vector<double> lx, ly;
  for (std::size_t k = 0; k < marks.size(); ++k) {
    lx.push_back(std::log(marks[k]));
    ly.push_back(std::log(mean[k]));
  }
  CHECK(ols(lx, ly).slope == doctest::Approx(-alpha).epsilon(0.15 / alpha));
  const Dispersion d = poisson_dispersion(counts, 1);
  CHECK(d.contains_one());
}

TEST_CASE("Poisson dispersion") {
  Rng rng = make_rng(5, streams::synthetic, 0);
  std::poisson_distribution<int> pois(3.0);
  std::vector<double> p(1000), over(1000);
  for (double& x : p) x = pois(rng);
  for (double& x : over) x = 3.0 * pois(rng);
  const Dispersion a = poisson_dispersion(p, 2);
  CHECK(a.ratio == doctest::Approx(1.0).epsilon(0.15));
  CHECK(a.ci_low < a.ratio);
  CHECK(a.ratio < a.ci_high);
  CHECK(a.contains_one());
  CHECK_FALSE(poisson_dispersion(over, 2).contains_one());
  CHECK_THROWS_AS(poisson_dispersion(std::vector<double>(100, 1.0), 1), InvalidInput);
  CHECK_THROWS_AS(poisson_dispersion(std::vector<double>(300, 0.0), 1), InvalidInput);
}

TEST_CASE("LagAccumulator matches direct sums across chunk boundaries") {
  const auto v = ar1(10007, 0.5, 7);
  for (std::size_t chunk : {1u, 3u, 64u, 10007u}) {
    LagAccumulator acc(9);
    for (std::size_t i = 0; i < v.size(); i += chunk)
      acc.push(std::span<const double>(v.data() + i, std::min(chunk, v.size() - i)));
    CHECK(acc.count() == v.size());
    const auto sums = acc.lagged_sums();
    for (std::size_t j = 1; j <= 9; ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i + j < v.size(); ++i) s += v[i] * v[i + j];
      CHECK(sums[j - 1] == doctest::Approx(s).epsilon(1e-10));
    }
    CHECK(acc.head(4) == doctest::Approx(v[0] + v[1] + v[2] + v[3]));
    const std::size_t e = v.size();
    CHECK(acc.tail(2) == doctest::Approx(v[e - 1] + v[e - 2]));
  }
  CHECK_THROWS_AS(LagAccumulator(0), InvalidInput);
}

TEST_CASE("pooled autocovariances of AR(1)") {
  const double rho = 0.6;
  std::vector<LagAccumulator> parts;
  for (std::uint64_t s = 0; s < 4; ++s) {
    const auto v = ar1(200000, rho, 20 + s);
    LagAccumulator acc(3);
    acc.push(v);
    parts.push_back(acc);
  }
  const auto c = pooled_autocovariances(parts);
  const double var = 1.0 / (1.0 - rho * rho);
  CHECK(c[0] == doctest::Approx(var).epsilon(0.03));
  CHECK(c[1] == doctest::Approx(rho * var).epsilon(0.05));
  CHECK(c[3] == doctest::Approx(rho * rho * rho * var).epsilon(0.1));
}

TEST_CASE("small values functional") {
  const double alpha = 1.5, n = 65536;
  SUBCASE("iid data reads near zero") {
    const auto v = pareto(1 << 22, alpha, 9);
    for (double eps : {0.1, 0.05}) CHECK(small_values_functional(v, alpha, eps, n).estimate < 1e-2);
  }
  SUBCASE("correlated data reads positive and shrinks with eps") {
    auto v = ar1(1 << 20, 0.8, 10);
    SmallValuesOptions o;
    o.k = 2.0;
    o.b_n = 20.0;
    const auto big = small_values_functional(v, alpha, 0.5, n, o);
    const auto small = small_values_functional(v, alpha, 0.05, n, o);
    CHECK(big.estimate > 0.0);
    CHECK(big.lags == static_cast<std::size_t>(std::floor(2.0 * std::log(n))));
    CHECK(small.estimate < big.estimate);
  }
  SUBCASE("infinite eps disables the truncation") {
    const auto v = ar1(100000, 0.3, 11);
    SmallValuesOptions o;
    o.k = 1.0;
    const auto a = small_values_functional(v, alpha, std::numeric_limits<double>::infinity(), n, o);
    const auto b = small_values_functional(v, alpha, 1e300, n, o);
    CHECK(a.estimate == b.estimate);
    CHECK(std::isinf(a.truncation));
  }
  const auto shortv = pareto(10, alpha, 1);
  CHECK_THROWS_AS(small_values_functional(shortv, alpha, 0.1, n), InvalidInput);
  CHECK_THROWS_AS(small_values_functional(shortv, 0.8, 0.1, n), InvalidInput);
  CHECK(lag_horizon(0.5, 1000.0, 2.0) == 13);
  CHECK(lag_horizon(0.5, 1000.0) == static_cast<std::size_t>(std::floor(8.0 / std::log(2.0) * std::log(1000.0))));
}

TEST_CASE("max-sum diagnostic") {
  CHECK(max_sum_diagnostic(std::vector<double>{}, 1.5, 0.1, 0.0) == 0.0);
  const std::vector<double> v{1.0, -3.0, 1.0, 1.0};
  CHECK(max_sum_diagnostic(v, 1.0, 0.0, 0.0) == doctest::Approx(2.0 / 4.0));
  CHECK(max_sum_diagnostic(v, 1.0, 0.0, 1.0) == doctest::Approx(4.0 / 4.0));
  CHECK(max_sum_diagnostic(std::vector<double>(100, 2.0), 1.5, 0.3, 2.0) == 0.0);
  const auto p = pareto(4096, 1.5, 12);
  CHECK(max_sum_diagnostic(p, 1.5, 0.2, 3.0) < max_sum_diagnostic(p, 1.5, 0.1, 3.0));
  CHECK_THROWS_AS(max_sum_diagnostic(p, 1.5, -0.1, 0.0), InvalidInput);
}
