#include <cmath>
#include <complex>
#include <vector>

#include "doctest.h"
#include "stablelab/error.hpp"
#include "stablelab/stats.hpp"

using namespace stablelab;

namespace {

std::vector<double> pareto(std::size_t n, double alpha, std::uint64_t seed) {
  Rng rng = make_rng(seed, streams::synthetic, 0);
  std::vector<double> v(n);
  for (double& x : v) x = std::pow(uniform_open01(rng), -1.0 / alpha);
  return v;
}

std::vector<double> stable(std::size_t n, double alpha, double skew, std::uint64_t seed) {
  Rng rng = make_rng(seed, streams::synthetic, 1);
  std::vector<double> v(n);
  for (double& x : v) x = sample_stable(alpha, skew, rng);
  return v;
}

std::vector<double> gaussian(std::size_t n, std::uint64_t seed) {
  Rng rng = make_rng(seed, streams::synthetic, 2);
  std::normal_distribution<double> d;
  std::vector<double> v(n);
  for (double& x : v) x = d(rng);
  return v;
}

/// Ensemble of iid sums: S_n for n in grid, built incrementally per replica.
SumEnsemble iid_sums(std::size_t m, const std::vector<std::uint64_t>& grid,
                     const std::function<double(Rng&)>& draw, std::uint64_t seed) {
  SumEnsemble e;
  e.grid = grid;
  e.values.assign(grid.size(), std::vector<double>(m));
  for (std::size_t r = 0; r < m; ++r) {
    Rng rng = make_rng(seed, streams::replica, r);
    double s = 0.0;
    std::size_t k = 0;
    for (std::uint64_t j = 1; k < grid.size(); ++j) {
      s += draw(rng);
      if (j == grid[k]) e.values[k++][r] = s;
    }
  }
  return e;
}

}  // namespace

TEST_CASE("Hill recovers the Pareto index") {
  const auto v = pareto(1000000, 1.5, 1);
  const HillResult h = hill_tail_index(v, 10000);
  CHECK(h.alpha == doctest::Approx(1.5).epsilon(0.05 / 1.5));
  CHECK(h.k == 10000);
  CHECK_FALSE(h.degenerate);
}

TEST_CASE("Hill edge cases") {
  const std::vector<double> flat(1000, 3.0);
  CHECK(hill_tail_index(flat, 100).degenerate);
  const auto v = pareto(10000, 1.2, 2);
  CHECK_THROWS_AS(hill_tail_index(v, 49), InvalidInput);
  CHECK_THROWS_AS(hill_tail_index(v, 10000), InvalidInput);
  std::vector<double> scaled = v;
  for (double& x : scaled) x *= 17.5;
  CHECK(hill_tail_index(scaled, 500).alpha == doctest::Approx(hill_tail_index(v, 500).alpha).epsilon(1e-12));
  CHECK(default_hill_k(1000000) == 3981);
  const std::size_t ks[] = {100, 200, 400};
  const auto st = hill_stability(v, ks);
  REQUIRE(st.size() == 3);
  CHECK(st[1].alpha == doctest::Approx(hill_tail_index(v, 200).alpha).epsilon(1e-12));
}

TEST_CASE("stable sampler: characteristic function and parametrisations") {
  for (double a : {0.6, 1.2, 1.5, 1.8}) {
    const auto v = stable(200000, a, 0.0, 10);
    for (double t : {0.5, 1.0}) {
      double c = 0.0;
      for (double x : v) c += std::cos(t * x);
      c /= static_cast<double>(v.size());
      CHECK(c == doctest::Approx(std::exp(-std::pow(t, a))).epsilon(0.02));
    }
  }
  Rng r0 = make_rng(5, streams::synthetic, 0), r1 = make_rng(5, streams::synthetic, 0);
  const double a = 1.5, b = 0.7;
  for (int i = 0; i < 100; ++i) {
    const double x0 = sample_stable(a, b, r0, StableParam::s0);
    const double x1 = sample_stable(a, b, r1, StableParam::s1);
    CHECK(x0 == doctest::Approx(x1 - b * std::tan(M_PI * a / 2.0)).epsilon(1e-12));
  }
  const auto g = stable(200000, 2.0, 0.0, 11);
  double var = 0.0;
  for (double x : g) var += x * x;
  CHECK(var / g.size() == doctest::Approx(2.0).epsilon(0.02));
  Rng bad = make_rng(1, 1, 1);
  CHECK_THROWS_AS(sample_stable(2.5, 0.0, bad), InvalidInput);
  CHECK_THROWS_AS(sample_stable(1.5, 1.5, bad), InvalidInput);
}

TEST_CASE("Hill on stable samples recovers the index") {
  struct Case {
    double alpha;
    std::size_t k;
  };
  for (Case c : {Case{0.6, 20000}, Case{1.2, 5000}, Case{1.5, 2000}, Case{1.8, 300}}) {
    auto v = stable(2000000, c.alpha, 0.0, 20);
    for (double& x : v) x = std::fabs(x);
    CHECK(hill_tail_index(v, c.k).alpha == doctest::Approx(c.alpha).epsilon(0.1 / c.alpha));
  }
}

TEST_CASE("quantiles, median, ols") {
  const std::vector<double> v{5, 1, 4, 2, 3};
  CHECK(median(v) == 3.0);
  CHECK(quantile(v, 0.25) == 2.0);
  CHECK(quantile(v, 0.1) == doctest::Approx(1.4));
  CHECK_THROWS_AS(quantile(std::vector<double>{}, 0.5), InvalidInput);
  const std::vector<double> x{0, 1, 2, 3}, y{1, 3, 5, 7};
  const LinearFit f = ols(x, y);
  CHECK(f.slope == doctest::Approx(2.0));
  CHECK(f.intercept == doctest::Approx(1.0));
  CHECK(f.r_squared == doctest::Approx(1.0));
}

TEST_CASE("scaling exponent of synthetic ensembles") {
  const std::vector<std::uint64_t> grid{16, 32, 64, 128, 256, 512};
  SUBCASE("stable 1.5") {
    const auto e = iid_sums(2000, grid, [](Rng& r) { return sample_stable(1.5, 0.0, r); }, 1);
    CHECK(scaling_exponent(e).theta_hat == doctest::Approx(1.0 / 1.5).epsilon(0.05 * 1.5));
    CHECK(scaling_exponent_bootstrap_se(e, 3, 100) < 0.05);
  }
  SUBCASE("gaussian") {
    std::normal_distribution<double> d;
    const auto e = iid_sums(2000, grid, [&](Rng& r) { return d(r); }, 2);
    CHECK(scaling_exponent(e).theta_hat == doctest::Approx(0.5).epsilon(0.05 / 0.5));
  }
  SUBCASE("S_n = n z gives exactly 1") {
    SumEnsemble e;
    e.grid = grid;
    const auto z = gaussian(500, 3);
    for (std::uint64_t n : grid) {
      std::vector<double> row;
      for (double v : z) row.push_back(static_cast<double>(n) * v);
      e.values.push_back(row);
    }
    CHECK(scaling_exponent(e).theta_hat == doctest::Approx(1.0).epsilon(1e-12));
    SumEnsemble shifted = e;
    for (std::size_t k = 0; k < grid.size(); ++k)
      for (double& v : shifted.values[k]) v += 1000.0 * static_cast<double>(k) - 77.0;
    CHECK(scaling_exponent(shifted).theta_hat == doctest::Approx(1.0).epsilon(1e-9));
  }
  SUBCASE("degenerate ensembles are rejected") {
    SumEnsemble e;
    e.grid = grid;
    e.values.assign(grid.size(), std::vector<double>(300, 0.0));
    CHECK_THROWS_AS(scaling_exponent(e), InvalidInput);
    e.grid = {1, 2, 3, 4, 5, 6};
    CHECK_THROWS_AS(e.validate(), InvalidInput);
    e.grid = {1, 2, 4};
    e.values.resize(3);
    CHECK_THROWS_AS(e.validate(), InvalidInput);
  }
}

TEST_CASE("two-sample KS") {
  const auto a = stable(10000, 1.5, 0.0, 30);
  CHECK(ks_two_sample(a, a) == 0.0);
  const auto b = stable(10000, 1.5, 0.0, 31);
  CHECK(ks_two_sample(a, b) == ks_two_sample(b, a));
  CHECK(ks_critical_1pct(10000, 10000) == doctest::Approx(1.628 * std::sqrt(2.0 / 10000)).epsilon(1e-3));
  int rejections = 0;
  for (std::uint64_t t = 0; t < 100; ++t) {
    const auto x = stable(10000, 1.5, 0.0, 100 + 2 * t);
    const auto y = stable(10000, 1.5, 0.0, 101 + 2 * t);
    rejections += ks_two_sample(x, y) >= ks_critical_1pct(10000, 10000) ? 1 : 0;
  }
  CHECK(rejections <= 4);
  const auto c = stable(10000, 1.2, 0.0, 32);
  const auto d = stable(10000, 1.8, 0.0, 33);
  CHECK(ks_two_sample(c, d) > ks_critical_1pct(10000, 10000));
  CHECK_THROWS_AS(ks_two_sample(a, std::vector<double>{}), InvalidInput);
}

TEST_CASE("self-similarity check") {
  const std::size_t m = 4000;
  SUBCASE("exact stable input") {
    const auto n1 = stable(m, 1.5, 0.0, 40);
    auto n2 = stable(m, 1.5, 0.0, 41);
    for (double& x : n2) x *= std::pow(2.0, 1.0 / 1.5);
    CHECK(self_similarity_check(n1, n2, 1.5, 1).passed);
  }
  SUBCASE("gaussian with alpha 2 passes, alpha 1.2 fails") {
    const auto n1 = gaussian(m, 42);
    auto n2 = gaussian(m, 43);
    for (double& x : n2) x *= std::sqrt(2.0);
    CHECK(self_similarity_check(n1, n2, 2.0, 1).passed);
    CHECK_FALSE(self_similarity_check(n1, n2, 1.2, 1).passed);
  }
  CHECK_THROWS_AS(self_similarity_check(gaussian(10, 1), gaussian(11, 1), 1.5, 1), InvalidInput);
}

TEST_CASE("Karamata ratios on exact Pareto data") {
  for (double alpha : {0.7, 1.5}) {
    const std::vector<double> eps{0.5, 1.0, 2.0}, ns{1e6};
    const auto rows = karamata_residuals(pareto_stratified(alpha, 2000000, 7), alpha, eps, ns);
    CHECK(rows.size() == 9);
    for (const KaramataRow& r : rows) {
      CAPTURE(r.item);
      CAPTURE(r.eps);
      CHECK_FALSE(r.insufficient);
      CHECK(r.residual < 0.05);
      if (r.item == 'a' && r.eps == 1.0) CHECK(r.residual < 0.02);
      if (r.item == 'e') CHECK(r.rhs == doctest::Approx(std::pow(r.eps, -0.5) * 3.0).epsilon(1e-12));
    }
  }
  CHECK_THROWS_AS(karamata_residuals(pareto_stratified(1.5, 100, 1), 1.0, std::vector<double>{1.0},
                                     std::vector<double>{10.0}),
                  InvalidInput);
}

TEST_CASE("empirical tail stream is equally weighted") {
  const std::vector<double> v{1, 2, 3, 4};
  double w = 0.0, s = 0.0;
  empirical_tail(v)([&](double x, double wt) {
    w += wt;
    s += x * wt;
  });
  CHECK(w == doctest::Approx(1.0));
  CHECK(s == doctest::Approx(2.5));
}
