#include <cmath>
#include <cstring>
#include <string>
#include <vector>

#include "doctest.h"
#include "stablelab/kernels/kernels.hpp"
#include "stablelab/kernels/math.hpp"
#include "stablelab/rng.hpp"

using namespace stablelab;
using namespace stablelab::kernels;

namespace {

bool same_bits(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

std::vector<double> uniform_states(std::size_t n, std::uint64_t seed, double lo, double hi) {
  Rng rng = make_rng(seed, streams::synthetic, 0);
  std::vector<double> v(n);
  for (double& x : v) x = lo + (hi - lo) * uniform01(rng);
  return v;
}

IntervalObservable two_poles() {
  IntervalObservable o;
  o.poles.push_back({0.3, 1.0, 0.8, -1.0, 0.0});
  o.poles.push_back({0.0, -0.5, 0.8, 1e-6, 5.0});
  o.shift = 0.25;
  return o;
}

}  // namespace

TEST_CASE("reference exp/log/pow track libm") {
  Rng rng = make_rng(1, streams::synthetic, 0);
  double worst = 0.0;
  for (int i = 0; i < 200000; ++i) {
    const double x = -700.0 + 1400.0 * uniform01(rng);
    worst = std::max(worst, std::fabs(ref::exp(x) / std::exp(x) - 1.0));
    const double y = std::exp(-700.0 + 1400.0 * uniform01(rng));
    const double l = std::log(y);
    worst = std::max(worst, std::fabs(ref::log(y) - l) / std::max(1.0, std::fabs(l)));
  }
  CHECK(worst < 1e-14);
  CHECK(ref::pow(0.0, 0.5) == 0.0);
  CHECK(std::isinf(ref::pow(0.0, -0.5)));
  CHECK(ref::pow(2.0, 10.0) == doctest::Approx(1024.0).epsilon(1e-14));
}

TEST_CASE("scalar lsv step matches the map definition") {
  const double g = 0.6, tp = std::pow(2.0, g);
  for (double x : {0.0, 0.1, 0.25, 0.49, 0.5, 0.75, 1.0}) {
    const double expect = x < 0.5 ? (tp * std::pow(x, g) + 1.0) * x : 2.0 * x - 1.0;
    CHECK(scalar::lsv_step(x, g, tp) == doctest::Approx(expect).epsilon(1e-14));
  }
}

TEST_CASE("lagged_dot and sum_log_ratio against direct loops") {
  const auto v = uniform_states(1000 + 7, 3, -1.0, 1.0);
  std::vector<double> out(7, 0.0);
  scalar::lagged_dot(v.data(), 1000, out);
  for (std::size_t j = 1; j <= 7; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < 1000; ++i) s += v[i] * v[i + j];
    CHECK(out[j - 1] == doctest::Approx(s).epsilon(1e-12));
  }
  const auto p = uniform_states(999, 4, 1.0, 5.0);
  double s = 0.0;
  for (double x : p) s += std::log(x / 1.5);
  CHECK(scalar::sum_log_ratio(p, 1.5) == doctest::Approx(s).epsilon(1e-12));
}

TEST_CASE("AVX2 kernels are bit-identical to the scalar reference") {
  if (!avx2::available()) {
    MESSAGE("AVX2 not available on this CPU; equivalence not exercised");
    return;
  }
  const auto obs = two_poles();
  const std::uint64_t cps[] = {1, 7, 64, 1000, 5000};

  SUBCASE("lsv_sums ambient") {
    for (std::size_t lanes : {1u, 3u, 4u, 9u, 16u}) {
      auto s1 = uniform_states(lanes, 10 + lanes, 0.0, 1.0);
      auto s2 = s1;
      LsvSumRequest r;
      r.gamma = 0.6;
      r.two_pow_gamma = std::pow(2.0, 0.6);
      r.observable = &obs;
      r.step_center = 0.125;
      r.checkpoints = cps;
      std::vector<double> a(lanes * 5), b(lanes * 5);
      scalar::lsv_sums(r, s1, a);
      avx2::lsv_sums(r, s2, b);
      CHECK(same_bits(a, b));
      CHECK(same_bits(s1, s2));
    }
  }
  SUBCASE("lsv_sums induced") {
    auto s1 = uniform_states(8, 20, 0.5, 1.0);
    auto s2 = s1;
    LsvSumRequest r;
    r.gamma = 0.75;
    r.two_pow_gamma = std::pow(2.0, 0.75);
    r.observable = &obs;
    r.mode = SumMode::induced;
    r.step_center = 0.5;
    r.return_center = 0.1;
    r.burn_in = 3;
    r.checkpoints = cps;
    std::vector<double> a(8 * 5), b(8 * 5);
    scalar::lsv_sums(r, s1, a);
    avx2::lsv_sums(r, s2, b);
    CHECK(same_bits(a, b));
    CHECK(same_bits(s1, s2));
  }
  SUBCASE("lsv_returns and lsv_iterate") {
    auto s1 = uniform_states(6, 30, 0.5, 1.0);
    auto s2 = s1;
    std::vector<std::uint64_t> t1(6 * 500), t2(6 * 500);
    std::vector<double> p1(6 * 500), p2(6 * 500);
    scalar::lsv_returns(0.6, std::pow(2.0, 0.6), s1, 500, 0, t1, p1);
    avx2::lsv_returns(0.6, std::pow(2.0, 0.6), s2, 500, 0, t2, p2);
    CHECK(t1 == t2);
    CHECK(same_bits(p1, p2));
    scalar::lsv_iterate(0.3, std::pow(2.0, 0.3), s1, 1000);
    avx2::lsv_iterate(0.3, std::pow(2.0, 0.3), s2, 1000);
    CHECK(same_bits(s1, s2));
  }
  SUBCASE("eval, pow, lagged dot, log ratio") {
    const auto xs = uniform_states(1003, 40, 0.0, 1.0);
    std::vector<double> a(xs.size()), b(xs.size());
    scalar::eval_interval(obs, xs, a);
    avx2::eval_interval(obs, xs, b);
    CHECK(same_bits(a, b));
    scalar::pow_batch(xs, -0.6667, a);
    avx2::pow_batch(xs, -0.6667, b);
    CHECK(same_bits(a, b));
    std::vector<double> d1(13, 0.0), d2(13, 0.0);
    scalar::lagged_dot(xs.data(), 990, d1);
    avx2::lagged_dot(xs.data(), 990, d2);
    CHECK(same_bits(d1, d2));
    CHECK(scalar::sum_log_ratio(xs, 1e-3) == avx2::sum_log_ratio(xs, 1e-3));
  }
}

TEST_CASE("dispatch honours the forced instruction set") {
  const Isa before = active_isa();
  force_isa(Isa::scalar);
  CHECK(active_isa() == Isa::scalar);
  CHECK(std::string(isa_name(Isa::scalar)) == "scalar");
  force_isa(before);
}
