#include <cmath>
#include <numbers>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "stablelab/billiard.hpp"
#include "stablelab/error.hpp"
#include "stablelab/harness/diagnostics.hpp"

using namespace stablelab;

namespace {

constexpr double kPi = std::numbers::pi;

double norm(Vec2 v) { return std::hypot(v.x, v.y); }

/// Boundary polyline; for a dispersing table it lies on the scatterer side
/// of the true boundary, so a legal free flight never crosses it.
std::vector<Vec2> boundary_polyline(const BilliardTable& t, int n) {
  std::vector<Vec2> pts(n);
  for (int i = 0; i < n; ++i) pts[i] = t.position(t.total_length() * i / n);
  return pts;
}

bool chords_cross(Vec2 p, Vec2 q, Vec2 a, Vec2 b) {
  const double d1 = cross(q - p, a - p), d2 = cross(q - p, b - p);
  const double d3 = cross(b - a, p - a), d4 = cross(b - a, q - a);
  const double tol = 1e-12;
  return ((d1 > tol && d2 < -tol) || (d1 < -tol && d2 > tol)) &&
         ((d3 > tol && d4 < -tol) || (d3 < -tol && d4 > tol));
}

CollisionState random_state(const BilliardTable& t, Rng& rng) { return sinetheta_sample(t, rng); }

}  // namespace

TEST_CASE("gamma_max is exact") {
  const auto t = BilliardTable::machta3();
  CHECK(t.gamma_max() == 2.0 / 3.0);
  CHECK(t.beta_max() == 3.0);
  CHECK(t.j_max().size() == 3);
  CHECK(BilliardTable::machta3(4.0).gamma_max() == 0.75);
  CHECK_THROWS_AS(BilliardTable::machta3(2.0), InvalidInput);
  CHECK(t.total_length() == doctest::Approx(6.869412654677).epsilon(1e-10));
}

TEST_CASE("cusp_profile") {
  const CuspSpec c{3.0, 1.0, 2.0, 0.25};
  const auto [up, lo] = cusp_profile(c, 0.2);
  CHECK(up == doctest::Approx(0.008 / 3.0).epsilon(1e-14));
  CHECK(lo == doctest::Approx(-0.016 / 3.0).epsilon(1e-14));
  CHECK(cusp_profile(c, 0.0).first == 0.0);
  CHECK_THROWS_AS(cusp_profile(c, 0.3), InvalidInput);
}

TEST_CASE("circle fixture: chords of a disk") {
  const double radius = 2.0;
  const auto t = BilliardTable::circle_fixture(radius);
  const double L = t.total_length();
  CHECK(L == doctest::Approx(2.0 * kPi * radius));
  for (double th : {0.1, 0.7, kPi / 2, 2.5}) {
    const CollisionState s{1.0, th};
    const CollisionState n = collide(t, s);
    CHECK(n.theta == doctest::Approx(th).epsilon(1e-12));
    const double chord = norm(t.position(n.r) - t.position(s.r));
    CHECK(chord == doctest::Approx(2.0 * radius * std::sin(th)).epsilon(1e-10));
    double dr = std::fmod(n.r - s.r + 2.0 * L, L);
    dr = std::min(dr, L - dr);
    CHECK(dr == doctest::Approx(std::min(2.0 * radius * th, L - 2.0 * radius * th)).epsilon(1e-10));
  }
}

TEST_CASE("collisions: unit speed, reversibility and first intersection") {
  const auto t = BilliardTable::machta3();
  const auto poly = boundary_polyline(t, 20000);
  Rng rng = make_rng(3, streams::billiard, 0);
  int checked = 0;
  for (int i = 0; i < 300; ++i) {
    const CollisionState s = random_state(t, rng);
    CollisionState n;
    try {
      n = collide(t, s);
    } catch (const OrbitAborted&) {
      continue;
    }
    ++checked;
    CHECK(std::fabs(norm(velocity(t, s)) - 1.0) < 1e-12);
    CHECK(n.theta > 0.0);
    CHECK(n.theta < kPi);
    const Vec2 p = t.position(s.r), q = t.position(n.r), v = velocity(t, s);
    CHECK(std::fabs(cross(q - p, v)) < 1e-9);
    CHECK(dot(q - p, v) > 0.0);
    bool crossed = false;
    for (std::size_t k = 0; k < poly.size() && !crossed; ++k)
      crossed = chords_cross(p, q, poly[k], poly[(k + 1) % poly.size()]);
    CHECK_FALSE(crossed);
    const CollisionState back = flip(collide(t, flip(n)));
    CHECK(phase_distance(back, s, t.total_length()) < 1e-9);
  }
  CHECK(checked > 250);
}

TEST_CASE("sinetheta_sample has the invariant marginals") {
  const auto t = BilliardTable::machta3();
  Rng rng = make_rng(4, streams::billiard, 0);
  const int n = 200000, bins = 50;
  std::vector<double> hist(bins, 0.0);
  double mean_cos = 0.0, below = 0.0;
  for (int i = 0; i < n; ++i) {
    const CollisionState s = sinetheta_sample(t, rng);
    CHECK(s.r >= 0.0);
    CHECK(s.r < t.total_length());
    mean_cos += std::cos(s.theta);
    below += s.theta <= kPi / 2 ? 1.0 : 0.0;
    hist[std::min(bins - 1, static_cast<int>((1.0 - std::cos(s.theta)) / 2.0 * bins))] += 1.0;
  }
  CHECK(std::fabs(mean_cos / n) < 0.01);
  CHECK(below / n == doctest::Approx(0.5).epsilon(0.01));
  double chi2 = 0.0;
  for (double h : hist) chi2 += (h - n / bins) * (h - n / bins) / (n / bins);
  CHECK(chi2 < 80.0);  // chi-square 49 dof, 0.999 quantile is about 85
}

TEST_CASE("geometry check on the built-in table") {
  const auto t = BilliardTable::machta3();
  const auto g = harness::billiard_geometry_check(t, 40000, 5, 1);
  CHECK(g.gamma_max_exact);
  CHECK(g.max_speed_error < 1e-12);
  CHECK(g.max_reversal_error < 1e-8);
  CHECK(g.chi2 < g.chi2_critical);
  CHECK(g.passed());
}

TEST_CASE("table files round-trip") {
  const TableSpec spec = BilliardTable::machta3_spec(3.5, 1.0, 0.25);
  std::stringstream ss;
  write_table(ss, spec);
  const TableSpec back = parse_table(ss);
  REQUIRE(back.cusps.size() == spec.cusps.size());
  REQUIRE(back.arcs.size() == spec.arcs.size());
  const auto a = BilliardTable::build(spec), b = BilliardTable::build(back);
  CHECK(b.total_length() == doctest::Approx(a.total_length()).epsilon(1e-12));
  CHECK(b.gamma_max() == a.gamma_max());
  std::istringstream builtin("builtin = machta3\n");
  CHECK(parse_table(builtin).cusps.size() == 3);
  std::istringstream bad("wobble = 3\n");
  CHECK_THROWS_AS(parse_table(bad), InvalidInput);
  CHECK(load_table("machta3").total_length() == doctest::Approx(a.total_length()).epsilon(0.2));
}

TEST_CASE("phase metric") {
  const double L = 6.0;
  const CollisionState a{0.5, 1.0}, b{5.5, 1.5}, c{3.0, 0.2};
  CHECK(phase_distance(a, b, L) == doctest::Approx(1.5));
  CHECK(phase_distance(a, b, L) == phase_distance(b, a, L));
  CHECK(phase_distance(a, a, L) == 0.0);
  CHECK(phase_distance(a, c, L) <= phase_distance(a, b, L) + phase_distance(b, c, L) + 1e-15);
}

TEST_CASE("inducing set and induced map") {
  const auto t = BilliardTable::machta3();
  Rng rng = make_rng(6, streams::billiard, 0);
  for (int k0 : {1, 5, 20}) {
    for (int i = 0; i < 200; ++i) {
      const CollisionState s = sinetheta_sample(t, rng);
      try {
        CHECK(in_inducing_set(t, s, k0) == (cusp_run_length(t, s, k0) < k0));
      } catch (const OrbitAborted&) {
      }
    }
  }
  SUBCASE("deep in a cusp, heading further in, is outside M") {
    const CuspGeometry& c = t.cusps()[0];
    const double x = 0.02;
    const double r = t.r_of(0, x);
    CollisionState s{r, 0.0};
    s = t.locate(s);
    CHECK(t.cusp_of(s) == 0);
    // Nearly tangent to the cap, pointing toward the tip.
    const double to_tip = (t.frame(s).tangent.x * -c.axis.x + t.frame(s).tangent.y * -c.axis.y) > 0 ? 0.05 : kPi - 0.05;
    s.theta = to_tip;
    CHECK_FALSE(in_inducing_set(t, s, 5));
  }
  SUBCASE("induced_step agrees with the raw collision loop and InducedOrbit") {
    const int k0 = 10;
    int compared = 0;
    for (int i = 0; i < 100 && compared < 40; ++i) {
      const CollisionState s = sinetheta_sample(t, rng);
      try {
        if (!in_inducing_set(t, s, k0)) continue;
        const InducedStep a = induced_step(t, s, k0);
        CollisionState x = s;
        std::uint64_t n = 0;
        do {
          x = collide(t, x);
          ++n;
        } while (!in_inducing_set(t, x, k0));
        CHECK(a.time == n);
        CHECK(phase_distance(a.state, x, t.total_length()) < 1e-12);
        InducedOrbit orbit(t, s, k0);
        std::uint64_t visits = 0;
        const InducedStep b = orbit.next([&](const CollisionState&) { ++visits; });
        CHECK(b.time == a.time);
        CHECK(visits == a.time);
        CHECK(phase_distance(b.state, a.state, t.total_length()) < 1e-12);
        ++compared;
      } catch (const OrbitAborted&) {
      }
    }
    CHECK(compared >= 20);
  }
}

TEST_CASE("grazing incidence aborts the orbit") {
  const auto t = BilliardTable::machta3();
  CollisionState s{1.0, 1e-9};
  bool aborted = false;
  try {
    collide(t, s);
  } catch (const OrbitAborted& e) {
    aborted = e.reason() == OrbitAborted::Reason::grazing;
  }
  CHECK(aborted);
}
