#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "stablelab/billiard.hpp"
#include "stablelab/error.hpp"

namespace stablelab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kEndSlack = 1e-12;
constexpr double kMaxFlight = 1e6;

double wrap_angle(double a) {
  a = std::fmod(a, kTwoPi);
  return a < 0.0 ? a + kTwoPi : a;
}

struct LocalCap {
  Vec2 point;
  Vec2 tangent;
};

LocalCap cap_local(const CuspSpec& c, bool upper, double x) {
  const double coef = upper ? c.c_plus : c.c_minus;
  const double slope = coef * std::pow(x, c.beta - 1.0);
  const double n = std::hypot(1.0, slope);
  const double y = coef * std::pow(x, c.beta) / c.beta;
  if (upper) return {{x, y}, {-1.0 / n, -slope / n}};
  return {{x, -y}, {1.0 / n, -slope / n}};
}

// Distance along the ray (x0,y0) + s (va,vp), in a cusp frame, to the cap
// sigma*y = coef x^beta / beta with 0 <= x <= extent, entering from the table
// side. f(s) = sigma*y(s) - coef x(s)^beta / beta is concave in s, so the first
// crossing lies left of its maximum and Newton from the left is monotone.
double cap_hit(double x0, double y0, double va, double vp, double sigma, double coef, double beta,
               double extent) {
  const double e = extent * (1.0 + kEndSlack);
  double lo = 0.0;
  double hi = kMaxFlight;
  if (va > 0.0) {
    lo = std::max(0.0, -x0 / va);
    hi = (e - x0) / va;
  } else if (va < 0.0) {
    lo = std::max(0.0, (e - x0) / va);
    hi = -x0 / va;
  } else if (x0 < 0.0 || x0 > e) {
    return kInf;
  }
  if (!(hi > lo)) return kInf;
  const double svp = sigma * vp;
  auto f = [&](double s) {
    const double x = std::max(0.0, x0 + s * va);
    return sigma * y0 + s * svp - coef * std::pow(x, beta) / beta;
  };
  auto fprime = [&](double s) {
    const double x = std::max(0.0, x0 + s * va);
    return svp - coef * std::pow(x, beta - 1.0) * va;
  };
  const double flo = f(lo);
  if (!(flo < 0.0)) return kInf;
  double smax;
  if (va == 0.0 || coef == 0.0) {
    smax = svp > 0.0 ? hi : lo;
  } else {
    const double ratio = svp / (coef * va);
    if (ratio > 0.0) {
      const double xs = std::pow(ratio, 1.0 / (beta - 1.0));
      smax = std::clamp((xs - x0) / va, lo, hi);
    } else {
      smax = va > 0.0 ? lo : hi;
    }
  }
  if (smax <= lo || !(f(smax) >= 0.0)) return kInf;
  double a = lo;
  double fa = flo;
  double b = smax;
  for (int it = 0; it < 300; ++it) {
    const double d = fprime(a);
    double ns = d > 0.0 ? a - fa / d : 0.5 * (a + b);
    if (!(ns > a && ns < b)) ns = 0.5 * (a + b);
    const double fn = f(ns);
    if (fn < 0.0) {
      const double moved = ns - a;
      a = ns;
      fa = fn;
      if (moved <= 2e-16 * a) break;
    } else {
      b = ns;
      if (fn == 0.0) {
        a = b;
        break;
      }
    }
    if (b - a <= 2e-16 * b) break;
  }
  return a;
}

struct Candidate {
  double s = kInf;
  int segment = -1;
  double param = 0.0;
};

}  // namespace

Vec2 velocity(const BilliardTable& table, const CollisionState& s) {
  const auto f = table.frame(s);
  return std::cos(s.theta) * f.tangent + std::sin(s.theta) * f.normal;
}

CollisionState collide(const BilliardTable& table, const CollisionState& in) {
  const CollisionState s = table.locate(in);
  if (!(s.theta >= kGrazingTolerance && s.theta <= std::numbers::pi - kGrazingTolerance)) {
    throw OrbitAborted(OrbitAborted::Reason::grazing, "grazing collision");
  }
  const auto& segments = table.segments();
  const auto& cusps = table.cusps();
  const Segment& src = segments[s.segment];
  const double ct = std::cos(s.theta);
  const double st = std::sin(s.theta);

  int src_cusp = -1;
  Vec2 lp, lv, gp, gv;
  if (src.kind == SegmentKind::lower_cap || src.kind == SegmentKind::upper_cap) {
    const CuspGeometry& c = cusps[src.cusp];
    const LocalCap cap = cap_local(c.spec, src.kind == SegmentKind::upper_cap, s.param);
    lp = cap.point;
    lv = ct * cap.tangent + st * rot90(cap.tangent);
    gp = c.tip + (lp.x * c.axis + lp.y * c.normal);
    gv = lv.x * c.axis + lv.y * c.normal;
    src_cusp = src.cusp;
  } else {
    const auto f = table.frame(s);
    gp = f.point;
    gv = ct * f.tangent + st * f.normal;
  }

  Candidate best;
  for (std::size_t j = 0; j < segments.size(); ++j) {
    const Segment& seg = segments[j];
    const int jj = static_cast<int>(j);
    if (seg.kind == SegmentKind::lower_cap || seg.kind == SegmentKind::upper_cap) {
      if (jj == s.segment) continue;
      const CuspGeometry& c = cusps[seg.cusp];
      double x0, y0, va, vp;
      if (seg.cusp == src_cusp) {
        x0 = lp.x;
        y0 = lp.y;
        va = lv.x;
        vp = lv.y;
      } else {
        const Vec2 d = gp - c.tip;
        x0 = dot(d, c.axis);
        y0 = dot(d, c.normal);
        va = dot(gv, c.axis);
        vp = dot(gv, c.normal);
      }
      const bool upper = seg.kind == SegmentKind::upper_cap;
      const double dist = cap_hit(x0, y0, va, vp, upper ? 1.0 : -1.0, upper ? c.spec.c_plus : c.spec.c_minus,
                                  c.spec.beta, c.spec.extent);
      if (dist < best.s) {
        best.s = dist;
        best.segment = jj;
        best.param = std::clamp(x0 + dist * va, 0.0, c.spec.extent);
      }
      continue;
    }
    const bool focusing = seg.kind == SegmentKind::focusing_arc;
    if (!focusing && jj == s.segment) continue;
    const Vec2 rel = gp - seg.arc.center;
    const double b = dot(gv, rel);
    const double c0 = dot(rel, rel) - seg.arc.radius * seg.arc.radius;
    const double disc = b * b - c0;
    if (disc < 0.0) continue;
    const double sq = std::sqrt(disc);
    double dist;
    if (focusing) {
      dist = b < 0.0 ? -b + sq : c0 / (-b - sq);
    } else {
      if (!(b < 0.0) || !(c0 > 0.0)) continue;
      dist = c0 / (-b + sq);
    }
    if (!(dist > 0.0) || !(dist < best.s)) continue;
    const Vec2 h = gp + dist * gv;
    const double phi = std::atan2(h.y - seg.arc.center.y, h.x - seg.arc.center.x);
    if (!focusing) {
      const double span = wrap_angle(seg.arc.angle_start - seg.arc.angle_end);
      const double delta = wrap_angle(seg.arc.angle_start - phi);
      if (delta > span + kEndSlack && delta < kTwoPi - kEndSlack) continue;
    }
    best.s = dist;
    best.segment = jj;
    best.param = phi;
  }
  if (best.segment < 0) throw OrbitAborted(OrbitAborted::Reason::no_intersection, "ray left the table");

  const Segment& hit = segments[best.segment];
  CollisionState out;
  out.segment = best.segment;
  out.param = best.param;
  Vec2 v, t;
  if (hit.kind == SegmentKind::lower_cap || hit.kind == SegmentKind::upper_cap) {
    if (best.param < kCuspDepthCutoff) {
      throw OrbitAborted(OrbitAborted::Reason::precision_exhausted, "cusp depth below representable precision");
    }
    const CuspGeometry& c = cusps[hit.cusp];
    t = cap_local(c.spec, hit.kind == SegmentKind::upper_cap, best.param).tangent;
    v = hit.cusp == src_cusp ? lv : Vec2{dot(gv, c.axis), dot(gv, c.normal)};
  } else {
    t = table.frame(out).tangent;
    v = gv;
  }
  const Vec2 n = rot90(t);
  const double vn = dot(v, n);
  const Vec2 w = v - (2.0 * vn) * n;
  out.theta = std::clamp(std::atan2(dot(w, n), dot(w, t)), 0.0, std::numbers::pi);
  out.r = table.r_of(out.segment, out.param);
  return out;
}

int cusp_run_length(const BilliardTable& table, const CollisionState& s, int limit) {
  int count = 0;
  int cusp = -1;
  CollisionState cur = s;
  while (count < limit) {
    const CollisionState next = collide(table, cur);
    const int c = table.cusp_of(next);
    if (c < 0 || (cusp >= 0 && c != cusp)) break;
    cusp = c;
    ++count;
    cur = next;
  }
  return count;
}

bool in_inducing_set(const BilliardTable& table, const CollisionState& s, int k0) {
  if (k0 < 1) throw InvalidInput("in_inducing_set: K0 must be >= 1");
  return cusp_run_length(table, s, k0) < k0;
}

InducedOrbit::InducedOrbit(const BilliardTable& table, const CollisionState& start, int k0, std::uint64_t cap)
    : table_(&table), k0_(k0), cap_(cap), current_(table.locate(start)) {
  if (k0 < 1) throw InvalidInput("induced orbit: K0 must be >= 1");
}

const CollisionState& InducedOrbit::ahead(std::size_t i) {
  while (ahead_.size() < i) {
    const CollisionState& from = ahead_.empty() ? current_ : ahead_.back();
    ahead_.push_back(collide(*table_, from));
  }
  return ahead_[i - 1];
}

bool InducedOrbit::in_m_at(std::size_t i) {
  int cusp = -1;
  for (int k = 1; k <= k0_; ++k) {
    const int c = table_->cusp_of(ahead(i + static_cast<std::size_t>(k)));
    if (c < 0 || (cusp >= 0 && c != cusp)) return true;
    cusp = c;
  }
  return false;
}

InducedStep InducedOrbit::next(const std::function<void(const CollisionState&)>& visit) {
  for (std::size_t i = 1;; ++i) {
    if (i > cap_) throw OrbitAborted(OrbitAborted::Reason::iteration_cap, "induced step exceeded cap");
    if (in_m_at(i)) {
      InducedStep step{i, ahead(i)};
      if (visit) {
        visit(current_);
        for (std::size_t j = 1; j < i; ++j) visit(ahead_[j - 1]);
      }
      current_ = step.state;
      ahead_.erase(ahead_.begin(), ahead_.begin() + static_cast<std::ptrdiff_t>(i));
      return step;
    }
  }
}

InducedStep induced_step(const BilliardTable& table, const CollisionState& s, int k0, std::uint64_t cap) {
  if (!in_inducing_set(table, s, k0)) throw InvalidInput("induced_step: start state is not in the inducing set");
  InducedOrbit orbit(table, s, k0, cap);
  return orbit.next();
}

}  // namespace stablelab
