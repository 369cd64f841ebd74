#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include <boost/math/quadrature/gauss.hpp>

#include "stablelab/billiard.hpp"
#include "stablelab/error.hpp"

namespace stablelab {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kJunctionTolerance = 1e-9;
constexpr double kTangentTolerance = 1e-7;

double wrap_angle(double a) {
  a = std::fmod(a, kTwoPi);
  return a < 0.0 ? a + kTwoPi : a;
}

Vec2 unit(double angle) { return {std::cos(angle), std::sin(angle)}; }

double norm(Vec2 v) { return std::hypot(v.x, v.y); }

struct CapPoint {
  Vec2 local_point;
  Vec2 local_tangent;  // direction of increasing r
};

CapPoint cap_local(const CuspGeometry& c, bool upper, double x) {
  const double b = c.spec.beta;
  if (upper) {
    const double k = c.spec.c_plus;
    const double slope = k * std::pow(x, b - 1.0);
    const double n = std::hypot(1.0, slope);
    return {{x, k * std::pow(x, b) / b}, {-1.0 / n, -slope / n}};
  }
  const double k = c.spec.c_minus;
  const double slope = k * std::pow(x, b - 1.0);
  const double n = std::hypot(1.0, slope);
  return {{x, -k * std::pow(x, b) / b}, {1.0 / n, -slope / n}};
}

Vec2 to_global(const CuspGeometry& c, Vec2 local) { return local.x * c.axis + local.y * c.normal; }

// Closed boundary as a polyline, used for the self-intersection check.
std::vector<Vec2> sample_boundary(const BilliardTable& t, int per_segment) {
  std::vector<Vec2> pts;
  for (std::size_t i = 0; i < t.segments().size(); ++i) {
    const Segment& seg = t.segments()[i];
    for (int k = 0; k < per_segment; ++k) {
      const double u = static_cast<double>(k) / per_segment;
      CollisionState s;
      s.segment = static_cast<int>(i);
      s.theta = std::numbers::pi / 2;
      if (seg.kind == SegmentKind::lower_cap) {
        // Geometric spacing toward the tip keeps the thin sliver resolved.
        s.param = t.cusps()[seg.cusp].spec.extent * std::pow(u, 3.0);
      } else if (seg.kind == SegmentKind::upper_cap) {
        s.param = t.cusps()[seg.cusp].spec.extent * std::pow(1.0 - u, 3.0);
      } else {
        const double span = wrap_angle(seg.arc.angle_start - seg.arc.angle_end);
        s.param = seg.arc.angle_start - u * span;
      }
      pts.push_back(t.frame(s).point);
    }
  }
  return pts;
}

bool segments_cross(Vec2 a, Vec2 b, Vec2 c, Vec2 d) {
  const double d1 = cross(b - a, c - a);
  const double d2 = cross(b - a, d - a);
  const double d3 = cross(d - c, a - c);
  const double d4 = cross(d - c, b - c);
  return ((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0));
}

}  // namespace

std::pair<double, double> cusp_profile(const CuspSpec& cusp, double x) {
  if (!(x >= 0.0 && x <= cusp.extent)) throw InvalidInput("cusp_profile: x outside [0, extent]");
  const double xb = std::pow(x, cusp.beta) / cusp.beta;
  return {cusp.c_plus * xb, -cusp.c_minus * xb};
}

CollisionState flip(const CollisionState& s) {
  CollisionState out = s;
  out.theta = std::numbers::pi - s.theta;
  return out;
}

double phase_distance(const CollisionState& a, const CollisionState& b, double period) {
  double dr = std::fabs(a.r - b.r);
  if (period > 0.0) {
    dr = std::fmod(dr, period);
    dr = std::min(dr, period - dr);
  }
  return dr + std::fabs(a.theta - b.theta);
}

double BilliardTable::cap_arclength(const CuspGeometry& c, double x, double coefficient) const {
  if (x <= 0.0) return 0.0;
  const double b = c.spec.beta;
  if (coefficient == 0.0) return x;
  auto f = [&](double t) { return std::sqrt(1.0 + coefficient * coefficient * std::pow(t, 2.0 * b - 2.0)); };
  return boost::math::quadrature::gauss<double, 30>::integrate(f, 0.0, x);
}

double BilliardTable::cap_abscissa(const CuspGeometry& c, double s, double coefficient) const {
  if (s <= 0.0) return 0.0;
  const double b = c.spec.beta;
  double x = std::min(s, c.spec.extent);
  for (int it = 0; it < 60; ++it) {
    const double g = cap_arclength(c, x, coefficient) - s;
    const double d = std::sqrt(1.0 + coefficient * coefficient * std::pow(x, 2.0 * b - 2.0));
    const double nx = std::clamp(x - g / d, 0.0, c.spec.extent);
    const double step = std::fabs(nx - x);
    x = nx;
    if (step <= 1e-16 * x) break;
  }
  return x;
}

void BilliardTable::finalize_lengths() {
  double r = 0.0;
  for (Segment& seg : segments_) {
    seg.r_start = r;
    switch (seg.kind) {
      case SegmentKind::lower_cap:
        seg.length = cap_arclength(cusps_[seg.cusp], cusps_[seg.cusp].spec.extent,
                                   cusps_[seg.cusp].spec.c_minus);
        break;
      case SegmentKind::upper_cap:
        seg.length = cap_arclength(cusps_[seg.cusp], cusps_[seg.cusp].spec.extent,
                                   cusps_[seg.cusp].spec.c_plus);
        break;
      case SegmentKind::arc:
        seg.length = seg.arc.radius * wrap_angle(seg.arc.angle_start - seg.arc.angle_end);
        break;
      case SegmentKind::focusing_arc:
        seg.length = seg.arc.radius * (seg.arc.angle_end - seg.arc.angle_start);
        break;
    }
    r += seg.length;
  }
  total_length_ = r;
  for (std::size_t k = 0; k < cusps_.size(); ++k) {
    cusps_[k].r = segments_[3 * k].r_start;
  }
}

BilliardTable BilliardTable::build(const TableSpec& spec) {
  const std::size_t q = spec.cusps.size();
  if (q < 3) throw InvalidInput("billiard table: need at least 3 boundary arcs");
  if (spec.arcs.size() != q) throw InvalidInput("billiard table: need one arc per cusp");
  BilliardTable t;
  t.name_ = spec.name;
  for (const auto& c : spec.cusps) {
    const CuspSpec& cs = c.spec;
    if (!(cs.beta >= 2.0) || !std::isfinite(cs.beta)) throw InvalidInput("billiard table: cusp beta < 2");
    if (!(cs.c_plus >= 0.0) || !(cs.c_minus >= 0.0) || (cs.c_plus == 0.0 && cs.c_minus == 0.0)) {
      throw InvalidInput("billiard table: cusp coefficients must be >= 0 and not both zero");
    }
    if (!(cs.extent > 0.0)) throw InvalidInput("billiard table: cusp extent must be positive");
    CuspGeometry g;
    g.spec = cs;
    g.tip = c.tip;
    g.axis = unit(c.axis_angle);
    g.normal = rot90(g.axis);
    t.cusps_.push_back(g);
    t.beta_max_ = std::max(t.beta_max_, cs.beta);
  }
  if (!(t.beta_max_ > 2.0)) throw InvalidInput("billiard table: beta_max must exceed 2");
  t.gamma_max_ = (t.beta_max_ - 1.0) / t.beta_max_;
  for (const ArcSpec& a : spec.arcs) {
    if (!(a.radius > 0.0) || !std::isfinite(a.radius)) {
      throw InvalidInput("billiard table: non-dispersing arc (radius must be positive)");
    }
  }
  for (std::size_t k = 0; k < q; ++k) {
    Segment lower;
    lower.kind = SegmentKind::lower_cap;
    lower.cusp = static_cast<int>(k);
    Segment arc;
    arc.kind = SegmentKind::arc;
    arc.arc = spec.arcs[k];
    Segment upper;
    upper.kind = SegmentKind::upper_cap;
    upper.cusp = static_cast<int>((k + 1) % q);
    t.segments_.push_back(lower);
    t.segments_.push_back(arc);
    t.segments_.push_back(upper);
  }
  t.finalize_lengths();
  t.validate_geometry();
  return t;
}

void BilliardTable::validate_geometry() const {
  const std::size_t nseg = segments_.size();
  for (std::size_t i = 0; i < nseg; ++i) {
    const std::size_t j = (i + 1) % nseg;
    CollisionState end_i;
    end_i.segment = static_cast<int>(i);
    CollisionState start_j;
    start_j.segment = static_cast<int>(j);
    const Segment& si = segments_[i];
    const Segment& sj = segments_[j];
    if (si.kind == SegmentKind::upper_cap) continue;  // meets the next lower cap at a cusp tip
    end_i.param = si.kind == SegmentKind::lower_cap ? cusps_[si.cusp].spec.extent : si.arc.angle_end;
    start_j.param = sj.kind == SegmentKind::upper_cap ? cusps_[sj.cusp].spec.extent : sj.arc.angle_start;
    const Frame a = frame(end_i);
    const Frame b = frame(start_j);
    const double scale = std::max(1.0, norm(a.point));
    if (norm(a.point - b.point) > kJunctionTolerance * scale) {
      throw InvalidInput("billiard table: boundary pieces meet away from a declared cusp (junction " +
                         std::to_string(i) + ")");
    }
    if (std::fabs(cross(a.tangent, b.tangent)) > kTangentTolerance || dot(a.tangent, b.tangent) <= 0.0) {
      throw InvalidInput("billiard table: tangent mismatch at junction " + std::to_string(i));
    }
  }
  // Orientation: table on the left means positive signed area.
  const std::vector<Vec2> pts = sample_boundary(*this, 256);
  double area = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) area += cross(pts[i], pts[(i + 1) % pts.size()]);
  if (!(area > 0.0)) throw InvalidInput("billiard table: non-dispersing arc (boundary orientation)");
  const std::size_t n = pts.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 2; j < n; ++j) {
      if (i == 0 && j == n - 1) continue;
      if (segments_cross(pts[i], pts[(i + 1) % n], pts[j], pts[(j + 1) % n])) {
        throw InvalidInput("billiard table: boundary arcs intersect away from declared cusps");
      }
    }
  }
}

BilliardTable build_table(const TableSpec& spec) { return BilliardTable::build(spec); }

TableSpec BilliardTable::machta3_spec(double beta, double c, double extent) {
  TableSpec spec;
  spec.name = "machta3";
  const double tip_radius = 1.0 + extent;
  for (int k = 0; k < 3; ++k) {
    const double angle = std::numbers::pi / 2 + k * kTwoPi / 3;
    TableSpec::Cusp cusp;
    cusp.tip = tip_radius * unit(angle);
    cusp.axis_angle = angle + std::numbers::pi;
    cusp.spec = {beta, c, c, extent};
    spec.cusps.push_back(cusp);
  }
  for (int k = 0; k < 3; ++k) {
    const auto& ck = spec.cusps[k];
    const auto& cn = spec.cusps[(k + 1) % 3];
    auto junction = [&](const TableSpec::Cusp& cs, bool upper) {
      const Vec2 a = unit(cs.axis_angle);
      const Vec2 p = rot90(a);
      const double y = std::pow(extent, beta) / beta;
      const double slope = std::pow(extent, beta - 1.0);
      const Vec2 point = cs.tip + extent * a + (upper ? c * y : -c * y) * p;
      Vec2 tangent = upper ? Vec2{-a.x - c * slope * p.x, -a.y - c * slope * p.y}
                           : Vec2{a.x - c * slope * p.x, a.y - c * slope * p.y};
      tangent = (1.0 / norm(tangent)) * tangent;
      return std::pair{point, rot90(tangent)};
    };
    const auto [j0, n0] = junction(ck, false);
    const auto [j1, n1] = junction(cn, true);
    const Vec2 u = unit(std::numbers::pi / 2 + k * kTwoPi / 3 + std::numbers::pi / 3);
    const double rho = cross(j0, u) / cross(n0, u);
    const Vec2 center = j0 - rho * n0;
    ArcSpec arc;
    arc.center = center;
    arc.radius = rho;
    arc.angle_start = std::atan2(j0.y - center.y, j0.x - center.x);
    arc.angle_end = std::atan2(j1.y - center.y, j1.x - center.x);
    spec.arcs.push_back(arc);
  }
  return spec;
}

BilliardTable BilliardTable::machta3(double beta, double c, double extent) {
  return build(machta3_spec(beta, c, extent));
}

BilliardTable BilliardTable::circle_fixture(double radius) {
  if (!(radius > 0.0)) throw InvalidInput("circle_fixture: radius must be positive");
  BilliardTable t;
  t.name_ = "circle";
  Segment seg;
  seg.kind = SegmentKind::focusing_arc;
  seg.arc = {{0.0, 0.0}, radius, 0.0, kTwoPi};
  t.segments_.push_back(seg);
  t.finalize_lengths();
  return t;
}

std::vector<int> BilliardTable::j_max() const {
  std::vector<int> out;
  for (std::size_t i = 0; i < cusps_.size(); ++i) {
    if (cusps_[i].spec.beta == beta_max_) out.push_back(static_cast<int>(i));
  }
  return out;
}

double BilliardTable::r_of(int segment, double param) const {
  const Segment& seg = segments_.at(static_cast<std::size_t>(segment));
  double r = seg.r_start;
  switch (seg.kind) {
    case SegmentKind::lower_cap:
      r += cap_arclength(cusps_[seg.cusp], param, cusps_[seg.cusp].spec.c_minus);
      break;
    case SegmentKind::upper_cap:
      r += seg.length - cap_arclength(cusps_[seg.cusp], param, cusps_[seg.cusp].spec.c_plus);
      break;
    case SegmentKind::arc:
    {
      const double span = seg.length / seg.arc.radius;
      double d = wrap_angle(seg.arc.angle_start - param);
      if (d > span) d = d - span < kTwoPi - d ? span : 0.0;
      r += seg.arc.radius * d;
      break;
    }
    case SegmentKind::focusing_arc:
      r += seg.arc.radius * wrap_angle(param - seg.arc.angle_start);
      break;
  }
  if (r >= total_length_) r -= total_length_;
  return r;
}

CollisionState BilliardTable::locate(CollisionState s) const {
  if (s.segment >= 0 && s.segment < static_cast<int>(segments_.size())) return s;
  if (!std::isfinite(s.r) || !std::isfinite(s.theta)) throw InvalidInput("collision state is not finite");
  double r = std::fmod(s.r, total_length_);
  if (r < 0.0) r += total_length_;
  s.r = r;
  auto it = std::upper_bound(segments_.begin(), segments_.end(), r,
                             [](double v, const Segment& seg) { return v < seg.r_start; });
  const std::size_t idx = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, it - segments_.begin() - 1));
  const Segment& seg = segments_[idx];
  s.segment = static_cast<int>(idx);
  const double u = r - seg.r_start;
  switch (seg.kind) {
    case SegmentKind::lower_cap:
      s.param = cap_abscissa(cusps_[seg.cusp], u, cusps_[seg.cusp].spec.c_minus);
      break;
    case SegmentKind::upper_cap:
      s.param = cap_abscissa(cusps_[seg.cusp], std::max(0.0, seg.length - u), cusps_[seg.cusp].spec.c_plus);
      break;
    case SegmentKind::arc:
      s.param = seg.arc.angle_start - u / seg.arc.radius;
      break;
    case SegmentKind::focusing_arc:
      s.param = seg.arc.angle_start + u / seg.arc.radius;
      break;
  }
  return s;
}

BilliardTable::Frame BilliardTable::frame(const CollisionState& in) const {
  const CollisionState s = locate(in);
  const Segment& seg = segments_[s.segment];
  Frame f;
  switch (seg.kind) {
    case SegmentKind::lower_cap:
    case SegmentKind::upper_cap: {
      const CuspGeometry& c = cusps_[seg.cusp];
      const CapPoint cp = cap_local(c, seg.kind == SegmentKind::upper_cap, s.param);
      f.point = c.tip + to_global(c, cp.local_point);
      f.tangent = to_global(c, cp.local_tangent);
      break;
    }
    case SegmentKind::arc: {
      const Vec2 radial = unit(s.param);
      f.point = seg.arc.center + seg.arc.radius * radial;
      f.tangent = {radial.y, -radial.x};
      break;
    }
    case SegmentKind::focusing_arc: {
      const Vec2 radial = unit(s.param);
      f.point = seg.arc.center + seg.arc.radius * radial;
      f.tangent = {-radial.y, radial.x};
      break;
    }
  }
  f.normal = rot90(f.tangent);
  return f;
}

Vec2 BilliardTable::position(double r) const {
  CollisionState s;
  s.r = r;
  s.theta = std::numbers::pi / 2;
  return frame(s).point;
}

int BilliardTable::cusp_of(const CollisionState& in) const {
  const CollisionState s = locate(in);
  const Segment& seg = segments_[s.segment];
  if (seg.kind == SegmentKind::lower_cap || seg.kind == SegmentKind::upper_cap) return seg.cusp;
  return -1;
}

CollisionState sinetheta_sample(const BilliardTable& table, Rng& rng) {
  CollisionState s;
  s.r = table.total_length() * uniform01(rng);
  if (s.r >= table.total_length()) s.r = 0.0;
  s.theta = std::acos(1.0 - 2.0 * uniform01(rng));
  return s;
}

}  // namespace stablelab
