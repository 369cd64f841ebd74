#pragma once

// Dispersing billiard tables with flat cusps and their collision map in
// (r, theta) coordinates.
//
// A table with q cusps has 3q boundary segments, traversed with the table on
// the left: for k = 0..q-1 the lower cap of cusp k (tip outward), a
// dispersing circle arc, then the upper cap of cusp k+1 (back to its tip).
// Near cusp k, in the frame (P_k; a_k, p_k) with a_k pointing into the table,
// the caps are y = +c_plus x^beta / beta and y = -c_minus x^beta / beta.

#include <cstdint>
#include <deque>
#include <functional>
#include <istream>
#include <ostream>
#include <optional>
#include <string>
#include <vector>

#include "stablelab/rng.hpp"

namespace stablelab {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline Vec2 rot90(Vec2 a) { return {-a.y, a.x}; }

struct CuspSpec {
  double beta = 3.0;
  double c_plus = 1.0;
  double c_minus = 1.0;
  double extent = 0.25;
};

struct CuspGeometry {
  CuspSpec spec;
  Vec2 tip;
  Vec2 axis;    // a: into the table
  Vec2 normal;  // p = rot90(a)
  double r = 0.0;  // arclength coordinate of the tip
};

/// Leading-order cap heights (y_plus, y_minus) at local abscissa x.
std::pair<double, double> cusp_profile(const CuspSpec& cusp, double x);

struct ArcSpec {
  Vec2 center;
  double radius = 1.0;
  double angle_start = 0.0;  // polar angle about the centre where the arc begins
  double angle_end = 0.0;    // and ends; traversed clockwise (dispersing)
};

enum class SegmentKind { lower_cap, arc, upper_cap, focusing_arc };

struct Segment {
  SegmentKind kind = SegmentKind::arc;
  int cusp = -1;  // caps: owning cusp
  ArcSpec arc;    // arcs
  double r_start = 0.0;
  double length = 0.0;
};

struct CollisionState {
  double r = 0.0;
  double theta = 0.0;
  /// Exact boundary location cached by collide(): segment index and the
  /// segment parameter (cap abscissa x or arc polar angle). segment < 0 means
  /// "derive from r".
  int segment = -1;
  double param = 0.0;
};

/// theta -> pi - theta (reversed velocity), keeping the cached location.
CollisionState flip(const CollisionState& s);

/// d((r,theta),(r',theta')) = |r - r'| (on the circle) + |theta - theta'|.
double phase_distance(const CollisionState& a, const CollisionState& b, double period);

struct TableSpec {
  std::string name;
  struct Cusp {
    Vec2 tip;
    double axis_angle = 0.0;  // direction of a
    CuspSpec spec;
  };
  std::vector<Cusp> cusps;
  std::vector<ArcSpec> arcs;  // arc k joins cusp k (lower cap) to cusp k+1 (upper cap)
};

class BilliardTable {
 public:
  /// Validated table; throws InvalidInput for non-dispersing arcs, beta < 2,
  /// beta_max <= 2, mismatched junctions or boundary self-intersection.
  static BilliardTable build(const TableSpec& spec);
  /// Built-in 3-cusp table: cusps at polar angles 90, 210, 330 degrees.
  static BilliardTable machta3(double beta = 3.0, double c = 1.0, double extent = 0.25);
  static TableSpec machta3_spec(double beta = 3.0, double c = 1.0, double extent = 0.25);
  /// Degenerate fixture: the interior of a circle (focusing, no cusps).
  static BilliardTable circle_fixture(double radius);

  const std::string& name() const { return name_; }
  double total_length() const { return total_length_; }
  double gamma_max() const { return gamma_max_; }
  double beta_max() const { return beta_max_; }
  const std::vector<CuspGeometry>& cusps() const { return cusps_; }
  const std::vector<Segment>& segments() const { return segments_; }
  /// Cusps with beta = beta_max.
  std::vector<int> j_max() const;

  /// Position, unit tangent (direction of increasing r) and inward normal.
  struct Frame {
    Vec2 point, tangent, normal;
  };
  Frame frame(const CollisionState& s) const;
  Vec2 position(double r) const;
  /// Arclength coordinate of a segment parameter.
  double r_of(int segment, double param) const;
  /// Fills segment/param from r when not cached.
  CollisionState locate(CollisionState s) const;
  /// Cusp index whose caps contain the state, or -1.
  int cusp_of(const CollisionState& s) const;

  double cap_arclength(const CuspGeometry& c, double x, double coefficient) const;
  double cap_abscissa(const CuspGeometry& c, double s, double coefficient) const;

 private:
  std::string name_;
  std::vector<CuspGeometry> cusps_;
  std::vector<Segment> segments_;
  double total_length_ = 0.0;
  double gamma_max_ = 0.0;
  double beta_max_ = 0.0;

  void finalize_lengths();
  void validate_geometry() const;
};

BilliardTable build_table(const TableSpec& spec);

/// Key-value table file: `name = ...`, `cusp = px py axis_angle_deg beta c_plus
/// c_minus extent`, `arc = cx cy radius angle_start_deg angle_end_deg`, `#`
/// comments. The single line `builtin = machta3` selects the built-in table.
TableSpec parse_table(std::istream& in);
BilliardTable load_table(const std::string& path_or_name);
void write_table(std::ostream& out, const TableSpec& spec);

inline constexpr double kGrazingTolerance = 1e-6;
inline constexpr double kCuspDepthCutoff = 1e-13;

/// Next collision with specular reflection. Throws OrbitAborted on grazing
/// incidence, cusp depth below kCuspDepthCutoff or a missed boundary.
CollisionState collide(const BilliardTable& table, const CollisionState& s);

/// Outgoing unit velocity of a state.
Vec2 velocity(const BilliardTable& table, const CollisionState& s);

/// Number of consecutive collisions in one cusp made by the forward orbit,
/// starting with the next collision.
int cusp_run_length(const BilliardTable& table, const CollisionState& s, int limit);

/// True iff the forward orbit makes fewer than K0 consecutive collisions in
/// any one cusp before leaving it.
bool in_inducing_set(const BilliardTable& table, const CollisionState& s, int k0);

struct InducedStep {
  std::uint64_t time = 0;
  CollisionState state;
};

/// Iterates collide until the orbit returns to the inducing set.
InducedStep induced_step(const BilliardTable& table, const CollisionState& s, int k0,
                         std::uint64_t cap = 100000000ULL);

/// Stateful induced-map driver that reuses look-ahead collisions.
class InducedOrbit {
 public:
  InducedOrbit(const BilliardTable& table, const CollisionState& start, int k0,
               std::uint64_t cap = 100000000ULL);
  /// Advances to the next return; `visit` (if set) sees the R states of the
  /// excursion, starting with the current one.
  InducedStep next(const std::function<void(const CollisionState&)>& visit = nullptr);
  const CollisionState& state() const { return current_; }

 private:
  const BilliardTable* table_;
  int k0_;
  std::uint64_t cap_;
  CollisionState current_;
  std::deque<CollisionState> ahead_;  // collide^1, collide^2, ... of current_

  const CollisionState& ahead(std::size_t i);
  bool in_m_at(std::size_t i);  // state collide^i(current_), i = 0 is current_
};

/// r uniform on [0, |dQ|), theta with density sin(theta)/2.
CollisionState sinetheta_sample(const BilliardTable& table, Rng& rng);

}  // namespace stablelab
