#pragma once

// LSV intermittent maps T(x) = (2^g x^g + 1) x on [0,1/2), 2x - 1 on [1/2,1],
// and the first-return system on Y = [1/2, 1].

#include <cstdint>
#include <span>
#include <vector>

#include "stablelab/rng.hpp"

namespace stablelab {

class LsvMap {
 public:
  explicit LsvMap(double gamma);

  double gamma() const { return gamma_; }
  double two_pow_gamma() const { return two_pow_gamma_; }
  double apply(double x) const;
  /// Left branch derivative helper used by the ladder solver.
  double left_branch(double t) const;

 private:
  double gamma_;
  double two_pow_gamma_;
};

double lsv_apply(const LsvMap& map, double x);

struct OrbitSummary {
  double final_state = 0.0;
  double total = 0.0;
  std::uint64_t steps = 0;
};

/// Feeds x, T x, ..., T^{n-1} x to `accumulator` (which returns the value to
/// add) and returns T^n x with the accumulated total.
template <class Accumulator>
OrbitSummary lsv_orbit(const LsvMap& map, double start, std::uint64_t n, Accumulator&& accumulator) {
  OrbitSummary out;
  double x = start;
  for (std::uint64_t j = 0; j < n; ++j) {
    out.total += accumulator(x);
    x = map.apply(x);
  }
  out.final_state = x;
  out.steps = n;
  return out;
}

struct FirstReturn {
  std::uint64_t time = 0;
  double state = 0.0;
};

inline constexpr std::uint64_t kDefaultReturnCap = 1000000000ULL;

/// Least R >= 1 with T^R x in [1/2,1]. Throws NumericalFailure when the cap
/// is exceeded (orbit stuck at the fixed point in floating point).
FirstReturn first_return(const LsvMap& map, double x, std::uint64_t cap = kDefaultReturnCap);

/// x_0 = 1/2 > x_1 > ... > x_J with T(x_j) = x_{j-1} on the left branch, and
/// y_0 = 1 > y_1 > ... > y_J in Y with y_j = (1 + x_{j-1}) / 2. The first
/// return time equals j on C_j = (y_j, y_{j-1}).
struct InducedPartition {
  int depth = 0;
  std::vector<double> x;
  std::vector<double> y;

  double cell_lower(int j) const { return y[j]; }
  double cell_upper(int j) const { return y[j - 1]; }
  /// Sum of the Lebesgue lengths of C_1..C_J.
  double covered_length() const { return 1.0 - y[depth]; }
};

InducedPartition build_partition(const LsvMap& map, int depth);

/// Solves (2^g t^g + 1) t = target on (0, target) by bisection and Newton.
double left_preimage(const LsvMap& map, double target);

inline constexpr std::uint64_t kDefaultBurnIn = 10000;

/// Uniform start pushed through burn_in steps of T.
double equilibrium_sample(const LsvMap& map, Rng& rng, std::uint64_t burn_in = kDefaultBurnIn);

/// Fills `out` with independent equilibrium samples, lane i seeded from
/// derive_seed(seed, stream, first_index + i).
void equilibrium_batch(const LsvMap& map, std::uint64_t seed, std::uint64_t stream,
                       std::uint64_t first_index, std::uint64_t burn_in, std::span<double> out);

/// Uniform start on Y advanced through `burn_returns` returns of the induced
/// map, one independent stream per lane.
void induced_batch(const LsvMap& map, std::uint64_t seed, std::uint64_t stream,
                   std::uint64_t first_index, std::uint64_t burn_returns, std::span<double> out);

/// mu(Y) estimated by Kac's formula along a long induced orbit: returns over
/// T steps. Also returns a batch-means standard error.
struct MeasureEstimate {
  double value = 0.0;
  double std_error = 0.0;
};
MeasureEstimate estimate_mu_y(const LsvMap& map, std::uint64_t seed, std::uint64_t returns);

}  // namespace stablelab
