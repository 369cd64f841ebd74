#pragma once

// Data-parallel inner loops. Each kernel has a scalar reference in
// namespace `scalar` and an AVX2 variant in namespace `avx2`; the dispatching
// free functions pick one at runtime. Both variants produce bit-identical
// output (the scalar code mirrors the 4-lane accumulation order), which the
// equivalence tests assert exactly.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace stablelab::kernels {

enum class Isa { scalar, avx2 };

/// Best instruction set supported by this CPU and build.
Isa detected_isa();
/// Instruction set used by the dispatching functions. Defaults to
/// detected_isa(); the environment variable STABLELAB_ISA=scalar forces the
/// reference path.
Isa active_isa();
void force_isa(Isa isa);
const char* isa_name(Isa isa);

struct PoleTerm {
  double location = 0.0;
  double coefficient = 1.0;
  double exponent = 1.0;     // p in |x - location|^{-p}
  double core_radius = -1.0;  // |x - location| <= core_radius evaluates to core_value
  double core_value = 0.0;
};

/// sum_i coefficient_i |x - location_i|^{-exponent_i} + shift on [0,1].
struct IntervalObservable {
  std::vector<PoleTerm> poles;
  double shift = 0.0;
};

enum class SumMode {
  ambient,  // checkpoints count steps of T
  induced,  // checkpoints count returns to [1/2, 1]
};

struct LsvSumRequest {
  double gamma = 0.0;
  double two_pow_gamma = 1.0;
  const IntervalObservable* observable = nullptr;
  SumMode mode = SumMode::ambient;
  /// Subtracted from every observable value (ambient: phi(T^j x); induced:
  /// phi(T^j y) for each step of the excursion).
  double step_center = 0.0;
  /// Induced mode: subtracted once per return.
  double return_center = 0.0;
  std::span<const std::uint64_t> checkpoints;
  /// Ambient: discarded T steps. Induced: discarded returns.
  std::uint64_t burn_in = 0;
  /// Induced: a lane exceeding this many T steps is abandoned and its
  /// remaining sums set to NaN. 0 selects 64 * last checkpoint + 10^6.
  std::uint64_t step_cap = 0;
};

/// Streams Birkhoff sums for states.size() independent lanes. `sums` is
/// lane-major: sums[lane * checkpoints.size() + k]. States are advanced in
/// place.
void lsv_sums(const LsvSumRequest& request, std::span<double> states, std::span<double> sums);

/// Advances each lane (which must start in [1/2,1]) through `count` returns
/// to [1/2,1]. return_times / return_points are lane-major with `count`
/// entries per lane (either may be empty). A return time of 0 marks a lane
/// that exceeded `step_cap` T steps within a single excursion; its remaining
/// points are NaN. step_cap 0 selects 10^9.
void lsv_returns(double gamma, double two_pow_gamma, std::span<double> states, std::uint64_t count,
                 std::uint64_t step_cap, std::span<std::uint64_t> return_times,
                 std::span<double> return_points);

/// Applies T `steps` times to every lane.
void lsv_iterate(double gamma, double two_pow_gamma, std::span<double> states, std::uint64_t steps);

/// out[i] = observable(xs[i]).
void eval_interval(const IntervalObservable& observable, std::span<const double> xs,
                   std::span<double> out);

/// out[i] = xs[i]^exponent for xs[i] >= 0.
void pow_batch(std::span<const double> xs, double exponent, std::span<double> out);

/// out[j-1] += sum_{i<count} v[i] * v[i+j] for j = 1..out.size().
/// v must hold count + out.size() readable values.
void lagged_dot(const double* v, std::size_t count, std::span<double> out);

/// sum_i log(xs[i] / denom).
double sum_log_ratio(std::span<const double> xs, double denom);

namespace scalar {
void lsv_sums(const LsvSumRequest& request, std::span<double> states, std::span<double> sums);
void lsv_returns(double gamma, double two_pow_gamma, std::span<double> states, std::uint64_t count,
                 std::uint64_t step_cap, std::span<std::uint64_t> return_times,
                 std::span<double> return_points);
void lsv_iterate(double gamma, double two_pow_gamma, std::span<double> states, std::uint64_t steps);
void eval_interval(const IntervalObservable& observable, std::span<const double> xs,
                   std::span<double> out);
void pow_batch(std::span<const double> xs, double exponent, std::span<double> out);
void lagged_dot(const double* v, std::size_t count, std::span<double> out);
double sum_log_ratio(std::span<const double> xs, double denom);

double lsv_step(double x, double gamma, double two_pow_gamma);
double eval_point(const IntervalObservable& observable, double x);
}  // namespace scalar

namespace avx2 {
bool available();
void lsv_sums(const LsvSumRequest& request, std::span<double> states, std::span<double> sums);
void lsv_returns(double gamma, double two_pow_gamma, std::span<double> states, std::uint64_t count,
                 std::uint64_t step_cap, std::span<std::uint64_t> return_times,
                 std::span<double> return_points);
void lsv_iterate(double gamma, double two_pow_gamma, std::span<double> states, std::uint64_t steps);
void eval_interval(const IntervalObservable& observable, std::span<const double> xs,
                   std::span<double> out);
void pow_batch(std::span<const double> xs, double exponent, std::span<double> out);
void lagged_dot(const double* v, std::size_t count, std::span<double> out);
double sum_log_ratio(std::span<const double> xs, double denom);
}  // namespace avx2

}  // namespace stablelab::kernels
