#include <atomic>
#include <cstdlib>
#include <cstring>

#include "stablelab/error.hpp"
#include "stablelab/kernels/kernels.hpp"

namespace stablelab::kernels {

namespace {

Isa initial_isa() {
  const char* env = std::getenv("STABLELAB_ISA");
  if (env != nullptr && std::strcmp(env, "scalar") == 0) return Isa::scalar;
  return detected_isa();
}

std::atomic<Isa>& isa_slot() {
  static std::atomic<Isa> slot{initial_isa()};
  return slot;
}

bool use_avx2() { return active_isa() == Isa::avx2; }

void check_sum_request(const LsvSumRequest& r, std::size_t lanes, std::size_t sums) {
  if (r.observable == nullptr) throw InvalidInput("lsv_sums: observable is null");
  if (r.checkpoints.empty()) throw InvalidInput("lsv_sums: no checkpoints");
  if (r.checkpoints.front() == 0) throw InvalidInput("lsv_sums: checkpoints must be positive");
  for (std::size_t i = 1; i < r.checkpoints.size(); ++i) {
    if (r.checkpoints[i] <= r.checkpoints[i - 1])
      throw InvalidInput("lsv_sums: checkpoints must be strictly increasing");
  }
  if (sums != lanes * r.checkpoints.size()) throw InvalidInput("lsv_sums: output size mismatch");
}

}  // namespace

Isa detected_isa() { return avx2::available() ? Isa::avx2 : Isa::scalar; }

Isa active_isa() { return isa_slot().load(std::memory_order_relaxed); }

void force_isa(Isa isa) {
  if (isa == Isa::avx2 && !avx2::available()) throw InvalidInput("AVX2 is not available");
  isa_slot().store(isa, std::memory_order_relaxed);
}

const char* isa_name(Isa isa) { return isa == Isa::avx2 ? "avx2" : "scalar"; }

void lsv_sums(const LsvSumRequest& request, std::span<double> states, std::span<double> sums) {
  check_sum_request(request, states.size(), sums.size());
  if (use_avx2())
    avx2::lsv_sums(request, states, sums);
  else
    scalar::lsv_sums(request, states, sums);
}

void lsv_returns(double gamma, double two_pow_gamma, std::span<double> states, std::uint64_t count,
                 std::uint64_t step_cap, std::span<std::uint64_t> return_times,
                 std::span<double> return_points) {
  const std::size_t need = states.size() * count;
  if (!return_times.empty() && return_times.size() != need)
    throw InvalidInput("lsv_returns: return_times size mismatch");
  if (!return_points.empty() && return_points.size() != need)
    throw InvalidInput("lsv_returns: return_points size mismatch");
  if (use_avx2())
    avx2::lsv_returns(gamma, two_pow_gamma, states, count, step_cap, return_times, return_points);
  else
    scalar::lsv_returns(gamma, two_pow_gamma, states, count, step_cap, return_times, return_points);
}

void lsv_iterate(double gamma, double two_pow_gamma, std::span<double> states, std::uint64_t steps) {
  if (use_avx2())
    avx2::lsv_iterate(gamma, two_pow_gamma, states, steps);
  else
    scalar::lsv_iterate(gamma, two_pow_gamma, states, steps);
}

void eval_interval(const IntervalObservable& observable, std::span<const double> xs,
                   std::span<double> out) {
  if (out.size() != xs.size()) throw InvalidInput("eval_interval: size mismatch");
  if (use_avx2())
    avx2::eval_interval(observable, xs, out);
  else
    scalar::eval_interval(observable, xs, out);
}

void pow_batch(std::span<const double> xs, double exponent, std::span<double> out) {
  if (out.size() != xs.size()) throw InvalidInput("pow_batch: size mismatch");
  if (use_avx2())
    avx2::pow_batch(xs, exponent, out);
  else
    scalar::pow_batch(xs, exponent, out);
}

void lagged_dot(const double* v, std::size_t count, std::span<double> out) {
  if (use_avx2())
    avx2::lagged_dot(v, count, out);
  else
    scalar::lagged_dot(v, count, out);
}

double sum_log_ratio(std::span<const double> xs, double denom) {
  return use_avx2() ? avx2::sum_log_ratio(xs, denom) : scalar::sum_log_ratio(xs, denom);
}

}  // namespace stablelab::kernels
