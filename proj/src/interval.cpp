#include "stablelab/interval.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "stablelab/error.hpp"
#include "stablelab/kernels/kernels.hpp"

namespace stablelab {

LsvMap::LsvMap(double gamma) : gamma_(gamma), two_pow_gamma_(std::exp2(gamma)) {
  if (!(gamma >= 0.0 && gamma < 1.0))
    throw InvalidInput("LSV gamma must lie in [0,1), got " + std::to_string(gamma));
}

double LsvMap::apply(double x) const { return kernels::scalar::lsv_step(x, gamma_, two_pow_gamma_); }

double LsvMap::left_branch(double t) const {
  return (two_pow_gamma_ * std::pow(t, gamma_) + 1.0) * t;
}

double lsv_apply(const LsvMap& map, double x) {
  if (!(x >= 0.0 && x <= 1.0)) throw InvalidInput("interval state outside [0,1]");
  return map.apply(x);
}

FirstReturn first_return(const LsvMap& map, double x, std::uint64_t cap) {
  if (!(x >= 0.5 && x <= 1.0)) throw InvalidInput("first_return needs x in [1/2,1]");
  FirstReturn out;
  do {
    x = map.apply(x);
    ++out.time;
  } while (x < 0.5 && out.time < cap);
  if (x < 0.5)
    throw NumericalFailure("first_return: no return within " + std::to_string(cap) + " steps");
  out.state = x;
  return out;
}

double left_preimage(const LsvMap& map, double target) {
  if (!(target > 0.0 && target <= 0.5)) throw InvalidInput("left_preimage: target outside (0,1/2]");
  const double g = map.gamma();
  const double c = map.two_pow_gamma();
  double lo = 0.0;
  double hi = target;
  // Coarse bisection until the bracket is relatively tight.
  for (int i = 0; i < 200 && hi - lo > 1e-3 * lo; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (map.left_branch(mid) < target)
      lo = mid;
    else
      hi = mid;
  }
  double t = 0.5 * (lo + hi);
  for (int i = 0; i < 100; ++i) {
    const double f = map.left_branch(t) - target;
    if (f == 0.0) return t;
    if (f < 0.0)
      lo = t;
    else
      hi = t;
    const double df = c * (1.0 + g) * std::pow(t, g) + 1.0;
    double next = t - f / df;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    const double step = std::fabs(next - t);
    t = next;
    if (step <= 1e-14 * t || hi - lo <= 1e-14 * lo) return t;
  }
  throw NumericalFailure("left_preimage: solver did not converge");
}

InducedPartition build_partition(const LsvMap& map, int depth) {
  if (depth < 1) throw InvalidInput("build_partition: depth must be >= 1");
  InducedPartition p;
  p.depth = depth;
  p.x.resize(depth + 1);
  p.y.resize(depth + 1);
  p.x[0] = 0.5;
  p.y[0] = 1.0;
  for (int j = 1; j <= depth; ++j) {
    p.x[j] = left_preimage(map, p.x[j - 1]);
    if (!(p.x[j] < p.x[j - 1] && p.x[j] > 0.0))
      throw NumericalFailure("build_partition: ladder lost monotonicity at depth " + std::to_string(j));
    p.y[j] = 0.5 * (1.0 + p.x[j - 1]);
  }
  return p;
}

double equilibrium_sample(const LsvMap& map, Rng& rng, std::uint64_t burn_in) {
  double x = uniform01(rng);
  for (std::uint64_t i = 0; i < burn_in; ++i) x = map.apply(x);
  return x;
}

void equilibrium_batch(const LsvMap& map, std::uint64_t seed, std::uint64_t stream,
                       std::uint64_t first_index, std::uint64_t burn_in, std::span<double> out) {
  for (std::size_t i = 0; i < out.size(); ++i) {
    Rng rng = make_rng(seed, stream, first_index + i);
    out[i] = uniform01(rng);
  }
  kernels::lsv_iterate(map.gamma(), map.two_pow_gamma(), out, burn_in);
}

void induced_batch(const LsvMap& map, std::uint64_t seed, std::uint64_t stream,
                   std::uint64_t first_index, std::uint64_t burn_returns, std::span<double> out) {
  for (std::size_t i = 0; i < out.size(); ++i) {
    Rng rng = make_rng(seed, stream, first_index + i);
    out[i] = 0.5 + 0.5 * uniform_open01(rng);
  }
  if (burn_returns > 0)
    kernels::lsv_returns(map.gamma(), map.two_pow_gamma(), out, burn_returns, 0, {}, {});
}

MeasureEstimate estimate_mu_y(const LsvMap& map, std::uint64_t seed, std::uint64_t returns) {
  constexpr std::size_t kLanes = 16;
  constexpr std::uint64_t kChunk = 65536;
  std::vector<double> states(kLanes);
  induced_batch(map, seed, streams::pilot, 0, 200, states);
  const std::uint64_t per_lane = std::max<std::uint64_t>(1, returns / kLanes);
  std::vector<std::uint64_t> times(kLanes * kChunk);
  std::vector<double> steps(kLanes, 0.0);
  std::uint64_t done = 0;
  while (done < per_lane) {
    const std::uint64_t count = std::min(kChunk, per_lane - done);
    std::span<std::uint64_t> t(times.data(), kLanes * count);
    kernels::lsv_returns(map.gamma(), map.two_pow_gamma(), states, count, 0, t, {});
    for (std::size_t l = 0; l < kLanes; ++l) {
      for (std::uint64_t i = 0; i < count; ++i) {
        const std::uint64_t r = t[l * count + i];
        if (r == 0) throw NumericalFailure("estimate_mu_y: orbit stuck at the fixed point");
        steps[l] += static_cast<double>(r);
      }
    }
    done += count;
  }
  double total = 0.0;
  for (double s : steps) total += s;
  MeasureEstimate est;
  est.value = static_cast<double>(per_lane * kLanes) / total;
  double var = 0.0;
  for (double s : steps) {
    const double v = static_cast<double>(per_lane) / s - est.value;
    var += v * v;
  }
  est.std_error = std::sqrt(var / (kLanes - 1) / kLanes);
  return est;
}

}  // namespace stablelab
