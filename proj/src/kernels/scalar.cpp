#include <cmath>
#include <limits>

#include "stablelab/kernels/kernels.hpp"
#include "stablelab/kernels/math.hpp"

namespace stablelab::kernels::scalar {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::uint64_t induced_cap(const LsvSumRequest& r) {
  if (r.step_cap != 0) return r.step_cap;
  return 64 * r.checkpoints.back() + 1000000;
}

}  // namespace

double lsv_step(double x, double gamma, double two_pow_gamma) {
  return x < 0.5 ? (two_pow_gamma * ref::pow(x, gamma) + 1.0) * x : 2.0 * x - 1.0;
}

double eval_point(const IntervalObservable& observable, double x) {
  double acc = 0.0;
  for (const PoleTerm& t : observable.poles) {
    const double d = std::fabs(x - t.location);
    const double v = d <= t.core_radius ? t.core_value : ref::pow(d, -t.exponent);
    acc = acc + t.coefficient * v;
  }
  return acc + observable.shift;
}

void lsv_sums(const LsvSumRequest& r, std::span<double> states, std::span<double> sums) {
  const std::size_t k_count = r.checkpoints.size();
  const double g = r.gamma;
  const double c = r.two_pow_gamma;
  for (std::size_t lane = 0; lane < states.size(); ++lane) {
    double x = states[lane];
    double* out = sums.data() + lane * k_count;
    if (r.mode == SumMode::ambient) {
      for (std::uint64_t b = 0; b < r.burn_in; ++b) x = lsv_step(x, g, c);
      double acc = 0.0;
      std::size_t k = 0;
      for (std::uint64_t j = 1; k < k_count; ++j) {
        acc = acc + (eval_point(*r.observable, x) - r.step_center);
        x = lsv_step(x, g, c);
        if (j == r.checkpoints[k]) out[k++] = acc;
      }
    } else {
      const std::uint64_t cap = induced_cap(r);
      std::uint64_t steps = 0;
      std::uint64_t returns = 0;
      while (returns < r.burn_in && steps < cap) {
        x = lsv_step(x, g, c);
        ++steps;
        if (x >= 0.5) ++returns;
      }
      std::size_t k = 0;
      if (returns < r.burn_in) {
        for (; k < k_count; ++k) out[k] = kNaN;
      }
      double acc = 0.0;
      steps = 0;
      returns = 0;
      while (k < k_count) {
        if (steps >= cap) {
          for (; k < k_count; ++k) out[k] = kNaN;
          break;
        }
        acc = acc + (eval_point(*r.observable, x) - r.step_center);
        x = lsv_step(x, g, c);
        ++steps;
        if (x >= 0.5) {
          acc = acc - r.return_center;
          ++returns;
          if (returns == r.checkpoints[k]) out[k++] = acc;
        }
      }
    }
    states[lane] = x;
  }
}

void lsv_returns(double gamma, double two_pow_gamma, std::span<double> states, std::uint64_t count,
                 std::uint64_t step_cap, std::span<std::uint64_t> return_times,
                 std::span<double> return_points) {
  const std::uint64_t cap = step_cap == 0 ? 1000000000ULL : step_cap;
  const bool want_t = !return_times.empty();
  const bool want_p = !return_points.empty();
  for (std::size_t lane = 0; lane < states.size(); ++lane) {
    double x = states[lane];
    const std::size_t base = lane * count;
    for (std::uint64_t i = 0; i < count; ++i) {
      std::uint64_t n = 0;
      do {
        x = lsv_step(x, gamma, two_pow_gamma);
        ++n;
      } while (x < 0.5 && n < cap);
      if (x < 0.5) {
        for (; i < count; ++i) {
          if (want_t) return_times[base + i] = 0;
          if (want_p) return_points[base + i] = kNaN;
        }
        break;
      }
      if (want_t) return_times[base + i] = n;
      if (want_p) return_points[base + i] = x;
    }
    states[lane] = x;
  }
}

void lsv_iterate(double gamma, double two_pow_gamma, std::span<double> states, std::uint64_t steps) {
  for (double& x : states) {
    for (std::uint64_t s = 0; s < steps; ++s) x = lsv_step(x, gamma, two_pow_gamma);
  }
}

void eval_interval(const IntervalObservable& observable, std::span<const double> xs,
                   std::span<double> out) {
  for (std::size_t i = 0; i < xs.size(); ++i) out[i] = eval_point(observable, xs[i]);
}

void pow_batch(std::span<const double> xs, double exponent, std::span<double> out) {
  for (std::size_t i = 0; i < xs.size(); ++i) out[i] = ref::pow(xs[i], exponent);
}

void lagged_dot(const double* v, std::size_t count, std::span<double> out) {
  const std::size_t count4 = count & ~std::size_t{3};
  for (std::size_t j = 1; j <= out.size(); ++j) {
    double a[4] = {0.0, 0.0, 0.0, 0.0};
    for (std::size_t i = 0; i < count4; i += 4) {
      for (std::size_t l = 0; l < 4; ++l) a[l] = a[l] + v[i + l] * v[i + l + j];
    }
    for (std::size_t i = count4; i < count; ++i) a[i - count4] = a[i - count4] + v[i] * v[i + j];
    out[j - 1] = out[j - 1] + ((a[0] + a[1]) + (a[2] + a[3]));
  }
}

double sum_log_ratio(std::span<const double> xs, double denom) {
  const std::size_t n = xs.size();
  const std::size_t n4 = n & ~std::size_t{3};
  double a[4] = {0.0, 0.0, 0.0, 0.0};
  for (std::size_t i = 0; i < n4; i += 4) {
    for (std::size_t l = 0; l < 4; ++l) a[l] = a[l] + ref::log(xs[i + l] / denom);
  }
  for (std::size_t i = n4; i < n; ++i) a[i - n4] = a[i - n4] + ref::log(xs[i] / denom);
  return (a[0] + a[1]) + (a[2] + a[3]);
}

}  // namespace stablelab::kernels::scalar
