#include "stablelab/observables.hpp"

#include <algorithm>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <cmath>
#include <limits>
#include <string>

#include "stablelab/error.hpp"
#include "stablelab/parallel.hpp"

namespace stablelab {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kInf = std::numeric_limits<double>::infinity();

void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 2.0)) throw InvalidInput("alpha must lie in (0,2)");
  if (alpha == 1.0) throw InvalidInput("alpha = 1 is excluded");
}

double pole_term(double d, double p, double coefficient) {
  if (d == 0.0) return coefficient * std::numeric_limits<double>::infinity();
  return coefficient * std::pow(d, -p);
}

}  // namespace

void ObservableSpec::validate(bool zero_ok) const {
  check_alpha(alpha);
  if (dimension != 1 && dimension != 2) throw InvalidInput("observable dimension must be 1 or 2");
  if (poles.empty() && shift == 0.0 && !zero_ok) throw InvalidInput("observable has no poles");
  for (const Pole& p : poles) {
    if (!std::isfinite(p.x) || !std::isfinite(p.theta) || !std::isfinite(p.coefficient))
      throw InvalidInput("non-finite pole parameter");
  }
}

double eval(const ObservableSpec& spec, double x) {
  const double p = spec.pole_exponent();
  double acc = 0.0;
  for (const Pole& pole : spec.poles) acc += pole_term(std::fabs(x - pole.x), p, pole.coefficient);
  return acc + spec.shift;
}

double arclength_distance(double r1, double r2, double period) {
  double d = std::fmod(std::fabs(r1 - r2), period);
  return std::min(d, period - d);
}

double eval(const ObservableSpec& spec, double r, double theta, double period) {
  const double p = spec.pole_exponent();
  double acc = 0.0;
  for (const Pole& pole : spec.poles) {
    const double d = arclength_distance(r, pole.x, period) + std::fabs(theta - pole.theta);
    acc += pole_term(d, p, pole.coefficient);
  }
  return acc + spec.shift;
}

kernels::IntervalObservable to_kernel(const ObservableSpec& spec, double core_radius) {
  const double p = spec.pole_exponent();
  if (core_radius > 0.0 && p >= 1.0)
    throw InvalidInput("core replacement needs an integrable pole (D/alpha < 1)");
  kernels::IntervalObservable k;
  k.shift = spec.shift;
  for (const Pole& pole : spec.poles) {
    kernels::PoleTerm t;
    t.location = pole.x;
    t.coefficient = pole.coefficient;
    t.exponent = p;
    if (core_radius > 0.0) {
      t.core_radius = core_radius;
      t.core_value = std::pow(core_radius, -p) / (1.0 - p);
    } else {
      t.core_radius = -1.0;
      t.core_value = 0.0;
    }
    k.poles.push_back(t);
  }
  return k;
}

double scaling_bn(double n, double alpha) {
  check_alpha(alpha);
  if (!(n >= 1.0)) throw InvalidInput("scaling_bn needs n >= 1");
  return std::pow(n, 1.0 / alpha);
}

double centering_cn(double n, double alpha, double mean_estimate) {
  check_alpha(alpha);
  return alpha < 1.0 ? 0.0 : n * mean_estimate;
}

double Truncation::apply(double value) const {
  return std::fabs(value) <= threshold ? value : 0.0;
}

double Truncation::raw(double x) const { return apply(eval(spec, x)); }

Truncation truncate(const ObservableSpec& spec, double threshold) {
  if (!(threshold > 0.0)) throw InvalidInput("truncation threshold must be positive");
  Truncation t;
  t.spec = spec;
  t.threshold = threshold;
  return t;
}

// Boundary values come from Richardson extrapolation, whose roundoff noise
// (~1e-9) sets the attainable accuracy.
constexpr double kCuspQuadratureFloor = 1e-6;

CuspIntegrals cusp_integrals(const BoundaryValues& values, double gamma_i, std::span<const double> breakpoints,
                             double tolerance) {
  if (!(gamma_i >= 0.0)) throw InvalidInput("cusp exponent must be non-negative");
  std::vector<double> edges{0.0, kPi};
  for (double b : breakpoints) {
    if (b > 1e-9 && b < kPi - 1e-9) edges.push_back(b);
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  boost::math::quadrature::tanh_sinh<double> integrator(15);
  auto run = [&](auto&& f, bool strict) {
    double total = 0.0, error = 0.0, l1 = 0.0;
    for (std::size_t k = 0; k + 1 < edges.size(); ++k) {
      double e = 0.0, m = 0.0;
      total += integrator.integrate(f, edges[k], edges[k + 1], tolerance, &e, &m);
      error += e;
      l1 += m;
    }
    if (!std::isfinite(total) || (strict && error > kCuspQuadratureFloor * std::max(l1, 1.0)))
      throw NumericalFailure("cusp_integrals: quadrature did not converge");
    return total;
  };
  CuspIntegrals out;
  out.i_psi = 0.25 * run(
                         [&](double t) {
                           const auto [plus, minus] = values(t);
                           return (plus + minus) * std::pow(std::sin(t), gamma_i);
                         },
                         true);
  out.i = 0.5 * run([&](double t) { return std::pow(std::sin(t), gamma_i); }, true);
  out.i_abs = 0.25 * run(
                         [&](double t) {
                           const auto [plus, minus] = values(t);
                           return (std::fabs(plus) + std::fabs(minus)) * std::pow(std::sin(t), gamma_i);
                         },
                         false);
  return out;
}

double billiard_pole_mean(double p, double theta0, double period) {
  if (!(p > 0.0 && p < 2.0) || p == 1.0) throw InvalidInput("billiard_pole_mean: exponent outside (0,1) U (1,2)");
  if (!(period > 0.0) || !(theta0 >= 0.0 && theta0 <= kPi)) throw InvalidInput("billiard_pole_mean: bad pole");
  const double half = 0.5 * period;
  auto inner = [&](double c) {
    return 2.0 * (std::pow(half + c, 1.0 - p) - std::pow(c, 1.0 - p)) / (1.0 - p);
  };
  boost::math::quadrature::tanh_sinh<double> integrator(15);
  double total = 0.0;
  if (theta0 > 0.0) {
    total += integrator.integrate([&](double w) { return std::sin(w) * inner(std::max(theta0 - w, 0.0)); }, 0.0,
                                  theta0, 1e-12);
  }
  if (theta0 < kPi) {
    total += integrator.integrate([&](double w) { return std::sin(w) * inner(std::max(w - theta0, 0.0)); },
                                  theta0, kPi, 1e-12);
  }
  return total / (2.0 * period);
}

double billiard_mean(const ObservableSpec& spec, double period) {
  spec.validate(true);
  const double p = spec.pole_exponent();
  double total = spec.shift;
  for (const Pole& pole : spec.poles) {
    if (pole.coefficient == 0.0) continue;
    if (p >= 2.0) return pole.coefficient > 0.0 ? kInf : -kInf;
    total += pole.coefficient * billiard_pole_mean(p, pole.theta, period);
  }
  return total;
}

double richardson_limit(const std::function<double(double)>& f, double h0, int levels) {
  if (levels < 1 || !(h0 > 0.0)) throw InvalidInput("richardson_limit: bad parameters");
  std::vector<double> prev(levels);
  std::vector<double> cur(levels);
  double h = h0;
  for (int k = 0; k < levels; ++k) {
    cur[0] = f(h);
    double factor = 2.0;
    for (int m = 1; m <= k; ++m) {
      cur[m] = cur[m - 1] + (cur[m - 1] - prev[m - 1]) / (factor - 1.0);
      factor *= 2.0;
    }
    std::swap(prev, cur);
    h *= 0.5;
  }
  return prev[levels - 1];
}

namespace {

MeanEstimate chunked_average(const LsvMap& map, const kernels::IntervalObservable& k,
                             const MeanOptions& o) {
  if (o.chunks < 2) throw InvalidInput("estimate_mean needs at least two chunks");
  const auto chunks = static_cast<std::size_t>(o.chunks);
  const std::uint64_t per_chunk = std::max<std::uint64_t>(1, o.total_steps / chunks);
  std::vector<double> states(chunks);
  std::vector<double> sums(chunks);
  const std::uint64_t checkpoint[1] = {per_chunk};
  constexpr std::size_t kGroup = 4;
  const std::size_t groups = (chunks + kGroup - 1) / kGroup;
  parallel_for(groups, o.threads, [&](std::size_t g) {
    const std::size_t first = g * kGroup;
    const std::size_t count = std::min(kGroup, chunks - first);
    std::span<double> st(states.data() + first, count);
    equilibrium_batch(map, o.seed, streams::mean_estimate, first, o.burn_in, st);
    kernels::LsvSumRequest r;
    r.gamma = map.gamma();
    r.two_pow_gamma = map.two_pow_gamma();
    r.observable = &k;
    r.mode = kernels::SumMode::ambient;
    r.checkpoints = checkpoint;
    kernels::lsv_sums(r, st, std::span<double>(sums.data() + first, count));
  });
  MeanEstimate out;
  out.steps = per_chunk * chunks;
  double total = 0.0;
  for (double s : sums) total += s;
  out.mean = total / static_cast<double>(out.steps);
  double var = 0.0;
  for (double s : sums) {
    const double d = s / static_cast<double>(per_chunk) - out.mean;
    var += d * d;
  }
  out.std_error = std::sqrt(var / static_cast<double>(chunks - 1) / static_cast<double>(chunks));
  if (!std::isfinite(out.mean)) throw NumericalFailure("estimate_mean: non-finite average");
  return out;
}

}  // namespace

MeanEstimate estimate_mean(const LsvMap& map, const ObservableSpec& spec, const MeanOptions& options) {
  spec.validate(true);
  if (spec.dimension != 1) throw InvalidInput("estimate_mean is for interval observables");
  return chunked_average(map, to_kernel(spec, options.core_radius), options);
}

MeanEstimate balance_function(const LsvMap& map, double alpha, double x0, const MeanOptions& options) {
  check_alpha(alpha);
  if (!(alpha > 1.0)) throw InvalidInput("balance_function needs alpha in (1,2)");
  if (!(x0 > 0.0 && x0 < 1.0)) throw InvalidInput("balance_function needs x0 in (0,1)");
  ObservableSpec spec;
  spec.alpha = alpha;
  spec.poles.push_back({x0, 0.0, -1.0});
  spec.shift = std::pow(x0, -1.0 / alpha);
  return chunked_average(map, to_kernel(spec, options.core_radius), options);
}

BalancedRoot find_balanced_x0(const LsvMap& map, double alpha, double a, double b,
                              const BalanceOptions& options) {
  if (!(0.0 < a && a < b && b < 1.0)) throw InvalidInput("find_balanced_x0: bracket must satisfy 0 < a < b < 1");
  MeanEstimate ga = balance_function(map, alpha, a, options.mean);
  MeanEstimate gb = balance_function(map, alpha, b, options.mean);
  if (!(ga.mean > 0.0 && gb.mean < 0.0) && !(ga.mean < 0.0 && gb.mean > 0.0))
    throw InvalidInput("find_balanced_x0: no sign change of g on the bracket");
  const bool decreasing = ga.mean > 0.0;
  BalancedRoot root;
  for (int it = 1; it <= options.max_iterations; ++it) {
    const double mid = 0.5 * (a + b);
    const MeanEstimate gm = balance_function(map, alpha, mid, options.mean);
    root = {mid, gm.mean, gm.std_error, it};
    if (std::fabs(gm.mean) < options.tolerance) break;
    if ((gm.mean > 0.0) == decreasing)
      a = mid;
    else
      b = mid;
  }
  if (std::fabs(root.g) >= options.tolerance)
    throw NumericalFailure("find_balanced_x0: no root within the iteration budget");
  if (root.g_std_error > options.tolerance)
    throw NumericalFailure("find_balanced_x0: Monte Carlo error " + std::to_string(root.g_std_error) +
                           " exceeds the root tolerance");
  return root;
}

}  // namespace stablelab
