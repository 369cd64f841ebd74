#include "stablelab/harness/diagnostics.hpp"

#include <algorithm>
#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>
#include <span>

#include "stablelab/error.hpp"
#include "stablelab/kernels/kernels.hpp"
#include "stablelab/parallel.hpp"

namespace stablelab::harness {

namespace {

constexpr std::size_t kLanes = 64;
constexpr std::size_t kGroup = 4;
constexpr std::uint64_t kChunk = 4096;

std::vector<std::pair<double, double>> survival_curve(const std::vector<double>& sorted) {
  std::vector<std::pair<double, double>> out;
  if (sorted.empty()) return out;
  const double lo = std::max(sorted.front(), 1e-300);
  const double hi = sorted.back();
  const auto n = static_cast<double>(sorted.size());
  for (double t = lo; t < hi; t *= 2.0) {
    const auto above = sorted.end() - std::upper_bound(sorted.begin(), sorted.end(), t);
    if (above == 0) break;
    out.emplace_back(t, static_cast<double>(above) / n);
  }
  return out;
}

void fill_ci(TailFit& f) {
  const double w = 1.96 / std::sqrt(static_cast<double>(f.hill.k));
  f.ci_low = f.hill.alpha * (1.0 - w);
  f.ci_high = f.hill.alpha * (1.0 + w);
}

std::vector<std::size_t> stability_ks(std::size_t n, std::size_t k) {
  std::vector<std::size_t> ks;
  for (double f : {0.25, 0.5, 1.0, 2.0, 4.0}) {
    const auto kk = static_cast<std::size_t>(f * static_cast<double>(k));
    if (kk >= kMinHillK && kk < n) ks.push_back(kk);
  }
  return ks;
}

double pole_x(const ObservableSpec& o) {
  if (o.dimension != 1 || o.poles.empty()) throw InvalidInput("induced diagnostics need an interval pole");
  return o.poles.front().x;
}

double pole_scale(const ObservableSpec& o) { return std::fabs(o.poles.front().coefficient); }

/// b_n with n mu_Y(|phi| > b_n) = 1 for a single pole of density h at x0.
double induced_bn(const ObservableSpec& o, double density, double n) {
  return pole_scale(o) * std::pow(2.0 * density * n, 1.0 / o.alpha);
}

/// Streams the induced orbit of `lanes` (<= kGroup) lanes through `count`
/// returns in chunks, calling sink(lane, return_points, phi_values).
template <class Sink>
void stream_induced(const LsvMap& map, const kernels::IntervalObservable& kobs, std::span<double> states,
                    std::uint64_t count, Sink&& sink) {
  const std::size_t lanes = states.size();
  std::vector<double> points(lanes * kChunk);
  std::vector<double> values(kChunk);
  for (std::uint64_t done = 0; done < count;) {
    const std::uint64_t m = std::min(kChunk, count - done);
    kernels::lsv_returns(map.gamma(), map.two_pow_gamma(), states, m, 0, {},
                         std::span<double>(points.data(), lanes * m));
    for (std::size_t l = 0; l < lanes; ++l) {
      std::span<const double> pts(points.data() + l * m, m);
      kernels::eval_interval(kobs, pts, std::span<double>(values.data(), m));
      sink(l, pts, std::span<const double>(values.data(), m));
    }
    done += m;
  }
}

}  // namespace

TailFit fit_tail(std::vector<double> values, std::size_t k) {
  std::sort(values.begin(), values.end());
  TailFit f;
  f.samples = values.size();
  if (k == 0) k = default_hill_k(values.size());
  f.hill = hill_tail_index(values, k);
  fill_ci(f);
  const auto ks = stability_ks(values.size(), k);
  f.stability = hill_stability(values, ks);
  f.survival = survival_curve(values);
  return f;
}

TailFit fit_tail_above(std::vector<double> values, double threshold) {
  std::sort(values.begin(), values.end());
  const auto above = static_cast<std::size_t>(values.end() -
                                              std::upper_bound(values.begin(), values.end(), threshold));
  TailFit f;
  f.samples = values.size();
  f.threshold = threshold;
  f.hill = hill_tail_index(values, above);
  fill_ci(f);
  f.stability = hill_stability(values, stability_ks(values.size(), above));
  f.survival = survival_curve(values);
  return f;
}

TailFit lsv_return_tail(const LsvMap& map, std::uint64_t returns, std::uint64_t seed, unsigned threads,
                        std::size_t k) {
  const std::uint64_t per = (returns + kLanes - 1) / kLanes;
  std::vector<double> states(kLanes);
  std::vector<std::uint64_t> times(kLanes * per);
  parallel_for(kLanes / kGroup, threads, [&](std::size_t g) {
    std::span<double> st(states.data() + g * kGroup, kGroup);
    induced_batch(map, seed, streams::diagnostic, g * kGroup, 16, st);
    kernels::lsv_returns(map.gamma(), map.two_pow_gamma(), st, per, 0,
                         std::span<std::uint64_t>(times.data() + g * kGroup * per, kGroup * per), {});
  });
  std::vector<double> values;
  values.reserve(times.size());
  std::uint64_t lost = 0;
  for (std::uint64_t t : times) {
    if (t == 0)
      ++lost;
    else
      values.push_back(static_cast<double>(t));
  }
  TailFit f = fit_tail(std::move(values), k);
  f.discarded = lost;
  return f;
}

TailFit observable_tail(const LsvMap& map, const ObservableSpec& observable, std::uint64_t samples,
                        std::uint64_t seed, unsigned threads, std::size_t k, std::uint64_t thin) {
  observable.validate();
  const auto kobs = to_kernel(observable);
  const std::uint64_t per = (samples + kLanes - 1) / kLanes;
  std::vector<double> values(kLanes * per);
  parallel_for(kLanes / kGroup, threads, [&](std::size_t g) {
    std::vector<double> st(kGroup);
    std::vector<double> out(kGroup);
    equilibrium_batch(map, seed, streams::diagnostic, g * kGroup, kDefaultBurnIn, st);
    for (std::uint64_t i = 0; i < per; ++i) {
      kernels::eval_interval(kobs, st, out);
      for (std::size_t l = 0; l < kGroup; ++l) values[(g * kGroup + l) * per + i] = std::fabs(out[l]);
      kernels::lsv_iterate(map.gamma(), map.two_pow_gamma(), st, std::max<std::uint64_t>(thin, 1));
    }
  });
  std::uint64_t lost = 0;
  std::erase_if(values, [&](double v) {
    const bool bad = !std::isfinite(v);
    lost += bad ? 1 : 0;
    return bad;
  });
  TailFit f = fit_tail(std::move(values), k);
  f.discarded = lost;
  return f;
}

TailFit billiard_return_tail(const BilliardTable& table, int k0, std::uint64_t returns, double threshold,
                             std::uint64_t seed, unsigned threads) {
  constexpr std::size_t kOrbits = 16;
  const std::uint64_t per = (returns + kOrbits - 1) / kOrbits;
  std::vector<double> values(kOrbits * per);
  std::vector<std::uint64_t> lost(kOrbits, 0);
  parallel_for(kOrbits, threads, [&](std::size_t o) {
    Rng rng = make_rng(seed, streams::diagnostic, o);
    auto start = [&] {
      for (int tries = 0; tries < 1000000; ++tries) {
        const CollisionState s = sinetheta_sample(table, rng);
        try {
          if (in_inducing_set(table, s, k0)) return s;
        } catch (const OrbitAborted&) {
        }
      }
      throw NumericalFailure("billiard_return_tail: no start in the inducing set");
    };
    InducedOrbit orbit(table, start(), k0);
    for (std::uint64_t i = 0; i < per;) {
      try {
        values[o * per + i] = static_cast<double>(orbit.next().time);
        ++i;
      } catch (const OrbitAborted&) {
        ++lost[o];
        orbit = InducedOrbit(table, start(), k0);
      }
    }
  });
  TailFit f = fit_tail_above(std::move(values), threshold);
  for (std::uint64_t l : lost) f.discarded += l;
  return f;
}

InducedPilot induced_pilot(const LsvMap& map, const ObservableSpec& observable, std::uint64_t returns,
                           double radius, std::uint64_t seed, unsigned threads) {
  const double x0 = pole_x(observable);
  const auto kobs = to_kernel(observable, 1e-6);
  const std::uint64_t per = (returns + kLanes - 1) / kLanes;
  std::vector<double> lane_sum(kLanes, 0.0);
  std::vector<std::uint64_t> lane_hits(kLanes, 0);
  parallel_for(kLanes / kGroup, threads, [&](std::size_t g) {
    std::vector<double> st(kGroup);
    induced_batch(map, seed, streams::pilot, g * kGroup, 16, st);
    stream_induced(map, kobs, st, per, [&](std::size_t l, std::span<const double> pts, std::span<const double> v) {
      double s = 0.0;
      std::uint64_t h = 0;
      for (std::size_t i = 0; i < v.size(); ++i) {
        s += v[i];
        h += std::fabs(pts[i] - x0) < radius ? 1 : 0;
      }
      lane_sum[g * kGroup + l] += s;
      lane_hits[g * kGroup + l] += h;
    });
  });
  InducedPilot p;
  p.returns = per * kLanes;
  double total = 0.0, hits = 0.0;
  for (std::size_t l = 0; l < kLanes; ++l) {
    total += lane_sum[l];
    hits += static_cast<double>(lane_hits[l]);
  }
  const double n = static_cast<double>(p.returns);
  p.mean = total / n;
  p.density = hits / (n * 2.0 * radius);
  double var = 0.0;
  for (double s : lane_sum) {
    const double d = s / static_cast<double>(per) - p.mean;
    var += d * d;
  }
  p.mean_std_error = std::sqrt(var / static_cast<double>(kLanes - 1) / static_cast<double>(kLanes));
  return p;
}

std::vector<double> induced_values(const LsvMap& map, const ObservableSpec& observable, std::size_t lanes,
                                   std::uint64_t count, std::uint64_t seed, std::uint64_t stream_offset,
                                   std::uint64_t burn_returns, unsigned threads) {
  const auto kobs = to_kernel(observable);
  std::vector<double> out(lanes * count);
  const std::size_t groups = (lanes + kGroup - 1) / kGroup;
  parallel_for(groups, threads, [&](std::size_t g) {
    const std::size_t first = g * kGroup;
    const std::size_t m = std::min(kGroup, lanes - first);
    std::vector<double> st(m);
    induced_batch(map, seed, streams::diagnostic, stream_offset + first, burn_returns, st);
    std::vector<std::uint64_t> filled(m, 0);
    stream_induced(map, kobs, st, count, [&](std::size_t l, std::span<const double>, std::span<const double> v) {
      std::copy(v.begin(), v.end(), out.begin() + static_cast<std::ptrdiff_t>((first + l) * count + filled[l]));
      filled[l] += v.size();
    });
  });
  return out;
}

PointProcessResult exceedance_experiment(const PointProcessOptions& o) {
  o.observable.validate();
  if (o.observable.poles.size() != 1) throw InvalidInput("exceedance_experiment: one pole expected");
  const LsvMap map(o.gamma);
  PointProcessResult res;
  res.pilot = induced_pilot(map, o.observable, o.pilot_returns, o.pilot_radius, o.seed, o.threads);
  res.b_n = induced_bn(o.observable, res.pilot.density, static_cast<double>(o.n));
  const auto kobs = to_kernel(o.observable);
  const std::size_t levels = o.marks.size();
  res.counts.assign(o.replicas, 0.0);
  std::vector<double> level_counts(o.replicas * levels, 0.0);
  const std::size_t groups = (o.replicas + kGroup - 1) / kGroup;
  const auto n = static_cast<double>(o.n);
  parallel_for(groups, o.threads, [&](std::size_t g) {
    const std::size_t first = g * kGroup;
    const std::size_t m = std::min(kGroup, o.replicas - first);
    std::vector<double> st(m);
    induced_batch(map, o.seed, streams::induced_replica, first, 16, st);
    std::vector<std::uint64_t> step(m, 0);
    stream_induced(map, kobs, st, o.n, [&](std::size_t l, std::span<const double>, std::span<const double> v) {
      const std::size_t r = first + l;
      const MarkedPoints pts = exceedance_process(v, res.b_n, o.threshold);
      res.counts[r] += static_cast<double>(pts.points.size());
      for (const MarkedPoint& p : pts.points) {
        for (std::size_t j = 0; j < levels; ++j) level_counts[r * levels + j] += p.mark > o.marks[j] ? 1.0 : 0.0;
        if (r == 0) res.first_replica.push_back({(static_cast<double>(step[l]) + p.time * static_cast<double>(v.size())) / n, p.mark});
      }
      step[l] += v.size();
    });
  });
  res.dispersion = poisson_dispersion(res.counts, o.seed);
  res.mean_counts.assign(levels, 0.0);
  for (std::size_t r = 0; r < o.replicas; ++r)
    for (std::size_t j = 0; j < levels; ++j) res.mean_counts[j] += level_counts[r * levels + j];
  std::vector<double> lx, ly;
  for (std::size_t j = 0; j < levels; ++j) {
    res.mean_counts[j] /= static_cast<double>(o.replicas);
    if (res.mean_counts[j] > 0.0) {
      lx.push_back(std::log(o.marks[j]));
      ly.push_back(std::log(res.mean_counts[j]));
    }
  }
  if (lx.size() < 2) throw NumericalFailure("exceedance_experiment: too few exceedances for an intensity fit");
  res.intensity = ols(lx, ly);
  return res;
}

SmallValuesSweep small_values_sweep(const SmallValuesSweepOptions& o) {
  o.observable.validate();
  if (o.eps.empty()) throw InvalidInput("small_values_sweep: empty eps grid");
  const LsvMap map(o.gamma);
  SmallValuesSweep res;
  res.eps = o.eps;
  std::sort(res.eps.begin(), res.eps.end(), std::greater<>());
  res.pilot = induced_pilot(map, o.observable, o.pilot_returns, o.pilot_radius, o.seed, o.threads);
  const auto n = static_cast<double>(o.n);
  res.b_n = induced_bn(o.observable, res.pilot.density, n);

  const std::vector<double> values =
      induced_values(map, o.observable, o.orbits, o.orbit_length, o.seed, 0, 16, o.threads);
  std::vector<std::span<const double>> orbits;
  for (std::size_t i = 0; i < o.orbits; ++i) orbits.emplace_back(values.data() + i * o.orbit_length, o.orbit_length);

  std::vector<double> control(o.control_length);
  Rng rng = make_rng(o.seed, streams::synthetic, 0);
  for (double& v : control) v = std::pow(uniform_open01(rng), -1.0 / o.observable.alpha);
  const std::span<const double> control_orbit[1] = {control};

  auto k_for = [&](std::span<const std::span<const double>> parts, double b_n) {
    if (o.k > 0.0) return o.k;
    const double theta = crude_decay_rate(parts, res.eps.front() * b_n);
    return 8.0 / std::fabs(std::log(theta));
  };
  SmallValuesOptions sys_opt;
  sys_opt.b_n = res.b_n;
  sys_opt.k = k_for(orbits, res.b_n);
  SmallValuesOptions ctl_opt;
  ctl_opt.b_n = std::pow(n, 1.0 / o.observable.alpha);
  ctl_opt.k = k_for(control_orbit, ctl_opt.b_n);
  for (double e : res.eps) {
    res.system.push_back(small_values_functional(orbits, o.observable.alpha, e, n, sys_opt));
    res.control.push_back(small_values_functional(control_orbit, o.observable.alpha, e, n, ctl_opt));
  }
  res.non_increasing = true;
  for (std::size_t i = 1; i < res.system.size(); ++i)
    res.non_increasing = res.non_increasing && res.system[i].estimate <= res.system[i - 1].estimate;
  for (const SmallValues& c : res.control) res.control_max = std::max(res.control_max, c.estimate);
  return res;
}

MaxSumResult max_sum_experiment(const MaxSumOptions& o) {
  o.observable.validate();
  if (o.grid.size() < 2 || !std::is_sorted(o.grid.begin(), o.grid.end()))
    throw InvalidInput("max_sum_experiment: need an increasing grid");
  if (!(o.observable.alpha > 1.0 && o.eps >= 0.0)) throw InvalidInput("max_sum_experiment: alpha in (1,2), eps >= 0");
  const LsvMap map(o.gamma);
  MaxSumResult res;
  res.grid = o.grid;
  res.pilot = induced_pilot(map, o.observable, o.pilot_returns, 1e-3, o.seed, o.threads);
  const double center = res.pilot.mean;
  const auto kobs = to_kernel(o.observable);
  const std::size_t k = o.grid.size();
  const double alpha = o.observable.alpha;
  std::vector<double> sys(o.replicas * k), ctl(o.replicas * k);
  const std::size_t groups = (o.replicas + kGroup - 1) / kGroup;
  parallel_for(groups, o.threads, [&](std::size_t g) {
    const std::size_t first = g * kGroup;
    const std::size_t m = std::min(kGroup, o.replicas - first);
    std::vector<double> st(m);
    induced_batch(map, o.seed, streams::induced_replica, first, 16, st);
    std::vector<double> sum(m, 0.0), best(m, 0.0);
    std::vector<std::uint64_t> step(m, 0);
    std::vector<std::size_t> next(m, 0);
    stream_induced(map, kobs, st, o.grid.back(), [&](std::size_t l, std::span<const double>, std::span<const double> v) {
      for (double x : v) {
        sum[l] += x - center;
        best[l] = std::max(best[l], std::fabs(sum[l]));
        ++step[l];
        if (next[l] < k && step[l] == o.grid[next[l]]) {
          const double nn = static_cast<double>(step[l]);
          sys[(first + l) * k + next[l]] = best[l] * std::pow(nn, -(1.0 / alpha + o.eps));
          ++next[l];
        }
      }
    });
    for (std::size_t l = 0; l < m; ++l) {
      Rng rng = make_rng(o.seed, streams::synthetic, 1 + first + l);
      double s = 0.0, b = 0.0;
      std::size_t nx = 0;
      for (std::uint64_t j = 1; nx < k; ++j) {
        s += sample_stable(alpha, 0.0, rng);
        b = std::max(b, std::fabs(s));
        if (j == o.grid[nx]) ctl[(first + l) * k + nx++] = b * std::pow(static_cast<double>(j), -1.0 / alpha);
      }
    }
  });
  std::vector<double> col(o.replicas), lx, ly;
  for (std::size_t j = 0; j < k; ++j) {
    for (std::size_t r = 0; r < o.replicas; ++r) col[r] = sys[r * k + j];
    res.system_median.push_back(median(col));
    for (std::size_t r = 0; r < o.replicas; ++r) col[r] = ctl[r * k + j];
    res.control_median.push_back(median(col));
    lx.push_back(std::log(static_cast<double>(o.grid[j])));
    ly.push_back(std::log(res.control_median.back()));
  }
  res.system_decreasing = true;
  for (std::size_t j = 1; j < k; ++j)
    res.system_decreasing = res.system_decreasing && res.system_median[j] < res.system_median[j - 1];
  res.control_slope = ols(lx, ly);
  res.control_flat = res.control_slope.slope >= -0.03;
  return res;
}

bool GeometryCheck::passed() const {
  return gamma_max_exact && max_speed_error <= 1e-12 && max_reversal_error <= 1e-9 && chi2 <= chi2_critical;
}

GeometryCheck billiard_geometry_check(const BilliardTable& table, std::uint64_t samples, std::uint64_t seed,
                                      unsigned threads, int r_bins, int theta_bins) {
  if (r_bins < 1 || theta_bins < 1) throw InvalidInput("billiard_geometry_check: bad binning");
  constexpr std::size_t kTasks = 64;
  const std::uint64_t per = (samples + kTasks - 1) / kTasks;
  const std::size_t cells = static_cast<std::size_t>(r_bins) * static_cast<std::size_t>(theta_bins);
  const double period = table.total_length();
  std::vector<std::vector<double>> hist(kTasks, std::vector<double>(cells, 0.0));
  std::vector<double> speed(kTasks, 0.0), reversal(kTasks, 0.0);
  std::vector<std::uint64_t> aborted(kTasks, 0);
  parallel_for(kTasks, threads, [&](std::size_t t) {
    Rng rng = make_rng(seed, streams::diagnostic, t);
    for (std::uint64_t i = 0; i < per; ++i) {
      const CollisionState s = sinetheta_sample(table, rng);
      try {
        const CollisionState s1 = collide(table, s);
        const Vec2 v = velocity(table, s1);
        speed[t] = std::max(speed[t], std::fabs(std::sqrt(dot(v, v)) - 1.0));
        const int rb = std::min(r_bins - 1, static_cast<int>(s1.r / period * r_bins));
        const double u = 0.5 * (1.0 - std::cos(s1.theta));
        const int tb = std::min(theta_bins - 1, static_cast<int>(u * theta_bins));
        hist[t][static_cast<std::size_t>(rb) * static_cast<std::size_t>(theta_bins) + static_cast<std::size_t>(tb)] += 1.0;
        const CollisionState back = flip(collide(table, flip(s1)));
        reversal[t] = std::max(reversal[t], phase_distance(back, s, period));
      } catch (const OrbitAborted&) {
        ++aborted[t];
      }
    }
  });
  GeometryCheck c;
  c.gamma_max = table.gamma_max();
  const double beta = table.beta_max();
  c.gamma_max_exact = c.gamma_max == (beta - 1.0) / beta;
  std::vector<double> total(cells, 0.0);
  for (std::size_t t = 0; t < kTasks; ++t) {
    c.max_speed_error = std::max(c.max_speed_error, speed[t]);
    c.max_reversal_error = std::max(c.max_reversal_error, reversal[t]);
    c.aborted += aborted[t];
    for (std::size_t j = 0; j < cells; ++j) total[j] += hist[t][j];
  }
  c.samples = per * kTasks;
  double used = 0.0;
  for (double h : total) used += h;
  const double expected = used / static_cast<double>(cells);
  c.theta_histogram.assign(static_cast<std::size_t>(theta_bins), 0.0);
  for (std::size_t j = 0; j < cells; ++j) {
    c.chi2 += (total[j] - expected) * (total[j] - expected) / expected;
    c.theta_histogram[j % static_cast<std::size_t>(theta_bins)] += total[j];
  }
  c.dof = cells - 1;
  c.chi2_critical = boost::math::quantile(boost::math::chi_squared(static_cast<double>(c.dof)), 0.99);
  return c;
}

}  // namespace stablelab::harness
