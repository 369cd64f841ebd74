#include "stablelab/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "stablelab/error.hpp"
#include "stablelab/kernels/kernels.hpp"

namespace stablelab {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

double sample_stable(double alpha, double skew, Rng& rng, StableParam param) {
  if (!(alpha > 0.0 && alpha <= 2.0)) throw InvalidInput("sample_stable: alpha outside (0,2]");
  if (!(skew >= -1.0 && skew <= 1.0)) throw InvalidInput("sample_stable: skew outside [-1,1]");
  const double v = kPi * (uniform_open01(rng) - 0.5);
  const double w = -std::log(uniform_open01(rng));
  if (alpha == 1.0) {
    const double a = 0.5 * kPi + skew * v;
    return (2.0 / kPi) * (a * std::tan(v) - skew * std::log(0.5 * kPi * w * std::cos(v) / a));
  }
  const double t = skew * std::tan(0.5 * kPi * alpha);
  const double b = std::atan(t) / alpha;
  const double s = std::pow(1.0 + t * t, 0.5 / alpha);
  const double x = s * std::sin(alpha * (v + b)) / std::pow(std::cos(v), 1.0 / alpha) *
                   std::pow(std::cos(v - alpha * (v + b)) / w, (1.0 - alpha) / alpha);
  return param == StableParam::s0 ? x - t : x;
}

std::size_t default_hill_k(std::size_t n) {
  return static_cast<std::size_t>(std::floor(std::pow(static_cast<double>(n), 0.6)));
}

namespace {

HillResult hill_on_partitioned(std::span<const double> top, double threshold) {
  HillResult out;
  out.k = top.size();
  out.h = kernels::sum_log_ratio(top, threshold) / static_cast<double>(top.size());
  if (out.h <= 0.0) {
    out.degenerate = true;
    out.alpha = std::numeric_limits<double>::infinity();
  } else {
    out.alpha = 1.0 / out.h;
  }
  return out;
}

void check_hill_k(std::size_t n, std::size_t k) {
  if (k < kMinHillK) throw InvalidInput("hill_tail_index: k < 50 is unstable");
  if (k >= n) throw InvalidInput("hill_tail_index: k must be below the sample count");
}

}  // namespace

HillResult hill_tail_index(std::span<const double> samples, std::size_t k) {
  check_hill_k(samples.size(), k);
  std::vector<double> v(samples.begin(), samples.end());
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end(), std::greater<>());
  const double threshold = v[k];
  if (!(threshold > 0.0)) throw InvalidInput("hill_tail_index: samples must be positive");
  return hill_on_partitioned(std::span<const double>(v.data(), k), threshold);
}

std::vector<HillResult> hill_stability(std::span<const double> samples, std::span<const std::size_t> ks) {
  std::vector<double> v(samples.begin(), samples.end());
  std::sort(v.begin(), v.end(), std::greater<>());
  std::vector<HillResult> out;
  out.reserve(ks.size());
  for (std::size_t k : ks) {
    check_hill_k(v.size(), k);
    if (!(v[k] > 0.0)) throw InvalidInput("hill_tail_index: samples must be positive");
    out.push_back(hill_on_partitioned(std::span<const double>(v.data(), k), v[k]));
  }
  return out;
}

double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw InvalidInput("quantile of an empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw InvalidInput("quantile level outside [0,1]");
  const double h = static_cast<double>(sorted.size() - 1) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

double quantile(std::span<const double> samples, double q) {
  std::vector<double> v(samples.begin(), samples.end());
  std::sort(v.begin(), v.end());
  return quantile_sorted(v, q);
}

double median(std::span<const double> samples) { return quantile(samples, 0.5); }

LinearFit ols(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  if (n != y.size() || n < 2) throw InvalidInput("ols: need matching samples of size >= 2");
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) throw InvalidInput("ols: constant regressor");
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double sse = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - (f.intercept + f.slope * x[i]);
    sse += r * r;
  }
  f.slope_std_error = n > 2 ? std::sqrt(sse / static_cast<double>(n - 2) / sxx) : 0.0;
  f.r_squared = syy > 0.0 ? 1.0 - sse / syy : 1.0;
  return f;
}

void SumEnsemble::validate() const {
  if (grid.size() < 4) throw InvalidInput("ensemble grid needs at least 4 points");
  if (values.size() != grid.size()) throw InvalidInput("ensemble rows do not match the grid");
  for (std::size_t k = 0; k < grid.size(); ++k) {
    if (values[k].size() != values.front().size()) throw InvalidInput("ensemble rows differ in size");
    if (k > 0 && grid[k] <= grid[k - 1]) throw InvalidInput("ensemble grid must be strictly increasing");
  }
  if (values.front().empty()) throw InvalidInput("ensemble has no replicas");
  const double ratio = static_cast<double>(grid[1]) / static_cast<double>(grid[0]);
  for (std::size_t k = 2; k < grid.size(); ++k) {
    const double r = static_cast<double>(grid[k]) / static_cast<double>(grid[k - 1]);
    if (std::fabs(r - ratio) > 1e-9 * ratio) throw InvalidInput("ensemble grid must be geometric");
  }
}

ExponentFit scaling_exponent(const SumEnsemble& ensemble, double q_lo, double q_hi) {
  ensemble.validate();
  if (!(q_lo < q_hi)) throw InvalidInput("scaling_exponent: quantile pair must be increasing");
  ExponentFit fit;
  std::vector<double> lx, ly;
  for (std::size_t k = 0; k < ensemble.grid.size(); ++k) {
    std::vector<double> row = ensemble.values[k];
    std::sort(row.begin(), row.end());
    const double spread = quantile_sorted(row, q_hi) - quantile_sorted(row, q_lo);
    if (!(spread > 0.0) || !std::isfinite(spread))
      throw InvalidInput("scaling_exponent: non-positive interquantile spread");
    fit.spreads.push_back(spread);
    lx.push_back(std::log(static_cast<double>(ensemble.grid[k])));
    ly.push_back(std::log(spread));
  }
  const LinearFit f = ols(lx, ly);
  fit.theta_hat = f.slope;
  fit.std_error = f.slope_std_error;
  fit.r_squared = f.r_squared;
  return fit;
}

double scaling_exponent_bootstrap_se(const SumEnsemble& ensemble, std::uint64_t seed, int resamples,
                                     double q_lo, double q_hi) {
  ensemble.validate();
  if (resamples < 2) throw InvalidInput("scaling_exponent_bootstrap_se: need at least 2 resamples");
  const std::size_t m = ensemble.replicas();
  std::vector<double> lx;
  for (std::uint64_t n : ensemble.grid) lx.push_back(std::log(static_cast<double>(n)));
  Rng rng = make_rng(seed, streams::bootstrap, 0);
  std::vector<double> thetas;
  std::vector<std::size_t> pick(m);
  std::vector<double> row(m);
  std::vector<double> ly(ensemble.grid.size());
  for (int b = 0; b < resamples; ++b) {
    for (auto& i : pick) i = static_cast<std::size_t>(uniform_index(rng, m));
    bool ok = true;
    for (std::size_t k = 0; k < ensemble.grid.size(); ++k) {
      for (std::size_t i = 0; i < m; ++i) row[i] = ensemble.values[k][pick[i]];
      std::sort(row.begin(), row.end());
      const double spread = quantile_sorted(row, q_hi) - quantile_sorted(row, q_lo);
      if (!(spread > 0.0) || !std::isfinite(spread)) {
        ok = false;
        break;
      }
      ly[k] = std::log(spread);
    }
    if (ok) thetas.push_back(ols(lx, ly).slope);
  }
  if (thetas.size() < 2) throw InvalidInput("scaling_exponent_bootstrap_se: degenerate resamples");
  double mean = 0.0;
  for (double t : thetas) mean += t;
  mean /= static_cast<double>(thetas.size());
  double ss = 0.0;
  for (double t : thetas) ss += (t - mean) * (t - mean);
  return std::sqrt(ss / static_cast<double>(thetas.size() - 1));
}

double ks_two_sample(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw InvalidInput("ks_two_sample: empty sample");
  std::vector<double> x(a.begin(), a.end());
  std::vector<double> y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const double n = static_cast<double>(x.size());
  const double m = static_cast<double>(y.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < x.size() && j < y.size()) {
    const double v = std::min(x[i], y[j]);
    while (i < x.size() && x[i] == v) ++i;
    while (j < y.size() && y[j] == v) ++j;
    d = std::max(d, std::fabs(static_cast<double>(i) / n - static_cast<double>(j) / m));
  }
  return d;
}

double ks_critical_1pct(std::size_t n, std::size_t m) {
  const double c = std::sqrt(-0.5 * std::log(0.005));
  const double dn = static_cast<double>(n);
  const double dm = static_cast<double>(m);
  return c * std::sqrt((dn + dm) / (dn * dm));
}

SelfSimilarity self_similarity_check(std::span<const double> samples_n,
                                     std::span<const double> samples_2n, double alpha,
                                     std::uint64_t seed) {
  if (samples_n.size() != samples_2n.size() || samples_n.empty())
    throw InvalidInput("self_similarity_check: sample sizes must match");
  if (!(alpha > 0.0 && alpha <= 2.0)) throw InvalidInput("self_similarity_check: alpha outside (0,2]");
  const std::size_t n = samples_n.size();
  const double s = std::pow(2.0, 1.0 / alpha);
  const double med_n = median(samples_n);
  const double med_2n = median(samples_2n);
  std::vector<double> a(n), b(n), c(n);
  for (std::size_t i = 0; i < n; ++i) {
    a[i] = samples_2n[i] - med_2n;
    b[i] = s * (samples_n[i] - med_n);
  }
  Rng r1 = make_rng(seed, streams::shuffle, 0);
  Rng r2 = make_rng(seed, streams::shuffle, 1);
  const auto p1 = random_permutation(n, r1);
  const auto p2 = random_permutation(n, r2);
  for (std::size_t i = 0; i < n; ++i) c[i] = samples_n[p1[i]] + samples_n[p2[i]];
  const double med_c = median(c);
  for (double& v : c) v -= med_c;
  SelfSimilarity out;
  out.scaling_part = ks_two_sample(a, b);
  out.convolution_part = ks_two_sample(c, b);
  out.statistic = std::max(out.scaling_part, out.convolution_part);
  out.critical = ks_critical_1pct(n, n);
  out.passed = out.statistic < out.critical;
  return out;
}

TailStream pareto_stratified(double alpha, std::uint64_t strata, std::uint64_t seed, double min_level) {
  if (!(alpha > 0.0)) throw InvalidInput("pareto_stratified: alpha must be positive");
  if (strata < 2 || !(min_level > 0.0 && min_level < 1.0))
    throw InvalidInput("pareto_stratified: bad stratification");
  return [=](const TailSink& sink) {
    Rng rng = make_rng(seed, streams::synthetic, 0);
    constexpr std::size_t kBlock = 4096;
    std::vector<double> level(kBlock), weight(kBlock), value(kBlock);
    const double step = std::log(min_level) / static_cast<double>(strata);
    const double e = -1.0 / alpha;
    std::uint64_t i = 0;
    while (i < strata) {
      const std::size_t count = static_cast<std::size_t>(std::min<std::uint64_t>(kBlock, strata - i));
      for (std::size_t j = 0; j < count; ++j) {
        const double hi = std::exp(step * static_cast<double>(i + j));
        const double lo = std::exp(step * static_cast<double>(i + j + 1));
        weight[j] = hi - lo;
        level[j] = lo + weight[j] * uniform_open01(rng);
      }
      kernels::pow_batch(std::span<const double>(level.data(), count), e,
                         std::span<double>(value.data(), count));
      for (std::size_t j = 0; j < count; ++j) sink(value[j], weight[j]);
      i += count;
    }
    sink(std::pow(min_level * uniform_open01(rng), e), min_level);
  };
}

TailStream empirical_tail(std::span<const double> values) {
  return [values](const TailSink& sink) {
    const double w = 1.0 / static_cast<double>(values.size());
    for (double v : values) sink(v, w);
  };
}

std::vector<KaramataRow> karamata_residuals(const TailStream& stream, double alpha,
                                            std::span<const double> eps_grid,
                                            std::span<const double> n_grid,
                                            const KaramataOptions& options) {
  if (!(alpha > 0.0 && alpha < 2.0) || alpha == 1.0)
    throw InvalidInput("karamata_residuals: alpha must lie in (0,1) U (1,2)");
  struct Acc {
    double n, eps, bn, t;
    double p_above = 0.0, p_pos = 0.0, first_above = 0.0, second_below = 0.0, abs_below = 0.0;
    std::uint64_t count = 0;
  };
  std::vector<Acc> acc;
  for (double n : n_grid) {
    for (double eps : eps_grid) {
      if (!(eps > 0.0) || !(n >= 1.0)) throw InvalidInput("karamata_residuals: bad grid value");
      const double bn = options.b_scale * std::pow(n, 1.0 / alpha);
      acc.push_back({n, eps, bn, eps * bn});
    }
  }
  stream([&](double v, double w) {
    const double a = std::fabs(v);
    for (Acc& c : acc) {
      if (a > c.t) {
        c.p_above += w;
        if (v > 0.0) c.p_pos += w;
        c.first_above += w * v;
        ++c.count;
      } else {
        c.second_below += w * v * v;
        c.abs_below += w * a;
      }
    }
  });
  std::vector<KaramataRow> rows;
  auto push = [&](const Acc& c, char item, double lhs, double rhs) {
    KaramataRow r;
    r.item = item;
    r.eps = c.eps;
    r.n = c.n;
    r.lhs = lhs;
    r.rhs = rhs;
    r.ratio = rhs != 0.0 ? lhs / rhs : std::numeric_limits<double>::quiet_NaN();
    r.residual = std::fabs(r.ratio - 1.0);
    r.exceedances = c.count;
    r.insufficient = c.count < options.min_exceedances;
    rows.push_back(r);
  };
  for (const Acc& c : acc) {
    push(c, 'a', c.n * c.p_above, std::pow(c.eps, -alpha));
    push(c, 'c', c.second_below, alpha / (2.0 - alpha) * c.t * c.t * c.p_above);
    if (alpha < 1.0) {
      push(c, 'd', c.abs_below, alpha / (1.0 - alpha) * c.t * c.p_above);
    } else {
      const double p = std::isnan(options.p_positive) ? (c.p_above > 0.0 ? c.p_pos / c.p_above : 0.0)
                                                      : options.p_positive;
      push(c, 'e', c.n / c.bn * c.first_above,
           std::pow(c.eps, 1.0 - alpha) * (2.0 * p - 1.0) * alpha / (alpha - 1.0));
    }
  }
  return rows;
}

}  // namespace stablelab
