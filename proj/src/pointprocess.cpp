#include "stablelab/pointprocess.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "stablelab/error.hpp"
#include "stablelab/kernels/kernels.hpp"
#include "stablelab/rng.hpp"
#include "stablelab/stats.hpp"

namespace stablelab {

MarkedPoints exceedance_process(std::span<const double> values, double b_n, double threshold) {
  if (!(b_n > 0.0)) throw InvalidInput("exceedance_process: b_n must be positive");
  MarkedPoints out;
  out.n = values.size();
  out.threshold = threshold;
  const double n = static_cast<double>(values.size());
  for (std::size_t j = 0; j < values.size(); ++j) {
    const double mark = values[j] / b_n;
    if (mark >= threshold) out.points.push_back({static_cast<double>(j + 1) / n, mark});
  }
  return out;
}

namespace {

std::pair<double, double> mean_variance(std::span<const double> x) {
  double m = 0.0;
  for (double v : x) m += v;
  m /= static_cast<double>(x.size());
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return {m, s / static_cast<double>(x.size() - 1)};
}

}  // namespace

Dispersion poisson_dispersion(std::span<const double> counts, std::uint64_t seed, int resamples,
                              double level) {
  if (counts.size() < 200) throw InvalidInput("poisson_dispersion needs at least 200 replicas");
  if (resamples < 10 || !(level > 0.0 && level < 1.0))
    throw InvalidInput("poisson_dispersion: bad bootstrap settings");
  Dispersion d;
  std::tie(d.mean, d.variance) = mean_variance(counts);
  if (!(d.mean > 0.0)) throw InvalidInput("poisson_dispersion: zero mean");
  d.ratio = d.variance / d.mean;
  Rng rng = make_rng(seed, streams::bootstrap, 0);
  std::vector<double> sample(counts.size());
  std::vector<double> ratios;
  ratios.reserve(static_cast<std::size_t>(resamples));
  for (int b = 0; b < resamples; ++b) {
    for (double& v : sample) v = counts[uniform_index(rng, counts.size())];
    const auto [m, var] = mean_variance(sample);
    ratios.push_back(m > 0.0 ? var / m : 0.0);
  }
  std::sort(ratios.begin(), ratios.end());
  d.ci_low = quantile_sorted(ratios, 0.5 * (1.0 - level));
  d.ci_high = quantile_sorted(ratios, 1.0 - 0.5 * (1.0 - level));
  return d;
}

LagAccumulator::LagAccumulator(std::size_t max_lag) : max_lag_(max_lag), dots_(max_lag, 0.0) {
  if (max_lag < 1) throw InvalidInput("LagAccumulator needs max_lag >= 1");
}

void LagAccumulator::push(std::span<const double> chunk) {
  for (double v : chunk) {
    sum_ += v;
    sum_sq_ += v * v;
  }
  for (std::size_t i = 0; i < chunk.size() && head_.size() < max_lag_; ++i) head_.push_back(chunk[i]);
  buffer_.assign(carry_.begin(), carry_.end());
  buffer_.insert(buffer_.end(), chunk.begin(), chunk.end());
  if (buffer_.size() > max_lag_) {
    const std::size_t usable = buffer_.size() - max_lag_;
    kernels::lagged_dot(buffer_.data(), usable, dots_);
    carry_.assign(buffer_.begin() + static_cast<std::ptrdiff_t>(usable), buffer_.end());
  } else {
    carry_.swap(buffer_);
  }
  count_ += chunk.size();
}

std::vector<double> LagAccumulator::lagged_sums() const {
  std::vector<double> out = dots_;
  for (std::size_t i = 0; i < carry_.size(); ++i) {
    for (std::size_t j = 1; j <= max_lag_ && i + j < carry_.size(); ++j) out[j - 1] += carry_[i] * carry_[i + j];
  }
  return out;
}

double LagAccumulator::head(std::size_t j) const {
  double s = 0.0;
  for (std::size_t i = 0; i < std::min(j, head_.size()); ++i) s += head_[i];
  return s;
}

double LagAccumulator::tail(std::size_t j) const {
  double s = 0.0;
  const std::size_t m = std::min(j, carry_.size());
  for (std::size_t i = carry_.size() - m; i < carry_.size(); ++i) s += carry_[i];
  return s;
}

std::vector<double> pooled_autocovariances(std::span<const LagAccumulator> parts) {
  if (parts.empty()) throw InvalidInput("pooled_autocovariances: no sequences");
  std::size_t lags = parts.front().max_lag();
  double total = 0.0;
  double count = 0.0;
  for (const LagAccumulator& p : parts) {
    lags = std::min(lags, p.max_lag());
    total += p.sum();
    count += static_cast<double>(p.count());
  }
  const double m = total / count;
  std::vector<double> out(lags + 1, 0.0);
  double c0 = 0.0;
  for (const LagAccumulator& p : parts) {
    const double L = static_cast<double>(p.count());
    c0 += p.sum_sq() - 2.0 * m * p.sum() + L * m * m;
  }
  out[0] = c0 / count;
  std::vector<std::vector<double>> dots;
  for (const LagAccumulator& p : parts) dots.push_back(p.lagged_sums());
  for (std::size_t j = 1; j <= lags; ++j) {
    double num = 0.0;
    double pairs = 0.0;
    for (std::size_t o = 0; o < parts.size(); ++o) {
      const LagAccumulator& p = parts[o];
      if (p.count() <= j) throw InvalidInput("pooled_autocovariances: sequence shorter than the lag");
      const double lj = static_cast<double>(p.count() - j);
      num += dots[o][j - 1] - m * (2.0 * p.sum() - p.head(j) - p.tail(j)) + lj * m * m;
      pairs += lj;
    }
    out[j] = num / pairs;
  }
  return out;
}

double small_values_truncation(double alpha, double eps, double n, const SmallValuesOptions& options) {
  if (!(alpha > 1.0 && alpha < 2.0)) throw InvalidInput("small_values_functional needs alpha in (1,2)");
  if (!(eps > 0.0)) throw InvalidInput("small_values_functional needs eps > 0");
  if (!(n >= 1.0)) throw InvalidInput("small_values_functional needs n >= 1");
  const double b = std::isnan(options.b_n) ? std::pow(n, 1.0 / alpha) : options.b_n;
  return std::isinf(eps) ? eps : eps * b;
}

namespace {

inline double truncated(double v, double t) { return std::fabs(v) <= t ? v : 0.0; }

}  // namespace

double crude_decay_rate(std::span<const std::span<const double>> orbits, double truncation) {
  double total = 0.0;
  double count = 0.0;
  for (auto o : orbits) {
    for (double v : o) total += truncated(v, truncation);
    count += static_cast<double>(o.size());
  }
  const double m = total / count;
  double c0 = 0.0, c1 = 0.0, pairs = 0.0;
  for (auto o : orbits) {
    for (std::size_t i = 0; i < o.size(); ++i) {
      const double a = truncated(o[i], truncation) - m;
      c0 += a * a;
      if (i + 1 < o.size()) c1 += a * (truncated(o[i + 1], truncation) - m);
    }
    pairs += static_cast<double>(o.size() > 0 ? o.size() - 1 : 0);
  }
  double rho = (c0 > 0.0 && pairs > 0.0) ? (c1 / pairs) / (c0 / count) : 0.0;
  if (!std::isfinite(rho)) rho = 0.0;
  return std::clamp(std::fabs(rho), 0.05, 0.95);
}

std::size_t lag_horizon(double theta, double n, double k) {
  if (std::isnan(k)) k = 8.0 / std::fabs(std::log(theta));
  const double lags = std::floor(k * std::log(n));
  return static_cast<std::size_t>(std::max(1.0, lags));
}

SmallValues small_values_from(std::span<const LagAccumulator> parts, double n, double b_n,
                              double truncation, double theta, double k) {
  SmallValues out;
  out.b_n = b_n;
  out.truncation = truncation;
  out.theta_hat = theta;
  out.k = k;
  const std::vector<double> cov = pooled_autocovariances(parts);
  out.lags = cov.size() - 1;
  out.covariances.assign(cov.begin() + 1, cov.end());
  double s = 0.0;
  for (double c : out.covariances) s += std::max(0.0, c);
  out.estimate = n / (b_n * b_n) * s;
  return out;
}

SmallValues small_values_functional(std::span<const std::span<const double>> orbits, double alpha,
                                    double eps, double n, const SmallValuesOptions& options) {
  if (orbits.empty()) throw InvalidInput("small_values_functional: no orbit");
  const double t = small_values_truncation(alpha, eps, n, options);
  const double b = std::isnan(options.b_n) ? std::pow(n, 1.0 / alpha) : options.b_n;
  const double theta = crude_decay_rate(orbits, t);
  const double k = std::isnan(options.k) ? 8.0 / std::fabs(std::log(theta)) : options.k;
  const std::size_t lags = lag_horizon(theta, n, k);
  std::vector<LagAccumulator> parts;
  std::vector<double> chunk;
  constexpr std::size_t kChunk = 1 << 16;
  for (auto o : orbits) {
    if (o.size() <= lags) throw InvalidInput("small_values_functional: orbit too short for the lag horizon");
    LagAccumulator acc(lags);
    for (std::size_t i = 0; i < o.size(); i += kChunk) {
      const std::size_t m = std::min(kChunk, o.size() - i);
      chunk.resize(m);
      for (std::size_t q = 0; q < m; ++q) chunk[q] = truncated(o[i + q], t);
      acc.push(chunk);
    }
    parts.push_back(std::move(acc));
  }
  return small_values_from(parts, n, b, t, theta, k);
}

SmallValues small_values_functional(std::span<const double> values, double alpha, double eps, double n,
                                    const SmallValuesOptions& options) {
  const std::span<const double> one[1] = {values};
  return small_values_functional(std::span<const std::span<const double>>(one, 1), alpha, eps, n, options);
}

double max_sum_diagnostic(std::span<const double> values, double alpha, double eps, double center) {
  if (!(alpha > 0.0 && alpha < 2.0)) throw InvalidInput("max_sum_diagnostic: alpha outside (0,2)");
  if (!(eps >= 0.0)) throw InvalidInput("max_sum_diagnostic: eps must be non-negative");
  if (values.empty()) return 0.0;
  double s = 0.0;
  double best = 0.0;
  for (double v : values) {
    s += v - center;
    best = std::max(best, std::fabs(s));
  }
  return best * std::pow(static_cast<double>(values.size()), -(1.0 / alpha + eps));
}

}  // namespace stablelab
