#pragma once

// Exceedance point processes, Poisson dispersion, the vanishing small values
// functional and the max-sum diagnostic.

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

namespace stablelab {

struct MarkedPoint {
  double time = 0.0;
  double mark = 0.0;
};

struct MarkedPoints {
  std::vector<MarkedPoint> points;
  std::uint64_t n = 0;
  double threshold = 0.0;
};

inline constexpr double kDefaultMarkThreshold = 0.25;

/// (j/n, v_j / b_n) for j = 1..n with mark >= threshold.
MarkedPoints exceedance_process(std::span<const double> values, double b_n,
                                double threshold = kDefaultMarkThreshold);

struct Dispersion {
  double mean = 0.0;
  double variance = 0.0;
  double ratio = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;

  bool contains_one() const { return ci_low <= 1.0 && 1.0 <= ci_high; }
};

/// Variance/mean ratio with a percentile bootstrap interval. Needs >= 200
/// replicas and a positive mean.
Dispersion poisson_dispersion(std::span<const double> counts, std::uint64_t seed,
                              int resamples = 2000, double level = 0.95);

/// Streaming lagged sums of one sequence: sum_i v_i v_{i+j} for j = 1..K,
/// plus the head and tail sums needed to centre them exactly at the end.
class LagAccumulator {
 public:
  explicit LagAccumulator(std::size_t max_lag);

  void push(std::span<const double> chunk);

  std::size_t max_lag() const { return max_lag_; }
  std::uint64_t count() const { return count_; }
  double sum() const { return sum_; }
  double sum_sq() const { return sum_sq_; }
  /// Uncentred sum over i + j < count of v_i v_{i+j}, j = 1..max_lag.
  std::vector<double> lagged_sums() const;
  /// Sum of the first j and of the last j values.
  double head(std::size_t j) const;
  double tail(std::size_t j) const;

 private:
  std::size_t max_lag_;
  std::uint64_t count_ = 0;
  double sum_ = 0.0;
  double sum_sq_ = 0.0;
  std::vector<double> dots_;
  std::vector<double> head_;
  std::vector<double> carry_;
  std::vector<double> buffer_;
};

/// Autocovariances at lags 0..K of several independent sequences centred by
/// their pooled mean. Entry j averages over the pairs available at lag j.
std::vector<double> pooled_autocovariances(std::span<const LagAccumulator> parts);

struct SmallValuesOptions {
  /// Lag horizon factor in floor(k log n). NaN selects 8 / |log theta| with
  /// theta the lag-1 autocorrelation clamped to [0.05, 0.95].
  double k = std::numeric_limits<double>::quiet_NaN();
  /// Scale b_n; NaN selects n^{1/alpha}.
  double b_n = std::numeric_limits<double>::quiet_NaN();
};

struct SmallValues {
  double estimate = 0.0;
  std::size_t lags = 0;
  double k = 0.0;
  double theta_hat = 0.0;
  double b_n = 0.0;
  double truncation = 0.0;
  std::vector<double> covariances;  // lags 1..K
};

/// Truncation level eps b_n (infinite for eps = +inf).
double small_values_truncation(double alpha, double eps, double n, const SmallValuesOptions& options);

/// Lag-1 autocorrelation of the truncated sequence, clamped to [0.05, 0.95].
double crude_decay_rate(std::span<const std::span<const double>> orbits, double truncation);

/// floor(k log n) with k = 8 / |log theta| unless given.
std::size_t lag_horizon(double theta, double n, double k = std::numeric_limits<double>::quiet_NaN());

/// (n / b_n^2) sum_{j=1}^{floor(k log n)} max(0, Cov_j) where Cov_j is the
/// empirical lag-j autocovariance of the truncation v 1_{|v| <= eps b_n},
/// centred by its pooled mean. eps = +inf disables the truncation. Several
/// independent orbits are pooled.
SmallValues small_values_functional(std::span<const std::span<const double>> orbits, double alpha,
                                    double eps, double n, const SmallValuesOptions& options = {});

SmallValues small_values_functional(std::span<const double> values, double alpha, double eps,
                                    double n, const SmallValuesOptions& options = {});

/// Finishes the functional from accumulators fed with truncated values.
SmallValues small_values_from(std::span<const LagAccumulator> parts, double n, double b_n,
                              double truncation, double theta, double k);

/// n^{-(1/alpha + eps)} max_{j <= n} |sum_{i <= j} (v_i - center)| with
/// n = values.size().
double max_sum_diagnostic(std::span<const double> values, double alpha, double eps, double center);

}  // namespace stablelab
