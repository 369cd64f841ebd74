#pragma once

// Stable-law reference sampler, tail-index and scaling-exponent estimators,
// distributional tests and the Karamata ratio suite.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "stablelab/rng.hpp"

namespace stablelab {

enum class StableParam {
  s0,  // continuous in alpha (Nolan's S0)
  s1,  // classical Chambers-Mallows-Stuck output (Nolan's S1)
};

/// One draw of the standard stable law S(alpha, skew; 1, 0).
double sample_stable(double alpha, double skew, Rng& rng, StableParam param = StableParam::s0);

struct HillResult {
  double alpha = 0.0;
  double h = 0.0;  // mean log excess, 1 / alpha
  std::size_t k = 0;
  bool degenerate = false;
};

inline constexpr std::size_t kMinHillK = 50;

std::size_t default_hill_k(std::size_t n);

/// Hill estimate from the k largest values. Throws InvalidInput for k < 50,
/// k >= n or a non-positive (k+1)-th order statistic. Constant tails are
/// returned with degenerate = true and alpha = +inf.
HillResult hill_tail_index(std::span<const double> samples, std::size_t k);

/// Hill estimates over a list of k (the k-stability plot).
std::vector<HillResult> hill_stability(std::span<const double> samples, std::span<const std::size_t> ks);

/// Sample quantile (linear interpolation between order statistics, R type 7).
double quantile(std::span<const double> samples, double q);
double quantile_sorted(std::span<const double> sorted, double q);
double median(std::span<const double> samples);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_std_error = 0.0;
  double r_squared = 0.0;
};

LinearFit ols(std::span<const double> x, std::span<const double> y);

struct SumEnsemble {
  std::vector<std::uint64_t> grid;
  std::vector<std::vector<double>> values;  // values[k][replica]
  std::string system;
  std::string observable;
  std::uint64_t seed = 0;

  std::size_t replicas() const { return values.empty() ? 0 : values.front().size(); }
  /// Equal row sizes, >= 4 strictly increasing geometric grid points.
  void validate() const;
};

struct ExponentFit {
  double theta_hat = 0.0;
  double std_error = 0.0;
  double r_squared = 0.0;
  std::vector<double> spreads;
};

/// Slope of log(Q(hi) - Q(lo)) of each row against log n.
ExponentFit scaling_exponent(const SumEnsemble& ensemble, double q_lo = 0.25, double q_hi = 0.75);
/// Standard error of theta_hat by resampling replicas (whole rows of the
/// ensemble jointly, since one orbit feeds every grid point).
double scaling_exponent_bootstrap_se(const SumEnsemble& ensemble, std::uint64_t seed, int resamples = 200,
                                     double q_lo = 0.25, double q_hi = 0.75);

/// Two-sample Kolmogorov-Smirnov statistic sup |F_a - F_b|.
double ks_two_sample(std::span<const double> a, std::span<const double> b);

/// Asymptotic 1% critical value 1.628 sqrt((n + m) / (n m)).
double ks_critical_1pct(std::size_t n, std::size_t m);

struct SelfSimilarity {
  double statistic = 0.0;     // max of the two parts
  double scaling_part = 0.0;  // KS(S_2n, 2^{1/a} S_n), both median-centred
  double convolution_part = 0.0;  // KS(X + X', 2^{1/a} X), X, X' shuffled copies of S_n
  double critical = 0.0;
  bool passed = false;
};

SelfSimilarity self_similarity_check(std::span<const double> samples_n,
                                     std::span<const double> samples_2n, double alpha,
                                     std::uint64_t seed);

// Karamata suite ----------------------------------------------------------

using TailSink = std::function<void(double value, double weight)>;
/// Streams a (possibly weighted) sample of phi: calls sink(value, weight) with
/// weights summing to 1.
using TailStream = std::function<void(const TailSink&)>;

/// Exact Pareto P(X > x) = x^{-alpha} (x >= 1) by stratified sampling of the
/// survival level: `strata` strata with geometric edges from 1 down to
/// min_level, one draw each, plus the remainder (0, min_level).
TailStream pareto_stratified(double alpha, std::uint64_t strata, std::uint64_t seed, double min_level = 1e-250);

/// Equal weights over the given values.
TailStream empirical_tail(std::span<const double> values);

struct KaramataRow {
  char item = 'a';
  double eps = 0.0;
  double n = 0.0;
  double lhs = 0.0;
  double rhs = 0.0;
  double ratio = 0.0;
  double residual = 0.0;
  std::uint64_t exceedances = 0;
  bool insufficient = false;
};

struct KaramataOptions {
  /// b_n = b_scale * n^{1/alpha}.
  double b_scale = 1.0;
  /// Positive-tail fraction used in item (e); NaN estimates it per threshold.
  double p_positive = 1.0;
  std::uint64_t min_exceedances = 100;
};

/// LHS/RHS ratios of items (a), (c) and (d) (alpha < 1) or (e) (alpha > 1).
std::vector<KaramataRow> karamata_residuals(const TailStream& stream, double alpha,
                                            std::span<const double> eps_grid,
                                            std::span<const double> n_grid,
                                            const KaramataOptions& options = {});

}  // namespace stablelab
