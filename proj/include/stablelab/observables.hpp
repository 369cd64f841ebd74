#pragma once

// Pole-type heavy-tailed observables phi = sum_i C_i d(., x_i)^{-D/alpha} + shift,
// their scaling/centering sequences, truncations and cusp integrals.

#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "stablelab/interval.hpp"
#include "stablelab/kernels/kernels.hpp"

namespace stablelab {

struct Pole {
  double x = 0.0;      // interval position, or billiard arclength r
  double theta = 0.0;  // billiard only
  double coefficient = 1.0;
};

struct ObservableSpec {
  std::vector<Pole> poles;
  double alpha = 1.5;
  int dimension = 1;
  double shift = 0.0;

  double pole_exponent() const { return dimension / alpha; }
  /// Throws InvalidInput on alpha outside (0,1) U (1,2), bad dimension or an
  /// empty pole list with zero shift and no explicit zero_ok.
  void validate(bool zero_ok = false) const;
};

/// Interval evaluation with metric |x - x'|. A pole hit returns +-inf.
double eval(const ObservableSpec& spec, double x);

/// Billiard evaluation with metric |r - r'| + |theta - theta'|, r taken on
/// the circle of circumference `period`.
double eval(const ObservableSpec& spec, double r, double theta, double period);

/// Circle distance between arclengths.
double arclength_distance(double r1, double r2, double period);

/// Kernel form of an interval observable. With core_radius > 0 the term
/// |x - x_i|^{-p} is replaced inside |x - x_i| <= core_radius by its local
/// mean core_radius^{-p} / (1 - p), which keeps Birkhoff averages of
/// integrable poles at finite variance.
kernels::IntervalObservable to_kernel(const ObservableSpec& spec, double core_radius = -1.0);

double scaling_bn(double n, double alpha);
double centering_cn(double n, double alpha, double mean_estimate);

/// phi 1_{|phi| <= threshold}, optionally recentred by `mean`.
struct Truncation {
  ObservableSpec spec;
  double threshold = 0.0;
  double mean = 0.0;

  double raw(double x) const;
  double centered(double x) const { return raw(x) - mean; }
  double apply(double value) const;
};

Truncation truncate(const ObservableSpec& spec, double threshold);

struct CuspIntegrals {
  double i_psi = 0.0;
  double i = 0.0;
  /// 1/4 int (|psi_+| + |psi_-|) sin^g, the scale against which i_psi = 0 is judged.
  double i_abs = 0.0;
};

using BoundaryValues = std::function<std::pair<double, double>(double theta)>;

/// I_psi = 1/4 int_0^pi (psi_+ + psi_-) sin^g and I = 1/2 int_0^pi sin^g by
/// tanh-sinh quadrature on the pieces between the given kinks of psi.
CuspIntegrals cusp_integrals(const BoundaryValues& values, double gamma_i,
                             std::span<const double> breakpoints = {}, double tolerance = 1e-10);

/// Limit of f(h) as h -> 0+ from samples h0, h0/2, h0/4, ... by Richardson
/// extrapolation assuming a power series in h.
double richardson_limit(const std::function<double(double)>& f, double h0, int levels = 6);

/// mu(d(., (r0, theta0))^{-p}) under sin(theta) dr dtheta / (2 period), for
/// 0 < p < 2. The r integral is done in closed form.
double billiard_pole_mean(double p, double theta0, double period);
/// mu(phi) of a billiard observable; +inf when the pole exponent is >= 2.
double billiard_mean(const ObservableSpec& spec, double period);

struct MeanEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::uint64_t steps = 0;
};

struct MeanOptions {
  std::uint64_t seed = 1;
  std::uint64_t total_steps = 100000000;
  int chunks = 64;
  std::uint64_t burn_in = kDefaultBurnIn;
  double core_radius = 1e-6;
  unsigned threads = 1;
};

/// Birkhoff average of an interval observable along `chunks` independent
/// equilibrium orbits with a batch-means standard error.
MeanEstimate estimate_mean(const LsvMap& map, const ObservableSpec& spec, const MeanOptions& options);

/// g(x0) = phi(0) - mu(phi) for phi = |x - x0|^{-1/alpha}, estimated as the
/// mean of phi(0) - phi along equilibrium orbits.
MeanEstimate balance_function(const LsvMap& map, double alpha, double x0, const MeanOptions& options);

struct BalancedRoot {
  double x0 = 0.0;
  double g = 0.0;
  double g_std_error = 0.0;
  int iterations = 0;
};

struct BalanceOptions {
  MeanOptions mean;
  double tolerance = 1e-3;
  int max_iterations = 40;
};

/// Root of g on [a, b] by bisection with common random numbers.
BalancedRoot find_balanced_x0(const LsvMap& map, double alpha, double a, double b,
                              const BalanceOptions& options);

}  // namespace stablelab
