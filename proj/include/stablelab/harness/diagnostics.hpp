#pragma once

// Tail, point-process, small-values, max-sum and geometry diagnostics driven
// by simulated orbits.

#include <cstdint>
#include <utility>
#include <vector>

#include "stablelab/billiard.hpp"
#include "stablelab/interval.hpp"
#include "stablelab/observables.hpp"
#include "stablelab/pointprocess.hpp"
#include "stablelab/stats.hpp"

namespace stablelab::harness {

struct TailFit {
  HillResult hill;
  double ci_low = 0.0;  // alpha_hat (1 -+ 1.96 / sqrt(k))
  double ci_high = 0.0;
  std::uint64_t samples = 0;
  double threshold = 0.0;  // Hill threshold when k was chosen by level, else 0
  std::vector<HillResult> stability;
  std::vector<std::pair<double, double>> survival;  // (t, P(X > t)) on a log grid
  std::uint64_t discarded = 0;
};

/// Hill fit of a positive sample with k given, or k = default_hill_k(N) when 0.
TailFit fit_tail(std::vector<double> values, std::size_t k);
/// Hill fit using every value strictly above `threshold`.
TailFit fit_tail_above(std::vector<double> values, double threshold);

/// Return times to [1/2,1] along 64 induced orbits started from mu_Y.
TailFit lsv_return_tail(const LsvMap& map, std::uint64_t returns, std::uint64_t seed, unsigned threads,
                        std::size_t k = 0);

/// |phi| sampled every `thin` steps along 64 equilibrium orbits.
TailFit observable_tail(const LsvMap& map, const ObservableSpec& observable, std::uint64_t samples,
                        std::uint64_t seed, unsigned threads, std::size_t k = 0, std::uint64_t thin = 8);

/// Return times to M along 16 induced orbits, Hill above `threshold`.
TailFit billiard_return_tail(const BilliardTable& table, int k0, std::uint64_t returns, double threshold,
                             std::uint64_t seed, unsigned threads);

/// Observable phi evaluated at the return points of the LSV induced system.
struct InducedPilot {
  double density = 0.0;  // mu_Y density at the pole, by a window count
  double mean = 0.0;     // mu_Y(phi), integrable poles replaced on a core
  double mean_std_error = 0.0;
  std::uint64_t returns = 0;
};

InducedPilot induced_pilot(const LsvMap& map, const ObservableSpec& observable, std::uint64_t returns,
                           double radius, std::uint64_t seed, unsigned threads);

/// phi at `count` successive return points of `lanes` independent induced
/// orbits, lane-major. Lanes are burnt in for `burn_returns` returns.
std::vector<double> induced_values(const LsvMap& map, const ObservableSpec& observable, std::size_t lanes,
                                   std::uint64_t count, std::uint64_t seed, std::uint64_t stream_offset,
                                   std::uint64_t burn_returns, unsigned threads);

struct PointProcessOptions {
  double gamma = 0.6;
  ObservableSpec observable;  // single interval pole inside Y
  std::uint64_t n = 65536;
  std::size_t replicas = 1000;
  double threshold = kDefaultMarkThreshold;
  std::vector<double> marks{1.0, 2.0, 4.0, 8.0};
  std::uint64_t pilot_returns = 20000000;
  double pilot_radius = 1e-3;
  std::uint64_t seed = 1;
  unsigned threads = 1;
};

struct PointProcessResult {
  InducedPilot pilot;
  double b_n = 0.0;
  std::vector<double> counts;  // exceedances per replica at the mark threshold
  Dispersion dispersion;
  std::vector<double> mean_counts;  // mean count with mark > v, per v in marks
  LinearFit intensity;              // log mean count vs log v
  std::vector<MarkedPoint> first_replica;
};

PointProcessResult exceedance_experiment(const PointProcessOptions& options);

struct SmallValuesSweepOptions {
  double gamma = 0.6;
  ObservableSpec observable;
  std::uint64_t n = 65536;
  std::vector<double> eps{0.4, 0.2, 0.1, 0.05};
  std::size_t orbits = 4;
  std::uint64_t orbit_length = 1ULL << 22;
  std::uint64_t control_length = 1ULL << 23;
  double k = 0.0;  // 0: chosen from the lag-1 correlation at the largest eps
  std::uint64_t pilot_returns = 20000000;
  double pilot_radius = 1e-3;
  std::uint64_t seed = 1;
  unsigned threads = 1;
};

struct SmallValuesSweep {
  InducedPilot pilot;
  double b_n = 0.0;
  std::vector<double> eps;
  std::vector<SmallValues> system;
  std::vector<SmallValues> control;
  bool non_increasing = false;
  double control_max = 0.0;
};

SmallValuesSweep small_values_sweep(const SmallValuesSweepOptions& options);

struct MaxSumOptions {
  double gamma = 0.6;
  ObservableSpec observable;
  double eps = 0.1;
  std::vector<std::uint64_t> grid;
  std::size_t replicas = 256;
  std::uint64_t pilot_returns = 100000000;
  std::uint64_t seed = 1;
  unsigned threads = 1;
};

struct MaxSumResult {
  std::vector<std::uint64_t> grid;
  InducedPilot pilot;
  std::vector<double> system_median;
  std::vector<double> control_median;
  bool system_decreasing = false;
  LinearFit control_slope;  // log median vs log n
  bool control_flat = false;  // slope >= -0.03
};

/// Prefix diagnostics of induced orbits centred at mu_Y(phi), and the
/// eps = 0 control on iid symmetric stable values.
MaxSumResult max_sum_experiment(const MaxSumOptions& options);

struct GeometryCheck {
  double gamma_max = 0.0;
  bool gamma_max_exact = false;  // equals (beta_max - 1) / beta_max in binary64
  double max_speed_error = 0.0;
  double max_reversal_error = 0.0;
  double chi2 = 0.0;
  double chi2_critical = 0.0;
  std::size_t dof = 0;
  std::uint64_t samples = 0;
  std::uint64_t aborted = 0;
  std::vector<double> theta_histogram;  // image counts per theta bin
  bool passed() const;
};

/// One collision step applied to sin(theta) samples: speed, reversibility
/// and a chi-square test of the image against the invariant measure on
/// r_bins x theta_bins cells of equal mass.
GeometryCheck billiard_geometry_check(const BilliardTable& table, std::uint64_t samples, std::uint64_t seed,
                                      unsigned threads, int r_bins = 30, int theta_bins = 20);

}  // namespace stablelab::harness
