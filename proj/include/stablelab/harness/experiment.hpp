#pragma once

// Monte Carlo ensembles of Birkhoff sums on either system, exponent fits,
// distributional checks and the induced-versus-lifted comparison.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "stablelab/billiard.hpp"
#include "stablelab/harness/config.hpp"
#include "stablelab/harness/predict.hpp"
#include "stablelab/interval.hpp"
#include "stablelab/observables.hpp"
#include "stablelab/stats.hpp"

namespace stablelab::harness {

/// Replicas dropped from an ensemble, by cause.
struct Quarantine {
  std::uint64_t pole_hits = 0;   // non-finite sums
  std::uint64_t grazing = 0;     // billiard grazing collisions
  std::uint64_t precision = 0;   // billiard cusp depth cutoff
  std::uint64_t other = 0;       // missed boundary, iteration caps
  std::uint64_t total() const { return pole_hits + grazing + precision + other; }
  void add(const Quarantine& q);
};

/// Centred sums S_n = sum_{j<n} (phi(T^j x) - center) at every grid point,
/// one equilibrium orbit per replica.
SumEnsemble lsv_ensemble(const LsvMap& map, const ObservableSpec& observable,
                         const std::vector<std::uint64_t>& grid, std::size_t replicas, std::uint64_t seed,
                         std::uint64_t burn_in, double center, unsigned threads, Quarantine& quarantine);

/// Sums of the induced observable sum_{j<R} (phi o T^j - center) over
/// floor(n mu_y) returns, indexed by the ambient grid n.
SumEnsemble lsv_induced_ensemble(const LsvMap& map, const ObservableSpec& observable,
                                 const std::vector<std::uint64_t>& grid, double mu_y, std::size_t replicas,
                                 std::uint64_t seed, std::uint64_t burn_returns, double center,
                                 unsigned threads, Quarantine& quarantine);

SumEnsemble billiard_ensemble(const BilliardTable& table, const ObservableSpec& observable,
                              const std::vector<std::uint64_t>& grid, std::size_t replicas, std::uint64_t seed,
                              double center, unsigned threads, Quarantine& quarantine);

SumEnsemble billiard_induced_ensemble(const BilliardTable& table, int k0, const ObservableSpec& observable,
                                      const std::vector<std::uint64_t>& grid, double mu_m,
                                      std::size_t replicas, std::uint64_t seed, double center,
                                      unsigned threads, Quarantine& quarantine);

/// mu(M) as the fraction of sin(theta) samples that lie in the inducing set.
MeasureEstimate billiard_measure_of_m(const BilliardTable& table, int k0, std::uint64_t samples,
                                      std::uint64_t seed, unsigned threads);

struct RunOutcome {
  std::string route;  // "full" or "induced"
  SumEnsemble ensemble;
  Quarantine quarantine;
  bool fit_ok = false;
  std::string fit_error;
  ExponentFit fit;
  double bootstrap_se = 0.0;
  bool have_self_similarity = false;
  SelfSimilarity self_similarity;
  double ks_stable = 0.0;  // rescaled terminal sums vs the stable oracle
  double ks_stable_critical = 0.0;

  double quarantined_fraction() const;
};

/// Exponent fit, bootstrap error and distributional checks for one ensemble.
RunOutcome analyze(std::string route, SumEnsemble ensemble, const std::optional<PredictedLaw>& law,
                   double skew, std::uint64_t seed);

struct ConsistencyReport {
  double theta_full = 0.0;
  double se_full = 0.0;
  double theta_induced = 0.0;
  double se_induced = 0.0;
  double z = 0.0;  // |difference| / joint standard error
  double ks_distance = 0.0;
  double ks_critical = 0.0;
  double measure = 0.0;  // mu(Y) or mu(M)
  bool agree = false;    // z <= 2
};

ConsistencyReport consistency(const RunOutcome& full, const RunOutcome& induced, double exponent,
                              double measure);

struct Rule {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct ExperimentResult {
  ExperimentConfig config;
  std::optional<PredictedLaw> predicted;  // empty for observables without a pole
  MeanEstimate mean;
  std::optional<MeasureEstimate> measure;
  std::vector<RunOutcome> runs;
  std::optional<ConsistencyReport> consistency;
  std::vector<Rule> rules;
  bool passed() const;
};

/// Resolves the predicted law for a config (estimating phi(0) - mu(phi) for
/// LSV when needed) and the centring mean.
struct Prediction {
  std::optional<PredictedLaw> law;
  MeanEstimate mean;
  std::optional<double> balance;  // estimated phi(0) - mu(phi), when computed
};
Prediction predict_for(const ExperimentConfig& config, unsigned threads);

ExperimentResult run_experiment(const ExperimentConfig& config, unsigned threads);

/// run_experiment with mode = both.
ExperimentResult compare_induced_lifted(ExperimentConfig config, unsigned threads);

/// Sign balance of the pole coefficients, used as the oracle skewness.
double oracle_skew(const ObservableSpec& observable);

}  // namespace stablelab::harness
