#pragma once

// Which limit law the theory predicts for a (system, observable) pair.

#include <optional>
#include <string>
#include <vector>

#include "stablelab/billiard.hpp"
#include "stablelab/harness/config.hpp"
#include "stablelab/observables.hpp"

namespace stablelab::harness {

enum class LawCase { main1a, main1b, main2, interm_a, interm_b, interm_c, cusp_combined, degenerate_I_zero };

const char* case_name(LawCase c);

struct PredictedLaw {
  LawCase case_id = LawCase::main1a;
  double stable_index = 0.0;
  double scaling_exponent = 0.0;
  /// False for degenerate_I_zero: the exponent is an upper bound only.
  bool asserted = true;
  std::string notes;
};

struct SystemParams {
  SystemKind kind = SystemKind::lsv;
  double gamma = 0.0;
  std::vector<double> cusp_r;  // billiard cusp tips in arclength
  double period = 0.0;         // billiard |dQ|
  bool vanishes_near_cusps = false;
};

struct CuspIntegralReport {
  std::vector<CuspIntegrals> j_max;  // billiard: one entry per cusp in J_max
  std::optional<bool> balanced;      // LSV: phi(0) = mu(phi)
};

/// |I_psi| <= 1e-9 of its absolute-value counterpart.
bool integral_vanishes(const CuspIntegrals& c);

/// Throws InvalidInput for alpha = 1, 1/alpha = gamma and billiard poles at a
/// cusp.
PredictedLaw predict_limit_law(const SystemParams& system, const ObservableSpec& observable,
                               const CuspIntegralReport& report);

SystemParams system_params(const ExperimentConfig& config, const BilliardTable* table);

/// I_{phi~,i} for i in J_max with phi~ = phi - mean, boundary values taken as
/// Richardson limits along r -> r_i+- at fixed theta.
CuspIntegralReport billiard_cusp_report(const BilliardTable& table, const ObservableSpec& observable,
                                        double mean);

}  // namespace stablelab::harness
