#include "stablelab/harness/predict.hpp"

#include <cmath>

#include "stablelab/error.hpp"

namespace stablelab::harness {

namespace {

constexpr double kBoundaryTolerance = 1e-12;

PredictedLaw law(LawCase c, double exponent, std::string notes, bool asserted = true) {
  PredictedLaw p;
  p.case_id = c;
  p.scaling_exponent = exponent;
  p.stable_index = 1.0 / exponent;
  p.asserted = asserted;
  p.notes = std::move(notes);
  return p;
}

}  // namespace

const char* case_name(LawCase c) {
  switch (c) {
    case LawCase::main1a:
      return "main1a";
    case LawCase::main1b:
      return "main1b";
    case LawCase::main2:
      return "main2";
    case LawCase::interm_a:
      return "interm_a";
    case LawCase::interm_b:
      return "interm_b";
    case LawCase::interm_c:
      return "interm_c";
    case LawCase::cusp_combined:
      return "cusp_combined";
    case LawCase::degenerate_I_zero:
      return "degenerate_I_zero";
  }
  return "?";
}

bool integral_vanishes(const CuspIntegrals& c) { return std::fabs(c.i_psi) <= 1e-6 * c.i_abs; }

PredictedLaw predict_limit_law(const SystemParams& system, const ObservableSpec& observable,
                               const CuspIntegralReport& report) {
  const double alpha = observable.alpha;
  if (alpha == 1.0) throw InvalidInput("predict: alpha = 1 is excluded");
  observable.validate();
  const double gamma = system.gamma;
  if (!(gamma > 0.0 && gamma < 1.0)) throw InvalidInput("predict: gamma must lie in (0,1)");
  bool has_pole = false;
  for (const Pole& p : observable.poles) has_pole = has_pole || p.coefficient != 0.0;
  if (!has_pole) throw InvalidInput("predict: observable has no pole, so no heavy tail");
  const double inv = 1.0 / alpha;

  if (system.kind == SystemKind::lsv) {
    for (const Pole& p : observable.poles) {
      if (p.coefficient != 0.0 && p.x == 0.0) {
        const double e = inv + gamma;
        if (!(e > 0.5)) throw InvalidInput("predict: 1/alpha + gamma must exceed 1/2");
        return law(LawCase::cusp_combined, e, "pole at the neutral fixed point: index (1/alpha + gamma)^-1");
      }
    }
    if (std::fabs(inv - gamma) <= kBoundaryTolerance) throw InvalidInput("predict: boundary 1/alpha = gamma is refused");
    if (inv > gamma) return law(LawCase::interm_a, inv, "heavy tail dominates");
    if (report.balanced.value_or(false)) {
      return law(LawCase::interm_c, inv, "phi(0) = mu(phi): the slow-return contribution cancels");
    }
    return law(LawCase::interm_b, gamma,
               report.balanced ? "phi(0) != mu(phi): slow returns dominate"
                               : "phi(0) != mu(phi) assumed (generic pole): slow returns dominate");
  }

  for (const Pole& p : observable.poles) {
    if (p.coefficient == 0.0) continue;
    for (double r : system.cusp_r) {
      if (arclength_distance(p.x, r, system.period) <= kBoundaryTolerance) {
        throw InvalidInput("predict: pole at a cusp has no known limit law");
      }
    }
  }
  if (std::fabs(inv - gamma) <= kBoundaryTolerance) throw InvalidInput("predict: boundary 1/alpha = gamma is refused");
  if (inv > gamma) return law(LawCase::main1a, inv, "heavy tail dominates");
  if (system.vanishes_near_cusps) return law(LawCase::main2, inv, "observable vanishes near the cusps");
  for (const CuspIntegrals& c : report.j_max) {
    if (!integral_vanishes(c)) return law(LawCase::main1b, gamma, "cusp excursions dominate");
  }
  return law(LawCase::degenerate_I_zero, gamma,
             "all cusp integrals vanish: variance grows slower than n^(2 gamma - eps), no first-order law",
             false);
}

SystemParams system_params(const ExperimentConfig& config, const BilliardTable* table) {
  SystemParams s;
  s.kind = config.system;
  s.vanishes_near_cusps = config.vanishes_near_cusps;
  if (config.system == SystemKind::lsv) {
    s.gamma = config.gamma;
    return s;
  }
  if (table == nullptr) throw InvalidInput("system_params: billiard table required");
  s.gamma = table->gamma_max();
  s.period = table->total_length();
  for (const auto& c : table->cusps()) s.cusp_r.push_back(c.r);
  return s;
}

CuspIntegralReport billiard_cusp_report(const BilliardTable& table, const ObservableSpec& observable,
                                        double mean) {
  CuspIntegralReport rep;
  const double period = table.total_length();
  for (int i : table.j_max()) {
    const CuspGeometry& c = table.cusps()[i];
    const double gi = (c.spec.beta - 1.0) / c.spec.beta;
    const double r0 = c.r;
    const double h0 = 1e-3 * std::min(1.0, c.spec.extent);
    auto values = [&](double theta) {
      const double plus = richardson_limit(
          [&](double h) { return eval(observable, r0 + h, theta, period) - mean; }, h0, 6);
      const double minus = richardson_limit(
          [&](double h) { return eval(observable, r0 - h, theta, period) - mean; }, h0, 6);
      return std::pair{plus, minus};
    };
    std::vector<double> kinks;
    for (const Pole& p : observable.poles) kinks.push_back(p.theta);
    rep.j_max.push_back(cusp_integrals(values, gi, kinks));
  }
  return rep;
}

}  // namespace stablelab::harness
