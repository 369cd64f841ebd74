#include "stablelab/harness/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "stablelab/error.hpp"
#include "stablelab/kernels/kernels.hpp"
#include "stablelab/parallel.hpp"

namespace stablelab::harness {

namespace {

constexpr std::size_t kLaneGroup = 16;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

SumEnsemble collect(const std::vector<std::uint64_t>& grid, std::size_t replicas,
                    const std::vector<double>& lane_major, const std::vector<char>& dropped, std::string system,
                    std::string observable, std::uint64_t seed) {
  SumEnsemble e;
  e.grid = grid;
  e.system = std::move(system);
  e.observable = std::move(observable);
  e.seed = seed;
  e.values.assign(grid.size(), {});
  const std::size_t k = grid.size();
  for (std::size_t i = 0; i < replicas; ++i) {
    if (dropped[i]) continue;
    for (std::size_t j = 0; j < k; ++j) e.values[j].push_back(lane_major[i * k + j]);
  }
  return e;
}

std::string describe(const ObservableSpec& o) {
  std::string s = "alpha=" + std::to_string(o.alpha) + " poles=" + std::to_string(o.poles.size());
  return s;
}

void drop_non_finite(std::size_t replicas, std::size_t k, const std::vector<double>& sums, std::vector<char>& dropped,
                     Quarantine& q) {
  for (std::size_t i = 0; i < replicas; ++i) {
    if (dropped[i]) continue;
    for (std::size_t j = 0; j < k; ++j) {
      if (!std::isfinite(sums[i * k + j])) {
        dropped[i] = 1;
        ++q.pole_hits;
        break;
      }
    }
  }
}

void count_abort(const OrbitAborted& e, Quarantine& q) {
  switch (e.reason()) {
    case OrbitAborted::Reason::grazing:
      ++q.grazing;
      break;
    case OrbitAborted::Reason::precision_exhausted:
      ++q.precision;
      break;
    default:
      ++q.other;
      break;
  }
}

std::vector<std::uint64_t> induced_grid(const std::vector<std::uint64_t>& grid, double measure) {
  if (!(measure > 0.0 && measure <= 1.0)) throw InvalidInput("induced grid: measure must lie in (0,1]");
  std::vector<std::uint64_t> out;
  for (std::uint64_t n : grid) {
    const auto f = static_cast<std::uint64_t>(std::floor(static_cast<double>(n) * measure));
    if (f < 1 || (!out.empty() && f <= out.back())) {
      throw InvalidInput("induced grid: floor(n * measure) must be positive and increasing");
    }
    out.push_back(f);
  }
  return out;
}

std::pair<double, double> median_iqr(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return {quantile_sorted(v, 0.5), quantile_sorted(v, 0.75) - quantile_sorted(v, 0.25)};
}

}  // namespace

void Quarantine::add(const Quarantine& q) {
  pole_hits += q.pole_hits;
  grazing += q.grazing;
  precision += q.precision;
  other += q.other;
}

SumEnsemble lsv_ensemble(const LsvMap& map, const ObservableSpec& observable,
                         const std::vector<std::uint64_t>& grid, std::size_t replicas, std::uint64_t seed,
                         std::uint64_t burn_in, double center, unsigned threads, Quarantine& quarantine) {
  const auto kobs = to_kernel(observable);
  const std::size_t k = grid.size();
  std::vector<double> states(replicas);
  std::vector<double> sums(replicas * k);
  const std::size_t groups = (replicas + kLaneGroup - 1) / kLaneGroup;
  parallel_for(groups, threads, [&](std::size_t g) {
    const std::size_t first = g * kLaneGroup;
    const std::size_t count = std::min(kLaneGroup, replicas - first);
    std::span<double> st(states.data() + first, count);
    equilibrium_batch(map, seed, streams::replica, first, burn_in, st);
    kernels::LsvSumRequest r;
    r.gamma = map.gamma();
    r.two_pow_gamma = map.two_pow_gamma();
    r.observable = &kobs;
    r.mode = kernels::SumMode::ambient;
    r.step_center = center;
    r.checkpoints = grid;
    kernels::lsv_sums(r, st, std::span<double>(sums.data() + first * k, count * k));
  });
  std::vector<char> dropped(replicas, 0);
  drop_non_finite(replicas, k, sums, dropped, quarantine);
  return collect(grid, replicas, sums, dropped, "lsv gamma=" + std::to_string(map.gamma()), describe(observable),
                 seed);
}

SumEnsemble lsv_induced_ensemble(const LsvMap& map, const ObservableSpec& observable,
                                 const std::vector<std::uint64_t>& grid, double mu_y, std::size_t replicas,
                                 std::uint64_t seed, std::uint64_t burn_returns, double center,
                                 unsigned threads, Quarantine& quarantine) {
  const auto kobs = to_kernel(observable);
  const std::vector<std::uint64_t> fgrid = induced_grid(grid, mu_y);
  const std::size_t k = grid.size();
  std::vector<double> states(replicas);
  std::vector<double> sums(replicas * k);
  const std::size_t groups = (replicas + kLaneGroup - 1) / kLaneGroup;
  parallel_for(groups, threads, [&](std::size_t g) {
    const std::size_t first = g * kLaneGroup;
    const std::size_t count = std::min(kLaneGroup, replicas - first);
    std::span<double> st(states.data() + first, count);
    induced_batch(map, seed, streams::induced_replica, first, burn_returns, st);
    kernels::LsvSumRequest r;
    r.gamma = map.gamma();
    r.two_pow_gamma = map.two_pow_gamma();
    r.observable = &kobs;
    r.mode = kernels::SumMode::induced;
    r.step_center = center;
    r.checkpoints = fgrid;
    kernels::lsv_sums(r, st, std::span<double>(sums.data() + first * k, count * k));
  });
  std::vector<char> dropped(replicas, 0);
  drop_non_finite(replicas, k, sums, dropped, quarantine);
  return collect(grid, replicas, sums, dropped, "lsv-induced gamma=" + std::to_string(map.gamma()),
                 describe(observable), seed);
}

SumEnsemble billiard_ensemble(const BilliardTable& table, const ObservableSpec& observable,
                              const std::vector<std::uint64_t>& grid, std::size_t replicas, std::uint64_t seed,
                              double center, unsigned threads, Quarantine& quarantine) {
  const std::size_t k = grid.size();
  const double period = table.total_length();
  std::vector<double> sums(replicas * k, kNaN);
  std::vector<Quarantine> q(replicas);
  std::vector<char> dropped(replicas, 0);
  parallel_for(replicas, threads, [&](std::size_t i) {
    Rng rng = make_rng(seed, streams::billiard, i);
    CollisionState s = sinetheta_sample(table, rng);
    double acc = 0.0;
    std::size_t next = 0;
    try {
      for (std::uint64_t j = 1; next < k; ++j) {
        acc += eval(observable, s.r, s.theta, period) - center;
        if (j == grid[next]) sums[i * k + next++] = acc;
        if (next < k) s = collide(table, s);
      }
    } catch (const OrbitAborted& e) {
      count_abort(e, q[i]);
      dropped[i] = 1;
    }
  });
  for (const auto& qi : q) quarantine.add(qi);
  drop_non_finite(replicas, k, sums, dropped, quarantine);
  return collect(grid, replicas, sums, dropped, "billiard " + table.name(), describe(observable), seed);
}

SumEnsemble billiard_induced_ensemble(const BilliardTable& table, int k0, const ObservableSpec& observable,
                                      const std::vector<std::uint64_t>& grid, double mu_m,
                                      std::size_t replicas, std::uint64_t seed, double center,
                                      unsigned threads, Quarantine& quarantine) {
  const std::vector<std::uint64_t> fgrid = induced_grid(grid, mu_m);
  const std::size_t k = grid.size();
  const double period = table.total_length();
  std::vector<double> sums(replicas * k, kNaN);
  std::vector<Quarantine> q(replicas);
  std::vector<char> dropped(replicas, 0);
  parallel_for(replicas, threads, [&](std::size_t i) {
    Rng rng = make_rng(seed, streams::induced_replica, i);
    try {
      CollisionState s;
      for (int tries = 0;; ++tries) {
        if (tries > 1000000) throw OrbitAborted(OrbitAborted::Reason::iteration_cap, "no start in M");
        s = sinetheta_sample(table, rng);
        try {
          if (in_inducing_set(table, s, k0)) break;
        } catch (const OrbitAborted&) {
        }
      }
      InducedOrbit orbit(table, s, k0);
      double acc = 0.0;
      std::size_t next = 0;
      auto add = [&](const CollisionState& c) { acc += eval(observable, c.r, c.theta, period) - center; };
      for (std::uint64_t j = 1; next < k; ++j) {
        orbit.next(add);
        if (j == fgrid[next]) sums[i * k + next++] = acc;
      }
    } catch (const OrbitAborted& e) {
      count_abort(e, q[i]);
      dropped[i] = 1;
    }
  });
  for (const auto& qi : q) quarantine.add(qi);
  drop_non_finite(replicas, k, sums, dropped, quarantine);
  return collect(grid, replicas, sums, dropped, "billiard-induced " + table.name(), describe(observable), seed);
}

MeasureEstimate billiard_measure_of_m(const BilliardTable& table, int k0, std::uint64_t samples,
                                      std::uint64_t seed, unsigned threads) {
  constexpr std::size_t kChunks = 64;
  const std::uint64_t per = std::max<std::uint64_t>(1, samples / kChunks);
  std::vector<std::uint64_t> hits(kChunks, 0), used(kChunks, 0);
  parallel_for(kChunks, threads, [&](std::size_t c) {
    Rng rng = make_rng(seed, streams::pilot, c);
    for (std::uint64_t i = 0; i < per; ++i) {
      const CollisionState s = sinetheta_sample(table, rng);
      try {
        hits[c] += in_inducing_set(table, s, k0) ? 1 : 0;
        ++used[c];
      } catch (const OrbitAborted&) {
      }
    }
  });
  double h = 0.0, u = 0.0;
  for (std::size_t c = 0; c < kChunks; ++c) {
    h += static_cast<double>(hits[c]);
    u += static_cast<double>(used[c]);
  }
  MeasureEstimate m;
  m.value = h / u;
  m.std_error = std::sqrt(m.value * (1.0 - m.value) / u);
  return m;
}

double RunOutcome::quarantined_fraction() const {
  const double kept = static_cast<double>(ensemble.replicas());
  const double lost = static_cast<double>(quarantine.total());
  return kept + lost > 0.0 ? lost / (kept + lost) : 0.0;
}

double oracle_skew(const ObservableSpec& observable) {
  bool pos = false, neg = false;
  for (const Pole& p : observable.poles) {
    pos = pos || p.coefficient > 0.0;
    neg = neg || p.coefficient < 0.0;
  }
  if (pos && !neg) return 1.0;
  if (neg && !pos) return -1.0;
  return 0.0;
}

RunOutcome analyze(std::string route, SumEnsemble ensemble, const std::optional<PredictedLaw>& law,
                   double skew, std::uint64_t seed) {
  RunOutcome out;
  out.route = std::move(route);
  out.ensemble = std::move(ensemble);
  const SumEnsemble& e = out.ensemble;
  try {
    out.fit = scaling_exponent(e);
    out.bootstrap_se = scaling_exponent_bootstrap_se(e, seed);
    out.fit_ok = true;
  } catch (const InvalidInput& err) {
    out.fit_error = err.what();
    return out;
  }
  if (!law) return out;
  const std::size_t k = e.grid.size();
  if (e.grid[k - 1] == 2 * e.grid[k - 2]) {
    out.self_similarity = self_similarity_check(e.values[k - 2], e.values[k - 1], law->stable_index, seed);
    out.have_self_similarity = true;
  }
  if (std::fabs(law->stable_index - 1.0) > 1e-9 && law->stable_index <= 2.0) {
    const std::size_t m = e.replicas();
    Rng rng = make_rng(seed, streams::synthetic, 0);
    std::vector<double> oracle(m);
    for (double& v : oracle) v = sample_stable(law->stable_index, skew, rng);
    auto [om, oi] = median_iqr(oracle);
    auto [sm, si] = median_iqr(e.values[k - 1]);
    std::vector<double> a(m), b(m);
    for (std::size_t i = 0; i < m; ++i) {
      a[i] = (e.values[k - 1][i] - sm) / si;
      b[i] = (oracle[i] - om) / oi;
    }
    out.ks_stable = ks_two_sample(a, b);
    out.ks_stable_critical = ks_critical_1pct(m, m);
  }
  return out;
}

ConsistencyReport consistency(const RunOutcome& full, const RunOutcome& induced, double exponent,
                              double measure) {
  if (!full.fit_ok || !induced.fit_ok) throw InvalidInput("consistency: both routes need a valid exponent fit");
  ConsistencyReport r;
  r.theta_full = full.fit.theta_hat;
  r.se_full = full.bootstrap_se;
  r.theta_induced = induced.fit.theta_hat;
  r.se_induced = induced.bootstrap_se;
  const double joint = std::hypot(r.se_full, r.se_induced);
  r.z = std::fabs(r.theta_full - r.theta_induced) / joint;
  r.agree = r.z <= 2.0;
  r.measure = measure;
  const auto& a = full.ensemble.values.back();
  const auto& b = induced.ensemble.values.back();
  const double scale = std::pow(static_cast<double>(full.ensemble.grid.back()), exponent);
  const double ma = median(a), mb = median(b);
  std::vector<double> x(a.size()), y(b.size());
  for (std::size_t i = 0; i < a.size(); ++i) x[i] = (a[i] - ma) / scale;
  for (std::size_t i = 0; i < b.size(); ++i) y[i] = (b[i] - mb) / scale;
  r.ks_distance = ks_two_sample(x, y);
  r.ks_critical = ks_critical_1pct(x.size(), y.size());
  return r;
}

bool ExperimentResult::passed() const {
  return std::all_of(rules.begin(), rules.end(), [](const Rule& r) { return r.passed; });
}

Prediction predict_for(const ExperimentConfig& config, unsigned threads) {
  Prediction p;
  const ObservableSpec& obs = config.observable;
  bool has_pole = false;
  for (const Pole& pole : obs.poles) has_pole = has_pole || pole.coefficient != 0.0;
  if (config.system == SystemKind::lsv) {
    const LsvMap map(config.gamma);
    if (obs.alpha > 1.0 && (has_pole || obs.shift != 0.0)) {
      MeanOptions mo;
      mo.seed = config.seed.value_or(1);
      mo.total_steps = config.mean_steps;
      mo.threads = threads;
      p.mean = estimate_mean(map, obs, mo);
    }
    if (!has_pole) return p;
    CuspIntegralReport rep;
    rep.balanced = config.balanced;
    const double inv = 1.0 / obs.alpha;
    if (!rep.balanced && inv < config.gamma && obs.poles.size() == 1 && obs.poles[0].x > 0.0 &&
        obs.poles[0].x < 1.0 && obs.alpha > 1.0) {
      MeanOptions mo;
      mo.seed = config.seed.value_or(1);
      mo.total_steps = config.mean_steps;
      mo.threads = threads;
      const MeanEstimate g = balance_function(map, obs.alpha, obs.poles[0].x, mo);
      p.balance = g.mean;
      rep.balanced = std::fabs(g.mean) <= 1e-3 + 2.0 * g.std_error;
    }
    p.law = predict_limit_law(system_params(config, nullptr), obs, rep);
    return p;
  }
  const BilliardTable table = load_table(config.table);
  if (obs.alpha > 1.0) {
    p.mean.mean = billiard_mean(obs, table.total_length());
  }
  if (!has_pole) return p;
  const SystemParams sys = system_params(config, &table);
  CuspIntegralReport rep;
  if (1.0 / obs.alpha < sys.gamma && !config.vanishes_near_cusps) {
    rep = billiard_cusp_report(table, obs, p.mean.mean);
  }
  p.law = predict_limit_law(sys, obs, rep);
  return p;
}

ExperimentResult run_experiment(const ExperimentConfig& config, unsigned threads) {
  config.validate();
  ExperimentResult res;
  res.config = config;
  const std::uint64_t seed = *config.seed;
  const Prediction pred = predict_for(config, threads);
  res.predicted = pred.law;
  res.mean = pred.mean;
  const double center = config.observable.alpha > 1.0 ? pred.mean.mean : 0.0;
  const double skew = oracle_skew(config.observable);
  const bool want_full = config.mode != RunMode::induced;
  const bool want_induced = config.mode != RunMode::full;
  const std::uint64_t pilot = config.extra_u64("pilot.returns", 4000000);

  if (config.system == SystemKind::lsv) {
    const LsvMap map(config.gamma);
    if (want_full) {
      Quarantine q;
      SumEnsemble e = lsv_ensemble(map, config.observable, config.grid, config.replicas, seed, config.burn_in,
                                   center, threads, q);
      res.runs.push_back(analyze("full", std::move(e), res.predicted, skew, seed));
      res.runs.back().quarantine = q;
    }
    if (want_induced) {
      res.measure = estimate_mu_y(map, seed, pilot);
      Quarantine q;
      SumEnsemble e = lsv_induced_ensemble(map, config.observable, config.grid, res.measure->value,
                                           config.replicas, seed, config.extra_u64("induced.burn_returns", 200),
                                           center, threads, q);
      res.runs.push_back(analyze("induced", std::move(e), res.predicted, skew, seed));
      res.runs.back().quarantine = q;
    }
  } else {
    const BilliardTable table = load_table(config.table);
    if (want_full) {
      Quarantine q;
      SumEnsemble e = billiard_ensemble(table, config.observable, config.grid, config.replicas, seed, center,
                                        threads, q);
      res.runs.push_back(analyze("full", std::move(e), res.predicted, skew, seed));
      res.runs.back().quarantine = q;
    }
    if (want_induced) {
      res.measure = billiard_measure_of_m(table, config.k0, pilot / 40, seed, threads);
      Quarantine q;
      SumEnsemble e = billiard_induced_ensemble(table, config.k0, config.observable, config.grid,
                                                res.measure->value, config.replicas, seed, center, threads, q);
      res.runs.push_back(analyze("induced", std::move(e), res.predicted, skew, seed));
      res.runs.back().quarantine = q;
    }
  }

  for (const RunOutcome& run : res.runs) {
    Rule fit{run.route + " exponent", false, ""};
    if (!run.fit_ok) {
      fit.detail = "fit rejected: " + run.fit_error;
    } else if (!res.predicted) {
      fit.detail = "no heavy-tailed pole, nothing predicted";
    } else if (!res.predicted->asserted) {
      fit.passed = true;
      fit.detail = "degenerate case, exponent reported only";
    } else {
      const double d = std::fabs(run.fit.theta_hat - res.predicted->scaling_exponent);
      fit.passed = d <= config.tolerance;
      fit.detail = "theta_hat=" + std::to_string(run.fit.theta_hat) + " predicted=" +
                   std::to_string(res.predicted->scaling_exponent) + " tolerance=" + std::to_string(config.tolerance);
    }
    res.rules.push_back(fit);
    Rule q{run.route + " quarantine", run.quarantined_fraction() < 1e-3,
           "discarded fraction " + std::to_string(run.quarantined_fraction())};
    res.rules.push_back(q);
  }
  if (want_full && want_induced && res.runs.size() == 2 && res.runs[0].fit_ok && res.runs[1].fit_ok &&
      res.predicted) {
    res.consistency = consistency(res.runs[0], res.runs[1], res.predicted->scaling_exponent, res.measure->value);
    res.rules.push_back({"lifting consistency", res.consistency->agree,
                         "z=" + std::to_string(res.consistency->z)});
  }
  return res;
}

ExperimentResult compare_induced_lifted(ExperimentConfig config, unsigned threads) {
  config.mode = RunMode::both;
  return run_experiment(config, threads);
}

}  // namespace stablelab::harness
