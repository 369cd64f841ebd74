// Acceptance suite: one PASS/FAIL line per criterion, artifacts under --out.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "stablelab/billiard.hpp"
#include "stablelab/error.hpp"
#include "stablelab/harness/config.hpp"
#include "stablelab/harness/diagnostics.hpp"
#include "stablelab/harness/experiment.hpp"
#include "stablelab/harness/report.hpp"
#include "stablelab/stats.hpp"

using namespace stablelab;
using namespace stablelab::harness;
using nlohmann::json;

namespace {

constexpr std::uint64_t kSeed = 20240611;

struct Outcome {
  bool passed = false;
  std::string detail;
};

struct Context {
  std::string out;
  unsigned threads = 1;
  // Full-route ensembles kept for the distributional check.
  std::map<std::string, SumEnsemble> ensembles;
  std::map<std::string, double> indices;
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string dir(const Context& ctx, const std::string& name) {
  const std::string d = ctx.out + "/" + name;
  std::filesystem::create_directories(d);
  return d;
}

ExperimentConfig lsv_config(double gamma, double alpha, double x0, double tolerance) {
  std::ostringstream s;
  s << "system = lsv\n"
    << "lsv.gamma = " << gamma << "\n"
    << "observable.alpha = " << alpha << "\n"
    << "observable.pole = " << x0 << " 1\n"
    << "grid.start = 4096\ngrid.ratio = 2\ngrid.points = 9\n"
    << "replicas = 2000\n"
    << "seed = " << kSeed << "\n"
    << "accept.tolerance = " << tolerance << "\n";
  std::istringstream in(s.str());
  return parse_config(in);
}

const RunOutcome* route(const ExperimentResult& r, const std::string& name) {
  for (const RunOutcome& run : r.runs)
    if (run.route == name) return &run;
  return nullptr;
}

/// Checks the full-route exponent of a finished run against the prediction.
Outcome exponent_rule(const ExperimentResult& r, double expected, double tolerance) {
  const RunOutcome* full = route(r, "full");
  if (full == nullptr || !full->fit_ok) return {false, "full-route fit unavailable"};
  if (!r.predicted) return {false, "nothing predicted"};
  const double th = full->fit.theta_hat;
  Outcome o;
  o.passed = std::fabs(r.predicted->scaling_exponent - expected) < 1e-12 && std::fabs(th - expected) <= tolerance &&
             full->quarantined_fraction() < 1e-3;
  o.detail = std::string(case_name(r.predicted->case_id)) + " theta_hat " + num(th) + " +- " +
             num(full->bootstrap_se) + " vs " + num(expected) + " (tol " + num(tolerance) + ")";
  return o;
}

Outcome merge(const std::vector<Outcome>& parts) {
  Outcome o{true, ""};
  for (const Outcome& p : parts) {
    o.passed = o.passed && p.passed;
    o.detail += (o.detail.empty() ? "" : "; ") + p.detail;
  }
  return o;
}

Outcome c1_lsv_return_tail(Context& ctx) {
  std::vector<Outcome> parts;
  json j = json::array();
  for (double gamma : {0.6, 0.75}) {
    const TailFit t = lsv_return_tail(LsvMap(gamma), 10000000, kSeed, ctx.threads);
    const double target = 1.0 / gamma;
    parts.push_back({std::fabs(t.hill.alpha - target) <= 0.10,
                     "gamma " + num(gamma) + ": index " + num(t.hill.alpha) + " vs 1/gamma " + num(target) +
                         " (a tail n^-gamma would read " + num(gamma) + ")"});
    j.push_back({{"gamma", gamma}, {"tail", tail_json(t)}});
    write_columns(dir(ctx, "c01") + "/survival_gamma" + num(gamma) + ".dat", t.survival);
  }
  write_json(dir(ctx, "c01") + "/summary.json", j);
  return merge(parts);
}

Outcome c2_observable_tail(Context& ctx) {
  std::vector<Outcome> parts;
  json j = json::array();
  for (double alpha : {0.8, 1.5}) {
    ObservableSpec o;
    o.alpha = alpha;
    o.poles.push_back({0.3, 0.0, 1.0});
    const TailFit t = observable_tail(LsvMap(0.6), o, 10000000, kSeed, ctx.threads);
    parts.push_back({std::fabs(t.hill.alpha - alpha) <= 0.10,
                     "alpha " + num(alpha) + ": Hill " + num(t.hill.alpha) + " (k " + std::to_string(t.hill.k) + ")"});
    j.push_back({{"alpha", alpha}, {"tail", tail_json(t)}});
  }
  write_json(dir(ctx, "c02") + "/summary.json", j);
  return merge(parts);
}

/// Criteria 3 and 13 share the lifted/induced comparison runs.
std::map<std::string, ExperimentResult> g_lifted;

const ExperimentResult& lifted(Context& ctx, const std::string& key, double gamma, double alpha) {
  auto it = g_lifted.find(key);
  if (it != g_lifted.end()) return it->second;
  const ExperimentResult r = compare_induced_lifted(lsv_config(gamma, alpha, 0.3, 0.05), ctx.threads);
  emit_report(r, dir(ctx, "lifted_" + key));
  if (const RunOutcome* full = route(r, "full")) {
    ctx.ensembles[key] = full->ensemble;
    if (r.predicted) ctx.indices[key] = r.predicted->stable_index;
  }
  return g_lifted.emplace(key, r).first->second;
}

Outcome c3_phase_transition(Context& ctx) {
  return merge({exponent_rule(lifted(ctx, "g0.6_a1.25", 0.6, 1.25), 0.8, 0.05),
                exponent_rule(lifted(ctx, "g0.75_a1.6", 0.75, 1.6), 0.75, 0.05)});
}

Outcome c4_balanced(Context& ctx) {
  const LsvMap map(0.75);
  BalanceOptions b;
  b.mean.seed = kSeed;
  b.mean.total_steps = 100000000;
  b.mean.chunks = 64;
  b.mean.threads = ctx.threads;
  b.tolerance = 1e-2;
  const BalancedRoot root = find_balanced_x0(map, 1.6, 0.02, 0.5, b);
  ExperimentConfig c = lsv_config(0.75, 1.6, root.x0, 0.07);
  c.balanced = true;
  const ExperimentResult r = run_experiment(c, ctx.threads);
  emit_report(r, dir(ctx, "c04"));
  write_json(dir(ctx, "c04") + "/root.json",
             {{"x0", root.x0}, {"g", root.g}, {"g_std_error", root.g_std_error}, {"iterations", root.iterations}});
  Outcome o = exponent_rule(r, 0.625, 0.07);
  const RunOutcome* full = route(r, "full");
  if (full != nullptr && full->fit_ok) {
    const bool apart = std::fabs(full->fit.theta_hat - 0.75) > 2.0 * full->bootstrap_se;
    o.passed = o.passed && apart;
    o.detail += "; x0* " + num(root.x0) + " (g " + num(root.g) + " +- " + num(root.g_std_error) + ")" +
                (apart ? ", case (b) value 0.75 rejected at 2 sigma" : ", NOT separated from 0.75");
  }
  return o;
}

Outcome c5_combined(Context& ctx) {
  std::vector<Outcome> parts;
  for (double gamma : {0.5, 0.4}) {
    const double alpha = 1.5;
    const std::string key = "g" + num(gamma) + "_a1.5_x0";
    const ExperimentResult r = run_experiment(lsv_config(gamma, alpha, 0.0, 0.07), ctx.threads);
    emit_report(r, dir(ctx, "c05_" + key));
    const double expected = 1.0 / alpha + gamma;
    Outcome o = exponent_rule(r, expected, 0.07);
    const RunOutcome* full = route(r, "full");
    if (full != nullptr && full->fit_ok) {
      ctx.ensembles[key] = full->ensemble;
      ctx.indices[key] = r.predicted->stable_index;
      const double naive = 1.0 / (alpha * (1.0 - gamma));
      const bool rejected = std::fabs(full->fit.theta_hat - naive) > 2.0 * full->bootstrap_se;
      o.passed = o.passed && rejected;
      o.detail += rejected ? "; naive exponent " + num(naive) + " rejected"
                           : "; naive exponent " + num(naive) + " NOT rejected";
    }
    parts.push_back(o);
  }
  return merge(parts);
}

Outcome c6_self_similarity(Context& ctx) {
  if (!g_lifted.count("g0.6_a1.25")) lifted(ctx, "g0.6_a1.25", 0.6, 1.25);
  if (!g_lifted.count("g0.75_a1.6")) lifted(ctx, "g0.75_a1.6", 0.75, 1.6);
  if (ctx.ensembles.size() < 4) c5_combined(ctx);
  std::vector<Outcome> parts;
  json j = json::array();
  for (const auto& [key, e] : ctx.ensembles) {
    const std::size_t k = e.grid.size() - 1;
    const double index = ctx.indices.at(key);
    auto stat = [&](double a) { return self_similarity_check(e.values[k - 1], e.values[k], a, kSeed); };
    const SelfSimilarity right = stat(index);
    const SelfSimilarity low = stat(index - 0.4);
    const SelfSimilarity high = stat(std::min(2.0, index + 0.4));
    const bool ok = right.passed && !low.passed && !high.passed;
    parts.push_back({ok, key + ": D " + num(right.statistic) + " (crit " + num(right.critical) + "), wrong -0.4 " +
                             num(low.statistic) + ", +0.4 " + num(high.statistic)});
    j.push_back({{"point", key},
                 {"index", index},
                 {"statistic", right.statistic},
                 {"scaling_part", right.scaling_part},
                 {"convolution_part", right.convolution_part},
                 {"critical", right.critical},
                 {"wrong_low", low.statistic},
                 {"wrong_high", high.statistic}});
  }
  write_json(dir(ctx, "c06") + "/summary.json", j);
  return merge(parts);
}

Outcome c7_karamata(Context& ctx) {
  std::vector<Outcome> parts;
  json j = json::array();
  const std::vector<double> eps{0.5, 1.0, 2.0}, ns{1e6};
  for (double alpha : {0.8, 1.5}) {
    const auto rows = karamata_residuals(pareto_stratified(alpha, 10000000, kSeed), alpha, eps, ns);
    bool ok = true;
    double worst = 0.0;
    for (const KaramataRow& r : rows) {
      const double limit = (r.item == 'a' && r.eps == 1.0) ? 0.02 : 0.05;
      ok = ok && !r.insufficient && r.residual < limit;
      worst = std::max(worst, r.residual);
      j.push_back({{"alpha", alpha}, {"item", std::string(1, r.item)}, {"eps", r.eps}, {"n", r.n},
                   {"ratio", r.ratio}, {"residual", r.residual}, {"exceedances", r.exceedances}});
    }
    parts.push_back({ok, "alpha " + num(alpha) + ": worst residual " + num(worst)});
  }
  write_json(dir(ctx, "c07") + "/summary.json", j);
  return merge(parts);
}

ObservableSpec induced_observable() {
  ObservableSpec o;
  o.alpha = 1.5;
  o.poles.push_back({0.8, 0.0, 1.0});
  return o;
}

Outcome c8_poisson(Context& ctx) {
  PointProcessOptions o;
  o.gamma = 0.6;
  o.observable = induced_observable();
  o.seed = kSeed;
  o.threads = ctx.threads;
  const PointProcessResult p = exceedance_experiment(o);
  const bool disp = p.dispersion.contains_one();
  const bool slope = std::fabs(p.intensity.slope + 1.5) <= 0.15;
  const std::string d = dir(ctx, "c08");
  std::vector<std::pair<double, double>> rows;
  for (std::size_t j = 0; j < o.marks.size(); ++j) rows.emplace_back(o.marks[j], p.mean_counts[j]);
  write_columns(d + "/intensity.dat", rows);
  rows.clear();
  for (std::size_t r = 0; r < p.counts.size(); ++r) rows.emplace_back(static_cast<double>(r), p.counts[r]);
  write_columns(d + "/dispersion_counts.dat", rows);
  write_json(d + "/summary.json", {{"b_n", p.b_n},
                                   {"dispersion", {p.dispersion.ratio, p.dispersion.ci_low, p.dispersion.ci_high}},
                                   {"mean_counts", p.mean_counts},
                                   {"slope", p.intensity.slope}});
  return {disp && slope, "dispersion " + num(p.dispersion.ratio) + " CI [" + num(p.dispersion.ci_low) + ", " +
                             num(p.dispersion.ci_high) + "], intensity slope " + num(p.intensity.slope)};
}

Outcome c9_small_values(Context& ctx) {
  SmallValuesSweepOptions o;
  o.gamma = 0.6;
  o.observable = induced_observable();
  o.seed = kSeed;
  o.threads = ctx.threads;
  const SmallValuesSweep s = small_values_sweep(o);
  std::string sys, ctl;
  json j = json::array();
  for (std::size_t i = 0; i < s.eps.size(); ++i) {
    sys += (i ? " " : "") + num(s.system[i].estimate);
    ctl += (i ? " " : "") + num(s.control[i].estimate);
    j.push_back({{"eps", s.eps[i]}, {"system", s.system[i].estimate}, {"control", s.control[i].estimate},
                 {"lags", s.system[i].lags}});
  }
  write_json(dir(ctx, "c09") + "/summary.json", j);
  return {s.non_increasing && s.control_max < 1e-2, "system " + sys + "; iid control " + ctl};
}

Outcome c10_max_sum(Context& ctx) {
  MaxSumOptions o;
  o.gamma = 0.6;
  o.observable = induced_observable();
  o.grid = geometric_grid(4096, 2, 9);
  o.replicas = 1024;
  o.seed = kSeed;
  o.threads = ctx.threads;
  const MaxSumResult m = max_sum_experiment(o);
  std::string med;
  std::vector<std::pair<double, double>> rows;
  for (std::size_t k = 0; k < m.grid.size(); ++k) {
    med += (k ? " " : "") + num(m.system_median[k]);
    rows.emplace_back(static_cast<double>(m.grid[k]), m.system_median[k]);
  }
  write_columns(dir(ctx, "c10") + "/max_sum.dat", rows);
  write_json(dir(ctx, "c10") + "/summary.json", {{"grid", m.grid},
                                                 {"system_median", m.system_median},
                                                 {"control_median", m.control_median},
                                                 {"control_slope", m.control_slope.slope}});
  return {m.system_decreasing && m.control_flat,
          "medians " + med + "; control slope " + num(m.control_slope.slope)};
}

Outcome c11_geometry(Context& ctx) {
  const BilliardTable t = BilliardTable::machta3();
  const GeometryCheck g = billiard_geometry_check(t, 1000000, kSeed, ctx.threads);
  write_json(dir(ctx, "c11") + "/summary.json", {{"gamma_max", g.gamma_max},
                                                 {"speed_error", g.max_speed_error},
                                                 {"reversal_error", g.max_reversal_error},
                                                 {"chi2", g.chi2},
                                                 {"chi2_critical", g.chi2_critical},
                                                 {"dof", g.dof},
                                                 {"aborted", g.aborted}});
  return {g.passed() && g.max_speed_error <= 1e-12 && g.max_reversal_error <= 1e-9,
          "speed " + num(g.max_speed_error) + ", reversal " + num(g.max_reversal_error) + ", chi2 " + num(g.chi2) +
              " / " + num(g.chi2_critical) + ", gamma_max " + (g.gamma_max_exact ? "exact" : "INEXACT")};
}

Outcome c12_billiard_tail(Context& ctx) {
  const BilliardTable t = BilliardTable::machta3();
  const int k0 = 100;
  const TailFit f = billiard_return_tail(t, k0, 1000000, k0, kSeed, ctx.threads);
  const double g = t.gamma_max();
  write_columns(dir(ctx, "c12") + "/return_survival.dat", f.survival);
  write_json(dir(ctx, "c12") + "/summary.json", tail_json(f));
  return {!(f.ci_low <= g && g <= f.ci_high),
          "index " + num(f.hill.alpha) + " CI [" + num(f.ci_low) + ", " + num(f.ci_high) + "] vs 1/gamma " +
              num(1.0 / g) + "; gamma " + num(g) + " excluded"};
}

Outcome c13_lifting(Context& ctx) {
  std::vector<Outcome> parts;
  for (const auto& [key, gamma, alpha] :
       {std::tuple{"g0.6_a1.25", 0.6, 1.25}, std::tuple{"g0.75_a1.6", 0.75, 1.6}}) {
    const ExperimentResult& r = lifted(ctx, key, gamma, alpha);
    if (!r.consistency) {
      parts.push_back({false, std::string(key) + ": no consistency report"});
      continue;
    }
    const ConsistencyReport& c = *r.consistency;
    parts.push_back({c.agree, std::string(key) + ": full " + num(c.theta_full) + " +- " + num(c.se_full) +
                                  ", induced " + num(c.theta_induced) + " +- " + num(c.se_induced) + ", z " +
                                  num(c.z)});
  }
  return merge(parts);
}

Outcome c14_determinism(Context& ctx) {
  ExperimentConfig c = lsv_config(0.6, 1.25, 0.3, 0.05);
  c.replicas = 256;
  c.grid = geometric_grid(4096, 2, 5);
  c.mean_steps = 1000000;
  c.extra["pilot.returns"] = "400000";
  c.mode = RunMode::both;
  const unsigned a = 1, b = ctx.threads > 1 ? ctx.threads : 3;
  const ExperimentResult ra = run_experiment(c, a);
  const ExperimentResult rb = run_experiment(c, b);
  bool same = ra.runs.size() == rb.runs.size() && !ra.runs.empty();
  for (std::size_t i = 0; same && i < ra.runs.size(); ++i) {
    const std::string x = ensemble_csv(ra.runs[i].ensemble), y = ensemble_csv(rb.runs[i].ensemble);
    same = x == y;
    write_text(dir(ctx, "c14") + "/ensemble_" + ra.runs[i].route + "_threads" + std::to_string(a) + ".csv", x);
    write_text(dir(ctx, "c14") + "/ensemble_" + rb.runs[i].route + "_threads" + std::to_string(b) + ".csv", y);
  }
  return {same, "full and induced ensembles, threads " + std::to_string(a) + " vs " + std::to_string(b) +
                    (same ? ": byte-identical" : ": DIFFER")};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stablelab acceptance suite"};
  Context ctx;
  ctx.out = "acceptance_out";
  ctx.threads = std::max(1u, std::thread::hardware_concurrency());
  std::vector<int> only;
  app.add_option("--out", ctx.out, "output directory");
  app.add_option("--threads", ctx.threads, "worker threads")->check(CLI::PositiveNumber);
  app.add_option("--only", only, "criteria to run (default: all)")->delimiter(',');
  CLI11_PARSE(app, argc, argv);
  std::filesystem::create_directories(ctx.out);

  const std::vector<std::pair<int, std::function<Outcome(Context&)>>> criteria{
      {1, c1_lsv_return_tail}, {2, c2_observable_tail}, {3, c3_phase_transition}, {4, c4_balanced},
      {5, c5_combined},        {6, c6_self_similarity}, {7, c7_karamata},         {8, c8_poisson},
      {9, c9_small_values},    {10, c10_max_sum},       {11, c11_geometry},       {12, c12_billiard_tail},
      {13, c13_lifting},       {14, c14_determinism}};
  const std::set<int> selected(only.begin(), only.end());
  bool all = true;
  json summary = json::array();
  for (const auto& [id, run] : criteria) {
    if (!selected.empty() && !selected.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = run(ctx);
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("criterion %2d: %s  %s  [%.0f s]\n", id, o.passed ? "PASS" : "FAIL", o.detail.c_str(), secs);
    std::fflush(stdout);
    all = all && o.passed;
    summary.push_back({{"criterion", id}, {"passed", o.passed}, {"detail", o.detail}, {"seconds", secs}});
  }
  write_json(ctx.out + "/acceptance.json", summary);
  return all ? 0 : 1;
}
