// stablelab command line: predict | run | induced | pointprocess | karamata |
// billiard-check | report. Exit status 0 pass, 1 failed rule, 2 bad input.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "stablelab/error.hpp"
#include "stablelab/harness/config.hpp"
#include "stablelab/harness/diagnostics.hpp"
#include "stablelab/harness/experiment.hpp"
#include "stablelab/harness/report.hpp"

using namespace stablelab;
using namespace stablelab::harness;
using nlohmann::json;

namespace {

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  unsigned threads = std::max(1u, std::thread::hardware_concurrency());
};

void add_flags(CLI::App* sub, Flags& f, bool need_config = true) {
  auto* c = sub->add_option("--config", f.config, "experiment config file");
  if (need_config) c->required()->check(CLI::ExistingFile);
  sub->add_option("--seed", f.seed, "master seed (overrides the config)");
  sub->add_option("--out", f.out, "output directory");
  sub->add_option("--threads", f.threads, "worker threads")->check(CLI::PositiveNumber);
}

ExperimentConfig load(const Flags& f) {
  ExperimentConfig c = load_config(f.config);
  if (f.seed) c.seed = f.seed;
  if (!f.out.empty()) c.out_dir = f.out;
  return c;
}

std::uint64_t require_seed(const ExperimentConfig& c) {
  if (!c.seed) throw InvalidInput("a seed is required (config `seed` or --seed)");
  return *c.seed;
}

/// Prints rule lines, writes summary.json when an output directory is set
/// and returns the exit status.
int finish(const std::vector<Rule>& rules, json summary, const std::string& out_dir) {
  bool ok = true;
  json jr = json::array();
  for (const Rule& r : rules) {
    std::printf("%s  %s: %s\n", r.passed ? "PASS" : "FAIL", r.name.c_str(), r.detail.c_str());
    ok = ok && r.passed;
    jr.push_back({{"rule", r.name}, {"passed", r.passed}, {"detail", r.detail}});
  }
  summary["rules"] = jr;
  summary["status"] = ok ? "pass" : "fail";
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    write_json(out_dir + "/summary.json", summary);
  }
  return ok ? 0 : 1;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

int cmd_predict(const Flags& f) {
  ExperimentConfig c = load(f);
  c.observable.validate();
  const Prediction p = predict_for(c, f.threads);
  json j;
  if (p.law) {
    j = {{"case", case_name(p.law->case_id)},
         {"stable_index", p.law->stable_index},
         {"scaling_exponent", p.law->scaling_exponent},
         {"asserted", p.law->asserted},
         {"notes", p.law->notes}};
  } else {
    j = {{"case", nullptr}, {"notes", "observable has no pole"}};
  }
  j["centering_mean"] = p.mean.mean;
  if (p.balance) j["phi0_minus_mean"] = *p.balance;
  std::cout << j.dump(2) << "\n";
  if (!f.out.empty()) {
    std::filesystem::create_directories(f.out);
    write_json(f.out + "/prediction.json", j);
  }
  return 0;
}

int print_result(const ExperimentResult& r) {
  for (const RunOutcome& run : r.runs) {
    if (run.fit_ok)
      std::printf("%-8s theta_hat = %.4f (bootstrap se %.4f), kept %zu replicas\n", run.route.c_str(),
                  run.fit.theta_hat, run.bootstrap_se, run.ensemble.replicas());
    else
      std::printf("%-8s fit rejected: %s\n", run.route.c_str(), run.fit_error.c_str());
  }
  if (r.predicted)
    std::printf("predicted %s: stable index %.4f, exponent %.4f\n", case_name(r.predicted->case_id),
                r.predicted->stable_index, r.predicted->scaling_exponent);
  for (const Rule& rule : r.rules)
    std::printf("%s  %s: %s\n", rule.passed ? "PASS" : "FAIL", rule.name.c_str(), rule.detail.c_str());
  if (r.runs.empty()) std::printf("no-data\n");
  return r.passed() ? 0 : 1;
}

int cmd_run(const Flags& f, bool induced) {
  ExperimentConfig c = load(f);
  const ExperimentResult r = induced ? compare_induced_lifted(c, f.threads) : run_experiment(c, f.threads);
  if (!c.out_dir.empty()) emit_report(r, c.out_dir);
  return print_result(r);
}

ObservableSpec single_pole(const ExperimentConfig& c) {
  if (c.system != SystemKind::lsv) throw InvalidInput("pointprocess runs on the LSV induced system");
  if (c.observable.poles.size() != 1) throw InvalidInput("pointprocess needs exactly one observable.pole");
  const double x = c.observable.poles[0].x;
  if (!(x > 0.5 && x < 1.0)) throw InvalidInput("pointprocess needs the pole inside Y = (1/2, 1)");
  if (!(c.observable.alpha > 1.0)) throw InvalidInput("pointprocess needs alpha in (1,2)");
  return c.observable;
}

int cmd_pointprocess(const Flags& f) {
  const ExperimentConfig c = load(f);
  const ObservableSpec obs = single_pole(c);
  if (!(c.gamma > 0.0 && c.gamma < 1.0)) throw InvalidInput("lsv.gamma must lie in (0,1)");
  const std::uint64_t seed = require_seed(c);
  const double alpha = obs.alpha;
  std::vector<Rule> rules;
  json summary;

  PointProcessOptions pp;
  pp.gamma = c.gamma;
  pp.observable = obs;
  pp.n = c.extra_u64("pp.n", 65536);
  pp.replicas = c.extra_u64("pp.replicas", 1000);
  pp.threshold = c.extra_double("pp.threshold", kDefaultMarkThreshold);
  pp.marks = c.extra_list("pp.marks", {1.0, 2.0, 4.0, 8.0});
  pp.pilot_returns = c.extra_u64("pilot.returns", 20000000);
  pp.pilot_radius = c.extra_double("pilot.radius", 1e-3);
  pp.seed = seed;
  pp.threads = f.threads;
  const PointProcessResult p = exceedance_experiment(pp);
  rules.push_back({"dispersion", p.dispersion.contains_one(),
                   "ratio " + num(p.dispersion.ratio) + " CI [" + num(p.dispersion.ci_low) + ", " +
                       num(p.dispersion.ci_high) + "]"});
  rules.push_back({"intensity slope", std::fabs(p.intensity.slope + alpha) <= 0.15,
                   "slope " + num(p.intensity.slope) + " vs " + num(-alpha)});
  summary["pointprocess"] = {{"b_n", p.b_n},
                             {"density", p.pilot.density},
                             {"dispersion", {{"mean", p.dispersion.mean}, {"ratio", p.dispersion.ratio},
                                             {"ci", {p.dispersion.ci_low, p.dispersion.ci_high}}}},
                             {"marks", pp.marks},
                             {"mean_counts", p.mean_counts},
                             {"slope", p.intensity.slope}};

  SmallValuesSweepOptions sv;
  sv.gamma = c.gamma;
  sv.observable = obs;
  sv.n = c.extra_u64("sv.n", 65536);
  sv.eps = c.extra_list("sv.eps", {0.4, 0.2, 0.1, 0.05});
  sv.orbits = c.extra_u64("sv.orbits", 4);
  sv.orbit_length = c.extra_u64("sv.length", 1ULL << 22);
  sv.control_length = c.extra_u64("sv.control", 1ULL << 23);
  sv.k = c.extra_double("sv.k", 0.0);
  sv.pilot_returns = pp.pilot_returns;
  sv.pilot_radius = pp.pilot_radius;
  sv.seed = seed;
  sv.threads = f.threads;
  const SmallValuesSweep s = small_values_sweep(sv);
  std::string est, ctl;
  for (std::size_t i = 0; i < s.eps.size(); ++i) {
    est += (i ? " " : "") + num(s.system[i].estimate);
    ctl += (i ? " " : "") + num(s.control[i].estimate);
  }
  rules.push_back({"small values non-increasing", s.non_increasing, "estimates " + est});
  rules.push_back({"small values iid control", s.control_max < 1e-2, "control " + ctl});
  json sj = json::array();
  for (std::size_t i = 0; i < s.eps.size(); ++i)
    sj.push_back({{"eps", s.eps[i]}, {"estimate", s.system[i].estimate}, {"control", s.control[i].estimate},
                  {"lags", s.system[i].lags}});
  summary["small_values"] = sj;

  MaxSumOptions ms;
  ms.gamma = c.gamma;
  ms.observable = obs;
  ms.eps = c.extra_double("ms.eps", 0.1);
  const std::vector<double> g = c.extra_list("ms.grid", {});
  if (g.empty()) {
    ms.grid = geometric_grid(4096, 2, 9);
  } else {
    for (double v : g) ms.grid.push_back(static_cast<std::uint64_t>(v));
  }
  ms.replicas = c.extra_u64("ms.replicas", 256);
  ms.pilot_returns = c.extra_u64("pilot.returns", 100000000);
  ms.seed = seed;
  ms.threads = f.threads;
  const MaxSumResult m = max_sum_experiment(ms);
  std::string med;
  for (double v : m.system_median) med += (med.empty() ? "" : " ") + num(v);
  rules.push_back({"max-sum decreasing", m.system_decreasing, "medians " + med});
  rules.push_back({"max-sum eps=0 control flat", m.control_flat, "slope " + num(m.control_slope.slope)});
  summary["max_sum"] = {{"grid", m.grid}, {"system_median", m.system_median}, {"control_median", m.control_median},
                        {"center", m.pilot.mean}};

  if (!f.out.empty()) {
    std::filesystem::create_directories(f.out);
    std::vector<std::pair<double, double>> rows;
    for (std::size_t j = 0; j < pp.marks.size(); ++j) rows.emplace_back(pp.marks[j], p.mean_counts[j]);
    write_columns(f.out + "/intensity.dat", rows);
    rows.clear();
    for (std::size_t r = 0; r < p.counts.size(); ++r) rows.emplace_back(static_cast<double>(r), p.counts[r]);
    write_columns(f.out + "/dispersion_counts.dat", rows);
    rows.clear();
    for (const MarkedPoint& mp : p.first_replica) rows.emplace_back(mp.time, mp.mark);
    write_columns(f.out + "/marked_points.dat", rows);
    rows.clear();
    for (std::size_t i = 0; i < s.eps.size(); ++i) rows.emplace_back(s.eps[i], s.system[i].estimate);
    write_columns(f.out + "/small_values.dat", rows);
    rows.clear();
    for (std::size_t j = 0; j < m.grid.size(); ++j) rows.emplace_back(static_cast<double>(m.grid[j]), m.system_median[j]);
    write_columns(f.out + "/max_sum.dat", rows);
  }
  return finish(rules, summary, f.out);
}

int cmd_karamata(const Flags& f) {
  const ExperimentConfig c = load(f);
  const std::uint64_t seed = require_seed(c);
  const double alpha = c.observable.alpha;
  if (!(alpha > 0.0 && alpha < 2.0) || alpha == 1.0) throw InvalidInput("observable.alpha must lie in (0,1) U (1,2)");
  const std::vector<double> eps = c.extra_list("kar.eps", {0.5, 1.0, 2.0});
  const std::vector<double> ns = c.extra_list("kar.n", {1e6});
  const std::uint64_t strata = c.extra_u64("kar.strata", 10000000);
  const auto rows = karamata_residuals(pareto_stratified(alpha, strata, seed), alpha, eps, ns);
  std::vector<Rule> rules;
  json jr = json::array();
  for (const KaramataRow& r : rows) {
    const double limit = (r.item == 'a' && r.eps == 1.0) ? 0.02 : 0.05;
    const std::string name = std::string("item ") + r.item + " eps=" + num(r.eps) + " n=" + num(r.n);
    rules.push_back({name, !r.insufficient && r.residual < limit,
                     "ratio " + num(r.ratio) + (r.insufficient ? " (insufficient exceedances)" : "")});
    jr.push_back({{"item", std::string(1, r.item)}, {"eps", r.eps}, {"n", r.n}, {"lhs", r.lhs}, {"rhs", r.rhs},
                  {"ratio", r.ratio}, {"residual", r.residual}, {"exceedances", r.exceedances}});
  }
  return finish(rules, {{"alpha", alpha}, {"rows", jr}}, f.out);
}

int cmd_billiard(const Flags& f) {
  const ExperimentConfig c = load(f);
  const std::uint64_t seed = require_seed(c);
  const BilliardTable table = load_table(c.table);
  const GeometryCheck g = billiard_geometry_check(table, c.extra_u64("samples", 1000000), seed, f.threads,
                                                  static_cast<int>(c.extra_u64("bins.r", 30)),
                                                  static_cast<int>(c.extra_u64("bins.theta", 20)));
  std::vector<Rule> rules;
  rules.push_back({"speed", g.max_speed_error <= 1e-12, "max | |v| - 1 | = " + num(g.max_speed_error)});
  rules.push_back({"reversal", g.max_reversal_error <= 1e-9, "max error " + num(g.max_reversal_error)});
  rules.push_back({"measure invariance", g.chi2 <= g.chi2_critical,
                   "chi2 " + num(g.chi2) + " critical " + num(g.chi2_critical) + " dof " + std::to_string(g.dof)});
  rules.push_back({"gamma_max", g.gamma_max_exact, "gamma_max = " + num(g.gamma_max)});
  const double threshold = c.extra_double("hill.threshold", static_cast<double>(c.k0));
  const TailFit t = billiard_return_tail(table, c.k0, c.extra_u64("returns", 1000000), threshold, seed, f.threads);
  const double gamma = table.gamma_max();
  rules.push_back({"return tail CI excludes gamma", !(t.ci_low <= gamma && gamma <= t.ci_high),
                   "alpha_hat " + num(t.hill.alpha) + " CI [" + num(t.ci_low) + ", " + num(t.ci_high) +
                       "], 1/gamma = " + num(1.0 / gamma) + ", k = " + std::to_string(t.hill.k)});
  json summary = {{"table", table.name()},
                  {"total_length", table.total_length()},
                  {"gamma_max", g.gamma_max},
                  {"samples", g.samples},
                  {"aborted", g.aborted},
                  {"chi2", g.chi2},
                  {"return_tail", tail_json(t)}};
  if (!f.out.empty()) {
    std::filesystem::create_directories(f.out);
    write_columns(f.out + "/return_survival.dat", t.survival);
  }
  return finish(rules, summary, f.out);
}

int cmd_report(const Flags& f) {
  if (f.out.empty()) throw InvalidInput("report needs --out <dir>");
  if (!std::filesystem::is_directory(f.out)) throw InvalidInput("no such directory: " + f.out);
  std::vector<std::filesystem::path> found;
  for (const auto& e : std::filesystem::recursive_directory_iterator(f.out))
    if (e.is_regular_file() && e.path().filename() == "summary.json") found.push_back(e.path());
  std::sort(found.begin(), found.end());
  if (found.empty()) {
    std::printf("no-data\n");
    return 0;
  }
  bool ok = true;
  for (const auto& p : found) {
    std::ifstream in(p);
    const json j = json::parse(in, nullptr, false);
    const std::string status = j.is_object() && j.contains("status") ? j["status"].get<std::string>() : "unreadable";
    std::printf("%-10s %s\n", status.c_str(), p.parent_path().string().c_str());
    ok = ok && status != "fail" && status != "unreadable";
  }
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Heavy-tailed Birkhoff sums on intermittent maps and cusp billiards"};
  app.require_subcommand(1);
  Flags f;
  auto* predict = app.add_subcommand("predict", "theorem case and predicted stable index");
  auto* run = app.add_subcommand("run", "Monte Carlo ensemble and exponent fit");
  auto* induced = app.add_subcommand("induced", "induced versus lifted consistency");
  auto* pp = app.add_subcommand("pointprocess", "exceedances, small values and max-sum diagnostics");
  auto* kar = app.add_subcommand("karamata", "Karamata ratio suite on exact Pareto data");
  auto* bil = app.add_subcommand("billiard-check", "billiard geometry suite and return-time tail");
  auto* rep = app.add_subcommand("report", "collect summary.json statuses under --out");
  for (auto* s : {predict, run, induced, pp, kar, bil}) add_flags(s, f);
  add_flags(rep, f, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  try {
    if (predict->parsed()) return cmd_predict(f);
    if (run->parsed()) return cmd_run(f, false);
    if (induced->parsed()) return cmd_run(f, true);
    if (pp->parsed()) return cmd_pointprocess(f);
    if (kar->parsed()) return cmd_karamata(f);
    if (bil->parsed()) return cmd_billiard(f);
    if (rep->parsed()) return cmd_report(f);
  } catch (const InvalidInput& e) {
    std::fprintf(stderr, "invalid input: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
