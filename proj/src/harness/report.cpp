#include "stablelab/harness/report.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace stablelab::harness {

namespace {

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

nlohmann::json number(double v) {
  if (std::isfinite(v)) return v;
  return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
}

nlohmann::json quarantine_json(const Quarantine& q) {
  return {{"pole_hits", q.pole_hits},
          {"grazing", q.grazing},
          {"precision_exhausted", q.precision},
          {"other", q.other},
          {"total", q.total()}};
}

nlohmann::json run_json(const RunOutcome& r) {
  nlohmann::json j;
  j["route"] = r.route;
  j["replicas_kept"] = r.ensemble.replicas();
  j["discarded"] = quarantine_json(r.quarantine);
  j["discarded_fraction"] = r.quarantined_fraction();
  j["fit_ok"] = r.fit_ok;
  if (!r.fit_ok) {
    j["fit_error"] = r.fit_error;
    return j;
  }
  j["theta_hat"] = r.fit.theta_hat;
  j["theta_std_error"] = r.fit.std_error;
  j["theta_bootstrap_se"] = r.bootstrap_se;
  j["r_squared"] = r.fit.r_squared;
  if (r.have_self_similarity) {
    j["self_similarity"] = {{"statistic", r.self_similarity.statistic},
                            {"critical", r.self_similarity.critical},
                            {"passed", r.self_similarity.passed}};
  }
  if (r.ks_stable_critical > 0.0) j["ks_stable_oracle"] = {{"distance", r.ks_stable}, {"critical", r.ks_stable_critical}};
  return j;
}

}  // namespace

std::string ensemble_csv(const SumEnsemble& e) {
  std::string out = "n,replica,value\n";
  for (std::size_t k = 0; k < e.grid.size(); ++k) {
    const std::string n = std::to_string(e.grid[k]) + ",";
    for (std::size_t i = 0; i < e.values[k].size(); ++i) {
      out += n;
      out += std::to_string(i);
      out += ",";
      out += g17(e.values[k][i]);
      out += "\n";
    }
  }
  return out;
}

nlohmann::json tail_json(const TailFit& f) {
  nlohmann::json j = {{"alpha_hat", number(f.hill.alpha)},
                      {"k", f.hill.k},
                      {"ci", {number(f.ci_low), number(f.ci_high)}},
                      {"samples", f.samples},
                      {"discarded", f.discarded}};
  if (f.threshold > 0.0) j["threshold"] = f.threshold;
  nlohmann::json st = nlohmann::json::array();
  for (const HillResult& h : f.stability) st.push_back({{"k", h.k}, {"alpha_hat", number(h.alpha)}});
  j["k_stability"] = st;
  return j;
}

nlohmann::json summary_json(const ExperimentResult& r) {
  nlohmann::json j;
  const std::string canon = r.config.canonical();
  char hash[17];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(fnv1a64(canon)));
  j["config_hash"] = hash;
  j["system"] = system_name(r.config.system);
  j["mode"] = mode_name(r.config.mode);
  if (r.config.seed) j["seed"] = *r.config.seed;
  if (r.runs.empty()) {
    j["status"] = "no-data";
    return j;
  }
  j["status"] = r.passed() ? "pass" : "fail";
  if (r.predicted) {
    j["predicted"] = {{"case", case_name(r.predicted->case_id)},
                      {"stable_index", r.predicted->stable_index},
                      {"scaling_exponent", r.predicted->scaling_exponent},
                      {"asserted", r.predicted->asserted},
                      {"notes", r.predicted->notes}};
  } else {
    j["predicted"] = nullptr;
  }
  j["centering_mean"] = {{"value", number(r.mean.mean)}, {"std_error", r.mean.std_error}};
  if (r.measure) j["inducing_set_measure"] = {{"value", r.measure->value}, {"std_error", r.measure->std_error}};
  nlohmann::json runs = nlohmann::json::array();
  Quarantine all;
  for (const RunOutcome& run : r.runs) {
    runs.push_back(run_json(run));
    all.add(run.quarantine);
  }
  j["runs"] = runs;
  j["discarded_replicas"] = all.total();
  j["grazing_orbits"] = all.grazing;
  if (r.consistency) {
    const ConsistencyReport& c = *r.consistency;
    j["lifting"] = {{"theta_full", c.theta_full}, {"se_full", c.se_full}, {"theta_induced", c.theta_induced},
                    {"se_induced", c.se_induced}, {"z", c.z}, {"ks_distance", c.ks_distance},
                    {"ks_critical", c.ks_critical}, {"agree", c.agree}};
  }
  nlohmann::json rules = nlohmann::json::array();
  for (const Rule& rule : r.rules) rules.push_back({{"rule", rule.name}, {"passed", rule.passed}, {"detail", rule.detail}});
  j["rules"] = rules;
  return j;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path);
}

void write_json(const std::string& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

void write_columns(const std::string& path, const std::vector<std::pair<double, double>>& rows) {
  std::string text;
  for (const auto& [a, b] : rows) text += g17(a) + " " + g17(b) + "\n";
  write_text(path, text);
}

void emit_report(const ExperimentResult& result, const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create " + dir + ": " + ec.message());
  for (const RunOutcome& run : result.runs) {
    write_text(dir + "/ensemble_" + run.route + ".csv", ensemble_csv(run.ensemble));
    if (run.fit_ok) {
      std::vector<std::pair<double, double>> rows;
      for (std::size_t k = 0; k < run.ensemble.grid.size(); ++k)
        rows.emplace_back(std::log(static_cast<double>(run.ensemble.grid[k])), std::log(run.fit.spreads[k]));
      write_columns(dir + "/fit_" + run.route + ".dat", rows);
    }
  }
  write_json(dir + "/summary.json", summary_json(result));
}

}  // namespace stablelab::harness
