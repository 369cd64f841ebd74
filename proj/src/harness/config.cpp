#include "stablelab/harness/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "stablelab/error.hpp"

namespace stablelab::harness {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || v.empty() || !std::isfinite(out)) {
    throw InvalidInput("config key '" + key + "': expected a number, got '" + v + "'");
  }
  return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos) {
    // Allow 1e7 style integers.
    const double d = to_double(key, v);
    if (!(d >= 0.0) || d != std::floor(d) || d > 1.8e19) {
      throw InvalidInput("config key '" + key + "': expected a non-negative integer, got '" + v + "'");
    }
    return static_cast<std::uint64_t>(d);
  }
  try {
    return std::stoull(v);
  } catch (const std::exception&) {
    throw InvalidInput("config key '" + key + "': integer out of range");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw InvalidInput("config key '" + key + "': expected true or false");
}

std::vector<double> to_list(const std::string& key, const std::string& v) {
  std::istringstream in(v);
  std::vector<double> out;
  std::string tok;
  while (in >> tok) out.push_back(to_double(key, tok));
  return out;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

const std::set<std::string> kExtraKeys = {
    "returns",   "hill.k",    "hill.threshold", "pp.replicas", "pp.n",     "pp.threshold", "pp.marks",
    "pp.x0",     "sv.eps",    "sv.n",           "sv.orbits",   "sv.k",     "ms.eps",       "ms.grid",
    "ms.replicas", "kar.eps", "kar.n",          "kar.strata",  "samples",  "bins.r",       "bins.theta",
    "pilot.returns", "pilot.radius", "induced.burn_returns", "sv.length", "sv.control"};

}  // namespace

const char* system_name(SystemKind kind) { return kind == SystemKind::lsv ? "lsv" : "billiard"; }

const char* mode_name(RunMode mode) {
  switch (mode) {
    case RunMode::full:
      return "full";
    case RunMode::induced:
      return "induced";
    case RunMode::both:
      return "both";
  }
  return "full";
}

std::vector<std::uint64_t> geometric_grid(std::uint64_t start, std::uint64_t ratio, int points) {
  if (start < 1 || ratio < 2 || points < 1) throw InvalidInput("grid: need start >= 1, ratio >= 2, points >= 1");
  std::vector<std::uint64_t> g;
  std::uint64_t v = start;
  for (int i = 0; i < points; ++i) {
    g.push_back(v);
    if (i + 1 < points && v > UINT64_MAX / ratio) throw InvalidInput("grid: overflow");
    v *= ratio;
  }
  return g;
}

ExperimentConfig parse_config(std::istream& in) {
  ExperimentConfig c;
  std::set<std::string> seen;
  std::optional<std::uint64_t> gstart, gratio;
  std::optional<int> gpoints;
  bool have_dimension = false;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw InvalidInput("config line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string v = trim(line.substr(eq + 1));
    if (key != "observable.pole" && !seen.insert(key).second) {
      throw InvalidInput("config line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    }
    if (key == "system") {
      if (v == "lsv") {
        c.system = SystemKind::lsv;
      } else if (v == "billiard") {
        c.system = SystemKind::billiard;
      } else {
        throw InvalidInput("config: system must be lsv or billiard");
      }
    } else if (key == "lsv.gamma") {
      c.gamma = to_double(key, v);
    } else if (key == "billiard.table") {
      c.table = v;
    } else if (key == "billiard.k0") {
      c.k0 = static_cast<int>(to_u64(key, v));
    } else if (key == "observable.alpha") {
      c.observable.alpha = to_double(key, v);
    } else if (key == "observable.dimension") {
      c.observable.dimension = static_cast<int>(to_u64(key, v));
      have_dimension = true;
    } else if (key == "observable.shift") {
      c.observable.shift = to_double(key, v);
    } else if (key == "observable.pole") {
      const auto nums = to_list(key, v);
      Pole p;
      if (nums.size() == 2) {
        p.x = nums[0];
        p.coefficient = nums[1];
      } else if (nums.size() == 3) {
        p.x = nums[0];
        p.theta = nums[1];
        p.coefficient = nums[2];
      } else {
        throw InvalidInput("config: observable.pole takes 'x coeff' or 'r theta coeff'");
      }
      c.observable.poles.push_back(p);
    } else if (key == "observable.balanced") {
      c.balanced = to_bool(key, v);
    } else if (key == "observable.vanishes_near_cusps") {
      c.vanishes_near_cusps = to_bool(key, v);
    } else if (key == "grid") {
      for (double d : to_list(key, v)) {
        if (!(d >= 1.0) || d != std::floor(d)) throw InvalidInput("config: grid entries must be positive integers");
        c.grid.push_back(static_cast<std::uint64_t>(d));
      }
    } else if (key == "grid.start") {
      gstart = to_u64(key, v);
    } else if (key == "grid.ratio") {
      gratio = to_u64(key, v);
    } else if (key == "grid.points") {
      gpoints = static_cast<int>(to_u64(key, v));
    } else if (key == "replicas") {
      c.replicas = to_u64(key, v);
    } else if (key == "seed") {
      c.seed = to_u64(key, v);
    } else if (key == "burn_in") {
      c.burn_in = to_u64(key, v);
    } else if (key == "mode") {
      if (v == "full") {
        c.mode = RunMode::full;
      } else if (v == "induced") {
        c.mode = RunMode::induced;
      } else if (v == "both") {
        c.mode = RunMode::both;
      } else {
        throw InvalidInput("config: mode must be full, induced or both");
      }
    } else if (key == "mean.steps") {
      c.mean_steps = to_u64(key, v);
    } else if (key == "accept.tolerance") {
      c.tolerance = to_double(key, v);
    } else if (key == "out") {
      c.out_dir = v;
    } else if (kExtraKeys.count(key)) {
      c.extra[key] = v;
    } else {
      throw InvalidInput("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
  }
  if (gstart || gratio || gpoints) {
    if (!c.grid.empty()) throw InvalidInput("config: give either grid or grid.start/ratio/points");
    c.grid = geometric_grid(gstart.value_or(4096), gratio.value_or(2), gpoints.value_or(9));
  }
  if (!have_dimension) c.observable.dimension = c.system == SystemKind::billiard ? 2 : 1;
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open config file '" + path + "'");
  return parse_config(in);
}

void ExperimentConfig::validate() const {
  if (!seed) throw InvalidInput("config: seed is mandatory");
  if (grid.size() < 4) throw InvalidInput("config: grid needs at least 4 points");
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (grid[i] <= grid[i - 1]) throw InvalidInput("config: grid must be increasing");
  }
  const double r = static_cast<double>(grid[1]) / static_cast<double>(grid[0]);
  for (std::size_t i = 1; i < grid.size(); ++i) {
    const double ri = static_cast<double>(grid[i]) / static_cast<double>(grid[i - 1]);
    if (std::fabs(ri - r) > 1e-9 * r) throw InvalidInput("config: grid must be geometric");
  }
  if (replicas < 200) throw InvalidInput("config: replicas must be >= 200");
  observable.validate(true);
  if (system == SystemKind::lsv) {
    if (!(gamma > 0.0 && gamma < 1.0)) throw InvalidInput("config: lsv.gamma must lie in (0,1)");
    if (observable.dimension != 1) throw InvalidInput("config: interval observables have dimension 1");
    for (const Pole& p : observable.poles) {
      if (!(p.x >= 0.0 && p.x <= 1.0)) throw InvalidInput("config: interval pole outside [0,1]");
    }
  } else {
    if (k0 < 1) throw InvalidInput("config: billiard.k0 must be >= 1");
    if (observable.dimension != 2) throw InvalidInput("config: billiard observables have dimension 2");
  }
  if (!(tolerance > 0.0)) throw InvalidInput("config: accept.tolerance must be positive");
}

std::string ExperimentConfig::canonical() const {
  std::ostringstream o;
  o << "system = " << system_name(system) << "\n";
  if (system == SystemKind::lsv) {
    o << "lsv.gamma = " << fmt(gamma) << "\n";
  } else {
    o << "billiard.table = " << table << "\nbilliard.k0 = " << k0 << "\n";
  }
  o << "observable.alpha = " << fmt(observable.alpha) << "\n";
  o << "observable.dimension = " << observable.dimension << "\n";
  o << "observable.shift = " << fmt(observable.shift) << "\n";
  for (const Pole& p : observable.poles) {
    o << "observable.pole = " << fmt(p.x);
    if (system == SystemKind::billiard) o << " " << fmt(p.theta);
    o << " " << fmt(p.coefficient) << "\n";
  }
  if (balanced) o << "observable.balanced = " << (*balanced ? "true" : "false") << "\n";
  if (vanishes_near_cusps) o << "observable.vanishes_near_cusps = true\n";
  o << "grid =";
  for (auto g : grid) o << " " << g;
  o << "\nreplicas = " << replicas << "\n";
  if (seed) o << "seed = " << *seed << "\n";
  o << "burn_in = " << burn_in << "\nmode = " << mode_name(mode) << "\nmean.steps = " << mean_steps
    << "\naccept.tolerance = " << fmt(tolerance) << "\n";
  for (const auto& [k, v] : extra) o << k << " = " << v << "\n";
  return o.str();
}

double ExperimentConfig::extra_double(const std::string& key, double fallback) const {
  const auto it = extra.find(key);
  return it == extra.end() ? fallback : to_double(key, it->second);
}

std::uint64_t ExperimentConfig::extra_u64(const std::string& key, std::uint64_t fallback) const {
  const auto it = extra.find(key);
  return it == extra.end() ? fallback : to_u64(key, it->second);
}

std::vector<double> ExperimentConfig::extra_list(const std::string& key, std::vector<double> fallback) const {
  const auto it = extra.find(key);
  return it == extra.end() ? fallback : to_list(key, it->second);
}

std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace stablelab::harness
