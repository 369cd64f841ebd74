#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>

#include "stablelab/billiard.hpp"
#include "stablelab/error.hpp"

namespace stablelab {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<double> numbers(const std::string& value, std::size_t expected, int line) {
  std::istringstream in(value);
  std::vector<double> out;
  std::string tok;
  while (in >> tok) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(tok, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != tok.size() || !std::isfinite(v)) {
      throw InvalidInput("table file line " + std::to_string(line) + ": bad number '" + tok + "'");
    }
    out.push_back(v);
  }
  if (out.size() != expected) {
    throw InvalidInput("table file line " + std::to_string(line) + ": expected " + std::to_string(expected) +
                       " numbers");
  }
  return out;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

TableSpec parse_table(std::istream& in) {
  TableSpec spec;
  std::string builtin;
  double beta = 3.0;
  double c = 1.0;
  double extent = 0.25;
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
      throw InvalidInput("table file line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "name") {
      spec.name = value;
    } else if (key == "builtin") {
      builtin = value;
    } else if (key == "beta") {
      beta = numbers(value, 1, lineno)[0];
    } else if (key == "c") {
      c = numbers(value, 1, lineno)[0];
    } else if (key == "extent") {
      extent = numbers(value, 1, lineno)[0];
    } else if (key == "cusp") {
      const auto v = numbers(value, 7, lineno);
      TableSpec::Cusp cusp;
      cusp.tip = {v[0], v[1]};
      cusp.axis_angle = v[2] * kDeg;
      cusp.spec = {v[3], v[4], v[5], v[6]};
      spec.cusps.push_back(cusp);
    } else if (key == "arc") {
      const auto v = numbers(value, 5, lineno);
      spec.arcs.push_back({{v[0], v[1]}, v[2], v[3] * kDeg, v[4] * kDeg});
    } else {
      throw InvalidInput("table file line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
  }
  if (!builtin.empty()) {
    if (builtin != "machta3") throw InvalidInput("unknown built-in table '" + builtin + "'");
    if (!spec.cusps.empty() || !spec.arcs.empty()) {
      throw InvalidInput("table file: builtin cannot be combined with cusp/arc lines");
    }
    TableSpec out = BilliardTable::machta3_spec(beta, c, extent);
    if (!spec.name.empty()) out.name = spec.name;
    return out;
  }
  return spec;
}

BilliardTable load_table(const std::string& path_or_name) {
  if (path_or_name == "machta3") return BilliardTable::machta3();
  std::ifstream in(path_or_name);
  if (!in) throw InvalidInput("cannot open table file '" + path_or_name + "'");
  return build_table(parse_table(in));
}

void write_table(std::ostream& out, const TableSpec& spec) {
  if (!spec.name.empty()) out << "name = " << spec.name << "\n";
  for (const auto& c : spec.cusps) {
    out << "cusp = " << fmt(c.tip.x) << " " << fmt(c.tip.y) << " " << fmt(c.axis_angle / kDeg) << " "
        << fmt(c.spec.beta) << " " << fmt(c.spec.c_plus) << " " << fmt(c.spec.c_minus) << " "
        << fmt(c.spec.extent) << "\n";
  }
  for (const auto& a : spec.arcs) {
    out << "arc = " << fmt(a.center.x) << " " << fmt(a.center.y) << " " << fmt(a.radius) << " "
        << fmt(a.angle_start / kDeg) << " " << fmt(a.angle_end / kDeg) << "\n";
  }
}

}  // namespace stablelab
