#pragma once

// Experiment configuration: a `key = value` text file with `#` comments.
// Repeated keys (observable.pole) accumulate; every other key may appear
// once. Unknown keys are rejected.

#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "stablelab/observables.hpp"

namespace stablelab::harness {

enum class SystemKind { lsv, billiard };
enum class RunMode { full, induced, both };

const char* system_name(SystemKind kind);
const char* mode_name(RunMode mode);

struct ExperimentConfig {
  SystemKind system = SystemKind::lsv;
  double gamma = 0.0;              // lsv.gamma
  std::string table = "machta3";   // billiard.table: built-in name or file path
  int k0 = 100;                    // billiard.k0
  ObservableSpec observable;
  /// observable.balanced: caller asserts phi(0) = mu(phi) (LSV case c).
  std::optional<bool> balanced;
  bool vanishes_near_cusps = false;
  std::vector<std::uint64_t> grid;
  std::size_t replicas = 2000;
  std::optional<std::uint64_t> seed;
  std::uint64_t burn_in = 10000;
  RunMode mode = RunMode::full;
  std::uint64_t mean_steps = 10000000;
  double tolerance = 0.05;  // accept.tolerance on the scaling exponent
  std::string out_dir;
  /// Subcommand parameters (returns, eps, n, ...), kept verbatim.
  std::map<std::string, std::string> extra;

  /// Throws InvalidInput unless the grid is geometric with >= 4 points,
  /// replicas >= 200 and a seed is present.
  void validate() const;
  /// Normalized text form; the config hash is taken over it.
  std::string canonical() const;

  double extra_double(const std::string& key, double fallback) const;
  std::uint64_t extra_u64(const std::string& key, std::uint64_t fallback) const;
  std::vector<double> extra_list(const std::string& key, std::vector<double> fallback) const;
};

/// Parses without validating, so subcommands can fill gaps from flags first.
ExperimentConfig parse_config(std::istream& in);
ExperimentConfig load_config(const std::string& path);

/// grid = a b c ... or grid.start / grid.ratio / grid.points.
std::vector<std::uint64_t> geometric_grid(std::uint64_t start, std::uint64_t ratio, int points);

std::uint64_t fnv1a64(const std::string& text);

}  // namespace stablelab::harness
