#pragma once

#include "butterfly/netmodel.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace butterfly::cli {

enum class SchemeKind { kNoCache, kCache, kCachePartial, kMimo, kMimoNoSide };

SchemeKind parse_scheme(std::string_view name);
std::string to_string(SchemeKind scheme);

struct PowerGrid {
  double start_db = 40.0;
  double stop_db = 100.0;
  double step_db = 10.0;
};

/// "start:stop:step" in dB.
PowerGrid parse_power_grid(std::string_view text);

struct SimulationConfig {
  SchemeKind scheme = SchemeKind::kCache;
  /// Cached fraction p for cache_partial.
  double fraction = 1.0;
  /// Defaults to the topology the scheme is defined on.
  std::optional<Topology> topology;
  PowerGrid grid;
  std::uint64_t seed = 1;
  /// Realizations for simulate, Monte Carlo trials for verify.
  std::optional<int> trials;
  double tol_residual = 1e-9;
  double tol_rank = 1e-9;
  double tol_slope = 0.1;
  std::string out_dir = "butterfly_out";
  int max_resamples = 8;

  Topology resolved_topology() const;
  /// Throws ConfigError on out-of-range values or a scheme/topology mismatch.
  void validate() const;
};

/**
 * Keys: scheme, p, topology, pdb ("40:100:10"), seed, trials, out,
 * tolerances {residual, rank, slope}, max_resamples. Missing keys keep their
 * defaults; unknown keys are rejected.
 */
SimulationConfig config_from_json(const nlohmann::json& j);
SimulationConfig load_config(const std::string& path);

}  // namespace butterfly::cli
