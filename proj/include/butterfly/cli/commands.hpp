#pragma once

#include "butterfly/analysis.hpp"
#include "butterfly/cli/config.hpp"
#include "butterfly/netmodel.hpp"

#include <json.hpp>

#include <iosfwd>
#include <vector>

namespace butterfly::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitDegenerate = 3;
inline constexpr int kExitVerification = 4;

/// Result of sweeping one realization over the power grid.
struct SweepResult {
  std::uint64_t requested_seed = 0;
  ChannelRealization channels;
  std::vector<analysis::RatePoint> points;
  analysis::DofEstimate dof;
  /// Scheme report(s) and beamformers at the highest grid power.
  nlohmann::json report;
};

/// Sweeps the configured scheme for one seed, resampling degenerate
/// realizations up to `max_resamples` times.
SweepResult sweep_realization(const SimulationConfig& config, std::uint64_t seed);

/// Entry point shared by the executable and the tests. Returns the exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace butterfly::cli
