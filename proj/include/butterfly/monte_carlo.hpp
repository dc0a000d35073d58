#pragma once

#include <cstdint>
#include <string_view>

namespace butterfly::analysis {

enum class SchemeId { kNoCache, kCache, kMimo };

/// "no_cache", "cache", "mimo"; anything else is a ConfigError.
SchemeId parse_scheme_id(std::string_view name);

/**
 * Largest relative leakage of an unwanted stream over `n_trials` random
 * realizations, measured by pushing unit probe symbols through the two hops
 * with noise disabled.
 *
 *  - cache: |cross-stream coefficient| / (h_max ||relay coefficients||)
 *  - mimo (3 relay antennas): |H_{R2,d} V2 H_{s,R2}| / (h_max^2 ||V2||_F)
 *  - no_cache: co-located term left after the destination subtracts it
 *
 * Realizations rejected as degenerate are resampled.
 */
double monte_carlo_residual(SchemeId scheme, int n_trials, std::uint64_t seed);

}  // namespace butterfly::analysis
