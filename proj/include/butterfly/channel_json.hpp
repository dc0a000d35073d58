#pragma once

#include "butterfly/netmodel.hpp"

#include <json.hpp>

namespace butterfly {

/// [re, im]
nlohmann::json complex_to_json(Complex z);
Complex complex_from_json(const nlohmann::json& j);

/**
 * Channel file layout:
 *   {"variant": "MultiAntennaRelay(3)", "seed": 7, "h_min": 0.5, "h_max": 2.0,
 *    "coefficients": {"S1->R2": [[re, im], ...], "R1->D2": [re, im], ...}}
 * Single-antenna links are one [re, im] pair; center-relay links of a
 * multi-antenna topology are a list of pairs, one per antenna.
 */
nlohmann::json channels_to_json(const ChannelRealization& ch);
ChannelRealization channels_from_json(const nlohmann::json& j);

}  // namespace butterfly
