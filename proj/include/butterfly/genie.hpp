/**
 * @file genie.hpp
 * @brief Genie-aided cut bound on the sum DoF.
 *
 * The genie merges a group of sources and relays (each source together with
 * its co-located destination) into one multi-antenna super-node. When two such
 * groups can only talk through a set of bridge relays, each direction carries
 * at most min(rank into the bridge, rank out of the bridge) streams.
 */
#pragma once

#include "butterfly/netmodel.hpp"

#include <variant>
#include <vector>

namespace butterfly::analysis {

/// A source stands for the two-way terminal {S_i, its co-located destination}.
using Terminal = std::variant<Source, Relay>;

std::string to_string(const Terminal& t);
/// "S1".."S4" or "R1".."R3".
Terminal parse_terminal(std::string_view name);

struct GenieCut {
  std::vector<Terminal> left;
  std::vector<Terminal> right;
  std::vector<Relay> bridge;

  /// {S1, R1, S4} | {S2, R3, S3} through R2.
  static GenieCut butterfly_preset();
};

struct GenieBound {
  int left_antennas = 0;
  int right_antennas = 0;
  int bridge_antennas = 0;
  int forward = 0;  // left -> right
  int reverse = 0;  // right -> left
  int total = 0;
};

/// Terminals listed in no group are silent. Throws InvalidCutError when the groups overlap, the bridge is empty, a
/// terminal is missing from the topology, or a link joins the two groups
/// without passing through the bridge.
GenieBound genie_cutset_bound(const GenieCut& cut, const ChannelRealization& ch,
                              double rank_tol = 1e-9);

}  // namespace butterfly::analysis
