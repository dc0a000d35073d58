#include "butterfly/genie.hpp"

#include "butterfly/errors.hpp"

#include <Eigen/SVD>

#include <algorithm>

namespace butterfly::analysis {

namespace {

struct Membership {
  std::array<int, 4> source{};  // 0 none, 1 left, 2 right
  std::array<int, 3> relay{};   // 0 none, 1 left, 2 right, 3 bridge
};

constexpr int kNone = 0;
constexpr int kLeft = 1;
constexpr int kRight = 2;
constexpr int kBridge = 3;

// Group of the terminal hosting destination d.
int dest_group(const Membership& m, Dest d) { return m.source[index(co_located_source(d))]; }

int matrix_rank(const Eigen::MatrixXcd& m, double tol) {
  if (m.size() == 0) return 0;
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(m);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv[0] == 0.0) return 0;
  return static_cast<int>((sv.array() > tol * sv[0]).count());
}

// Rank of the channel from `from` group transmitters into the bridge and from
// the bridge into `to` group receivers; the smaller one limits the direction.
int direction_bound(const ChannelRealization& ch, const Membership& m, int from, int to,
                    double tol) {
  const Topology& topo = ch.topology();
  std::vector<Relay> bridge;
  int bridge_antennas = 0;
  for (Relay r : kRelays) {
    if (m.relay[index(r)] == kBridge) {
      bridge.push_back(r);
      bridge_antennas += topo.antennas(r);
    }
  }
  std::vector<Source> senders;
  for (Source s : kSources) {
    if (m.source[index(s)] == from) senders.push_back(s);
  }
  std::vector<Dest> receivers;
  for (Dest d : kDests) {
    if (dest_group(m, d) == to) receivers.push_back(d);
  }

  // Relays never hear other relays, so group relays contribute zero columns
  // into the bridge and zero rows out of it; only sources and destinations matter.
  Eigen::MatrixXcd into = Eigen::MatrixXcd::Zero(bridge_antennas, static_cast<Eigen::Index>(senders.size()));
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(receivers.size()), bridge_antennas);
  Eigen::Index offset = 0;
  for (Relay r : bridge) {
    const int n = topo.antennas(r);
    for (std::size_t c = 0; c < senders.size(); ++c) {
      if (topo.has_link(senders[c], r)) {
        into.block(offset, static_cast<Eigen::Index>(c), n, 1) = ch.uplink(senders[c], r);
      }
    }
    for (std::size_t row = 0; row < receivers.size(); ++row) {
      if (topo.has_link(r, receivers[row])) {
        out.block(static_cast<Eigen::Index>(row), offset, 1, n) = ch.downlink(r, receivers[row]).transpose();
      }
    }
    offset += n;
  }
  return std::min(matrix_rank(into, tol), matrix_rank(out, tol));
}

}  // namespace

std::string to_string(const Terminal& t) {
  return std::visit([](auto node) { return butterfly::to_string(node); }, t);
}

Terminal parse_terminal(std::string_view name) {
  for (Source s : kSources) {
    if (butterfly::to_string(s) == name) return s;
  }
  for (Relay r : kRelays) {
    if (butterfly::to_string(r) == name) return r;
  }
  throw InvalidCutError("unknown terminal '" + std::string(name) + "'");
}

GenieCut GenieCut::butterfly_preset() {
  return {{Source::S1, Relay::R1, Source::S4}, {Source::S2, Relay::R3, Source::S3}, {Relay::R2}};
}

GenieBound genie_cutset_bound(const GenieCut& cut, const ChannelRealization& ch, double rank_tol) {
  const Topology& topo = ch.topology();
  if (cut.bridge.empty()) throw InvalidCutError("bridge node set is empty");

  Membership m;
  GenieBound bound;
  auto place = [&](const Terminal& t, int group) {
    int* slot = nullptr;
    if (const auto* s = std::get_if<Source>(&t)) {
      slot = &m.source[index(*s)];
    } else {
      const Relay r = std::get<Relay>(t);
      if (!topo.has_relay(r)) throw InvalidCutError(to_string(t) + " is not part of " + topo.name());
      slot = &m.relay[index(r)];
    }
    if (*slot != kNone) throw InvalidCutError(to_string(t) + " appears in more than one group");
    *slot = group;
    const int antennas = std::holds_alternative<Relay>(t) ? topo.antennas(std::get<Relay>(t)) : 1;
    (group == kLeft ? bound.left_antennas : group == kRight ? bound.right_antennas : bound.bridge_antennas) +=
        antennas;
  };
  for (const auto& t : cut.left) place(t, kLeft);
  for (const auto& t : cut.right) place(t, kRight);
  for (Relay r : cut.bridge) place(Terminal{r}, kBridge);
  if (cut.left.empty() || cut.right.empty()) throw InvalidCutError("both groups need at least one terminal");

  // Separation: every link that leaves one group must land in the same group or the bridge.
  auto crosses = [](int a, int b) { return (a == kLeft && b == kRight) || (a == kRight && b == kLeft); };
  for (const auto& [s, r] : topo.uplinks()) {
    if (crosses(m.source[index(s)], m.relay[index(r)])) {
      throw InvalidCutError("link " + butterfly::to_string(s) + "->" + butterfly::to_string(r) +
                            " bypasses the bridge");
    }
  }
  for (const auto& [r, d] : topo.downlinks()) {
    if (crosses(m.relay[index(r)], dest_group(m, d))) {
      throw InvalidCutError("link " + butterfly::to_string(r) + "->" + butterfly::to_string(d) +
                            " bypasses the bridge");
    }
  }

  // A relay outside every group must not relay between the two groups either.
  for (Relay r : kRelays) {
    if (!topo.has_relay(r) || m.relay[index(r)] != kNone) continue;
    bool hears_left = false, hears_right = false, reaches_left = false, reaches_right = false;
    for (Source s : kSources) {
      if (!topo.has_link(s, r)) continue;
      hears_left |= m.source[index(s)] == kLeft;
      hears_right |= m.source[index(s)] == kRight;
    }
    for (Dest d : kDests) {
      if (!topo.has_link(r, d)) continue;
      reaches_left |= dest_group(m, d) == kLeft;
      reaches_right |= dest_group(m, d) == kRight;
    }
    if ((hears_left && reaches_right) || (hears_right && reaches_left)) {
      throw InvalidCutError("unassigned relay " + butterfly::to_string(r) + " joins the two groups");
    }
  }

  bound.forward = direction_bound(ch, m, kLeft, kRight, rank_tol);
  bound.reverse = direction_bound(ch, m, kRight, kLeft, rank_tol);
  bound.total = bound.forward + bound.reverse;
  return bound;
}

}  // namespace butterfly::analysis
