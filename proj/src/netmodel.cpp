#include "butterfly/netmodel.hpp"

#include "butterfly/errors.hpp"
#include "butterfly/keyed_stream.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>

namespace butterfly {

namespace {

constexpr std::uint16_t kRelayNodeBase = 4;
constexpr std::uint16_t kDestNodeBase = 7;

int parse_antennas(std::string_view digits, std::string_view whole) {
  int n = 0;
  const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), n);
  if (ec != std::errc{} || ptr != digits.data() + digits.size() || n < 1) {
    throw ConfigError("invalid antenna count in topology '" + std::string(whole) + "'");
  }
  return n;
}

void check_magnitudes(const Eigen::VectorXcd& h, double h_min, double h_max,
                      const std::string& label) {
  for (Eigen::Index i = 0; i < h.size(); ++i) {
    const double mag = std::abs(h[i]);
    if (!(mag > h_min && mag < h_max)) {
      throw ConfigError("coefficient " + label + " has magnitude " + std::to_string(mag) +
                        " outside (" + std::to_string(h_min) + ", " + std::to_string(h_max) +
                        ")");
    }
  }
}

}  // namespace

std::string to_string(Source s) { return "S" + std::to_string(index(s) + 1); }
std::string to_string(Relay r) { return "R" + std::to_string(index(r) + 1); }
std::string to_string(Dest d) { return "D" + std::to_string(index(d) + 1); }

// ---------------------------------------------------------------------------
// Topology

Topology Topology::single_antenna() { return Topology(Kind::kSingleAntennaRelay, 1); }

Topology Topology::multi_antenna(int n_antennas) {
  if (n_antennas < 1) throw ConfigError("relay antenna count must be positive");
  return Topology(Kind::kMultiAntennaRelay, n_antennas);
}

Topology Topology::multi_antenna_only(int n_antennas) {
  if (n_antennas < 1) throw ConfigError("relay antenna count must be positive");
  return Topology(Kind::kMultiAntennaRelayOnly, n_antennas);
}

Topology Topology::parse(std::string_view text) {
  if (text == "single" || text == "SingleAntennaRelay") return single_antenna();
  auto with_count = [&](std::string_view prefix, std::string_view suffix) -> std::optional<int> {
    if (text.size() <= prefix.size() + suffix.size() || !text.starts_with(prefix) ||
        !text.ends_with(suffix)) {
      return std::nullopt;
    }
    return parse_antennas(text.substr(prefix.size(), text.size() - prefix.size() - suffix.size()),
                          text);
  };
  if (auto n = with_count("mimo_only:", "")) return multi_antenna_only(*n);
  if (auto n = with_count("mimo:", "")) return multi_antenna(*n);
  if (auto n = with_count("MultiAntennaRelayOnly(", ")")) return multi_antenna_only(*n);
  if (auto n = with_count("MultiAntennaRelay(", ")")) return multi_antenna(*n);
  throw ConfigError("unknown topology '" + std::string(text) + "'");
}

bool Topology::has_relay(Relay r) const {
  return r == Relay::R2 || kind_ != Kind::kMultiAntennaRelayOnly;
}

int Topology::antennas(Relay r) const {
  if (!has_relay(r)) return 0;
  return r == Relay::R2 ? n_antennas_ : 1;
}

bool Topology::has_link(Source s, Relay r) const {
  return has_relay(r) && std::ranges::any_of(kUplinks, [&](const UplinkPair& p) {
           return p.source == s && p.relay == r;
         });
}

bool Topology::has_link(Relay r, Dest d) const {
  return has_relay(r) && std::ranges::any_of(kDownlinks, [&](const DownlinkPair& p) {
           return p.relay == r && p.dest == d;
         });
}

std::vector<UplinkPair> Topology::uplinks() const {
  std::vector<UplinkPair> out;
  for (const auto& p : kUplinks) {
    if (has_relay(p.relay)) out.push_back(p);
  }
  return out;
}

std::vector<DownlinkPair> Topology::downlinks() const {
  std::vector<DownlinkPair> out;
  for (const auto& p : kDownlinks) {
    if (has_relay(p.relay)) out.push_back(p);
  }
  return out;
}

std::string Topology::name() const {
  switch (kind_) {
    case Kind::kSingleAntennaRelay:
      return "SingleAntennaRelay";
    case Kind::kMultiAntennaRelay:
      return "MultiAntennaRelay(" + std::to_string(n_antennas_) + ")";
    case Kind::kMultiAntennaRelayOnly:
      return "MultiAntennaRelayOnly(" + std::to_string(n_antennas_) + ")";
  }
  return {};
}

// ---------------------------------------------------------------------------
// ChannelRealization

ChannelRealization::ChannelRealization(Topology topology, std::uint64_t seed, double h_min,
                                       double h_max, UplinkTable uplinks, DownlinkTable downlinks)
    : topology_(topology),
      seed_(seed),
      h_min_(h_min),
      h_max_(h_max),
      up_(std::move(uplinks)),
      down_(std::move(downlinks)) {
  if (!(h_min > 0.0) || !(h_min < h_max) || !std::isfinite(h_max)) {
    throw ConfigError("channel bounds require 0 < h_min < h_max");
  }
  for (Source s : kSources) {
    for (Relay r : kRelays) {
      const auto& h = up_[index(s)][index(r)];
      const std::string label = to_string(s) + "->" + to_string(r);
      if (!topology_.has_link(s, r)) {
        if (h) throw ShapeError("coefficient given for absent link " + label);
        continue;
      }
      if (!h) throw ShapeError("missing coefficient for link " + label);
      if (h->size() != topology_.antennas(r)) throw ShapeError("wrong antenna count on " + label);
      check_magnitudes(*h, h_min_, h_max_, label);
    }
  }
  for (Relay r : kRelays) {
    for (Dest d : kDests) {
      const auto& h = down_[index(r)][index(d)];
      const std::string label = to_string(r) + "->" + to_string(d);
      if (!topology_.has_link(r, d)) {
        if (h) throw ShapeError("coefficient given for absent link " + label);
        continue;
      }
      if (!h) throw ShapeError("missing coefficient for link " + label);
      if (h->size() != topology_.antennas(r)) throw ShapeError("wrong antenna count on " + label);
      check_magnitudes(*h, h_min_, h_max_, label);
    }
  }
}

const Eigen::VectorXcd& ChannelRealization::uplink(Source s, Relay r) const {
  const auto& h = up_[index(s)][index(r)];
  if (!h) throw ShapeError("no link " + to_string(s) + "->" + to_string(r));
  return *h;
}

const Eigen::VectorXcd& ChannelRealization::downlink(Relay r, Dest d) const {
  const auto& h = down_[index(r)][index(d)];
  if (!h) throw ShapeError("no link " + to_string(r) + "->" + to_string(d));
  return *h;
}

Complex ChannelRealization::uplink_scalar(Source s, Relay r) const {
  const auto& h = uplink(s, r);
  if (h.size() != 1) throw ShapeError("link " + to_string(s) + "->" + to_string(r) + " is a vector");
  return h[0];
}

Complex ChannelRealization::downlink_scalar(Relay r, Dest d) const {
  const auto& h = downlink(r, d);
  if (h.size() != 1) throw ShapeError("link " + to_string(r) + "->" + to_string(d) + " is a vector");
  return h[0];
}

ChannelRealization ChannelRealization::without_side_relays() const {
  if (topology_.is_single_antenna()) {
    throw UnsupportedSchemeError("side relays can only be dropped from multi-antenna topologies");
  }
  UplinkTable up;
  DownlinkTable down;
  for (Source s : kSources) up[index(s)][index(Relay::R2)] = up_[index(s)][index(Relay::R2)];
  for (Dest d : kDests) down[index(Relay::R2)][index(d)] = down_[index(Relay::R2)][index(d)];
  return ChannelRealization(Topology::multi_antenna_only(topology_.center_antennas()), seed_,
                            h_min_, h_max_, std::move(up), std::move(down));
}

// ---------------------------------------------------------------------------
// ChannelBuilder

ChannelBuilder::ChannelBuilder(Topology topology, double h_min, double h_max)
    : topology_(topology), h_min_(h_min), h_max_(h_max) {}

ChannelBuilder ChannelBuilder::filled(Topology topology, Complex value, double h_min,
                                      double h_max) {
  ChannelBuilder b(topology, h_min, h_max);
  for (const auto& [s, r] : topology.uplinks()) {
    b.uplink(s, r, Eigen::VectorXcd::Constant(topology.antennas(r), value));
  }
  for (const auto& [r, d] : topology.downlinks()) {
    b.downlink(r, d, Eigen::VectorXcd::Constant(topology.antennas(r), value));
  }
  return b;
}

ChannelBuilder& ChannelBuilder::seed(std::uint64_t seed) {
  seed_ = seed;
  return *this;
}

ChannelBuilder& ChannelBuilder::uplink(Source s, Relay r, Eigen::VectorXcd h) {
  up_[index(s)][index(r)] = std::move(h);
  return *this;
}

ChannelBuilder& ChannelBuilder::uplink(Source s, Relay r, Complex h) {
  return uplink(s, r, Eigen::VectorXcd::Constant(1, h));
}

ChannelBuilder& ChannelBuilder::downlink(Relay r, Dest d, Eigen::VectorXcd h) {
  down_[index(r)][index(d)] = std::move(h);
  return *this;
}

ChannelBuilder& ChannelBuilder::downlink(Relay r, Dest d, Complex h) {
  return downlink(r, d, Eigen::VectorXcd::Constant(1, h));
}

ChannelRealization ChannelBuilder::build() const {
  return ChannelRealization(topology_, seed_, h_min_, h_max_, up_, down_);
}

// ---------------------------------------------------------------------------
// Sampling

ChannelRealization sample_channels(const Topology& topology, std::uint64_t seed, double h_min,
                                   double h_max) {
  if (!(h_min > 0.0) || !(h_min < h_max) || !std::isfinite(h_max)) {
    throw ConfigError("channel bounds require 0 < h_min < h_max");
  }
  KeyedStream stream(seed, StreamDomain::kChannel, 0, 0);
  auto draw = [&](int n) {
    Eigen::VectorXcd h(n);
    for (int i = 0; i < n; ++i) {
      double mag = 0.0;
      // Rounding can land exactly on a bound; the bounds are strict.
      do {
        mag = h_min + (h_max - h_min) * stream.uniform_open();
      } while (!(mag > h_min && mag < h_max));
      const double phase = 2.0 * std::numbers::pi * stream.uniform_open();
      h[i] = std::polar(mag, phase);
    }
    return h;
  };

  ChannelBuilder builder(topology, h_min, h_max);
  builder.seed(seed);
  for (const auto& [s, r] : topology.uplinks()) builder.uplink(s, r, draw(topology.antennas(r)));
  for (const auto& [r, d] : topology.downlinks()) builder.downlink(r, d, draw(topology.antennas(r)));
  return builder.build();
}

// ---------------------------------------------------------------------------
// Propagation

RelaySignals zero_relay_signals(const Topology& topology) {
  RelaySignals out;
  for (Relay r : kRelays) out[index(r)] = Eigen::VectorXcd::Zero(topology.antennas(r));
  return out;
}

RelaySignals first_hop(const ChannelRealization& ch, const SourceSymbols& x,
                       const RelaySignals& noise) {
  const Topology& topo = ch.topology();
  RelaySignals y;
  for (Relay r : kRelays) {
    const int n = topo.antennas(r);
    if (noise[index(r)].size() != n) {
      throw ShapeError("relay noise for " + to_string(r) + " has size " +
                       std::to_string(noise[index(r)].size()) + ", expected " +
                       std::to_string(n));
    }
    Eigen::VectorXcd acc = Eigen::VectorXcd::Zero(n);
    for (Source s : kSources) {
      if (topo.has_link(s, r)) acc += ch.uplink(s, r) * x[index(s)];
    }
    y[index(r)] = acc + noise[index(r)];
  }
  return y;
}

DestSymbols second_hop(const ChannelRealization& ch, const RelaySignals& x_relay,
                       const DestSymbols& noise) {
  const Topology& topo = ch.topology();
  for (Relay r : kRelays) {
    if (x_relay[index(r)].size() != topo.antennas(r)) {
      throw ShapeError("transmit signal for " + to_string(r) + " has size " +
                       std::to_string(x_relay[index(r)].size()) + ", expected " +
                       std::to_string(topo.antennas(r)));
    }
  }
  DestSymbols y{};
  for (Dest d : kDests) {
    Complex acc{0.0, 0.0};
    for (Relay r : kRelays) {
      if (!topo.has_link(r, d)) continue;
      const Eigen::VectorXcd& h = ch.downlink(r, d);
      const Eigen::VectorXcd& xr = x_relay[index(r)];
      for (Eigen::Index j = 0; j < h.size(); ++j) acc += h[j] * xr[j];
    }
    y[index(d)] = acc + noise[index(d)];
  }
  return y;
}

RelaySignals relay_noise(const Topology& topology, std::uint64_t seed, std::uint64_t slot) {
  RelaySignals out;
  for (Relay r : kRelays) {
    const int n = topology.antennas(r);
    Eigen::VectorXcd z(n);
    KeyedStream stream(seed, StreamDomain::kNoise,
                       static_cast<std::uint16_t>(kRelayNodeBase + index(r)), slot);
    for (int i = 0; i < n; ++i) z[i] = stream.complex_gaussian();
    out[index(r)] = std::move(z);
  }
  return out;
}

DestSymbols destination_noise(std::uint64_t seed, std::uint64_t slot) {
  DestSymbols out{};
  for (Dest d : kDests) {
    KeyedStream stream(seed, StreamDomain::kNoise,
                       static_cast<std::uint16_t>(kDestNodeBase + index(d)), slot);
    out[index(d)] = stream.complex_gaussian();
  }
  return out;
}

MessageSet generate_messages(std::size_t length, std::uint64_t seed) {
  MessageSet msgs;
  for (Source s : kSources) {
    KeyedStream stream(seed, StreamDomain::kMessage, static_cast<std::uint16_t>(index(s)), 0);
    Bits bits(length);
    std::uint64_t word = 0;
    for (std::size_t i = 0; i < length; ++i) {
      if (i % 64 == 0) word = stream.next_u64();
      bits[i] = static_cast<std::uint8_t>((word >> (i % 64)) & 1U);
    }
    msgs.w[index(s)] = std::move(bits);
  }
  return msgs;
}

}  // namespace butterfly
