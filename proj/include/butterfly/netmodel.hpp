/**
 * @file netmodel.hpp
 * @brief Two-way butterfly topology, channel realizations and two-hop propagation.
 *
 * Four sources S1..S4 reach three relays R1..R3 (first hop), which reach four
 * destinations D1..D4 (second hop). There are no direct source-destination
 * links. R1 serves {S1, S4} -> {D2, D3}, R3 serves {S2, S3} -> {D1, D4} and the
 * center relay R2 hears and reaches everybody. Destination D_i is co-located
 * with the source of the opposite direction and therefore knows that source's
 * signals: D1~S3, D2~S4, D3~S1, D4~S2.
 */
#pragma once

#include <Eigen/Dense>

#include <array>
#include <complex>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace butterfly {

using Complex = std::complex<double>;

enum class Source : std::uint8_t { S1 = 0, S2, S3, S4 };
enum class Relay : std::uint8_t { R1 = 0, R2, R3 };
enum class Dest : std::uint8_t { D1 = 0, D2, D3, D4 };

inline constexpr std::array<Source, 4> kSources{Source::S1, Source::S2, Source::S3, Source::S4};
inline constexpr std::array<Relay, 3> kRelays{Relay::R1, Relay::R2, Relay::R3};
inline constexpr std::array<Dest, 4> kDests{Dest::D1, Dest::D2, Dest::D3, Dest::D4};

constexpr std::size_t index(Source s) { return static_cast<std::size_t>(s); }
constexpr std::size_t index(Relay r) { return static_cast<std::size_t>(r); }
constexpr std::size_t index(Dest d) { return static_cast<std::size_t>(d); }

std::string to_string(Source s);
std::string to_string(Relay r);
std::string to_string(Dest d);

/// Source whose signals destination `dest` already knows (its co-located transmitter).
constexpr Source co_located_source(Dest dest) {
  constexpr std::array<Source, 4> table{Source::S3, Source::S4, Source::S1, Source::S2};
  return table[index(dest)];
}

/// Destination served by source `s` (the message W_i of S_i is wanted at D_i).
constexpr Dest intended_dest(Source s) { return static_cast<Dest>(index(s)); }
constexpr Source intended_source(Dest d) { return static_cast<Source>(index(d)); }

struct UplinkPair {
  Source source;
  Relay relay;
};

struct DownlinkPair {
  Relay relay;
  Dest dest;
};

/// The eight first-hop and eight second-hop links of the full butterfly.
inline constexpr std::array<UplinkPair, 8> kUplinks{{
    {Source::S1, Relay::R1}, {Source::S4, Relay::R1}, {Source::S1, Relay::R2},
    {Source::S2, Relay::R2}, {Source::S3, Relay::R2}, {Source::S4, Relay::R2},
    {Source::S2, Relay::R3}, {Source::S3, Relay::R3},
}};
inline constexpr std::array<DownlinkPair, 8> kDownlinks{{
    {Relay::R1, Dest::D2}, {Relay::R1, Dest::D3}, {Relay::R2, Dest::D1},
    {Relay::R2, Dest::D2}, {Relay::R2, Dest::D3}, {Relay::R2, Dest::D4},
    {Relay::R3, Dest::D1}, {Relay::R3, Dest::D4},
}};

class Topology {
 public:
  enum class Kind { kSingleAntennaRelay, kMultiAntennaRelay, kMultiAntennaRelayOnly };

  static Topology single_antenna();
  static Topology multi_antenna(int n_antennas);
  /// Center relay only; R1 and R3 are removed from the network.
  static Topology multi_antenna_only(int n_antennas);
  /// Accepts the names produced by `name()` plus the short CLI forms
  /// "single", "mimo:N" and "mimo_only:N".
  static Topology parse(std::string_view text);

  Kind kind() const { return kind_; }
  bool is_single_antenna() const { return kind_ == Kind::kSingleAntennaRelay; }
  bool has_relay(Relay r) const;
  /// Antenna count of a relay; 0 when the relay is absent.
  int antennas(Relay r) const;
  int center_antennas() const { return n_antennas_; }

  bool has_link(Source s, Relay r) const;
  bool has_link(Relay r, Dest d) const;
  std::vector<UplinkPair> uplinks() const;
  std::vector<DownlinkPair> downlinks() const;

  /// "SingleAntennaRelay", "MultiAntennaRelay(3)", "MultiAntennaRelayOnly(3)".
  std::string name() const;

  bool operator==(const Topology&) const = default;

 private:
  Topology(Kind kind, int n_antennas) : kind_(kind), n_antennas_(n_antennas) {}

  Kind kind_;
  int n_antennas_;
};

/**
 * @brief Immutable set of channel coefficients for every link of a topology.
 *
 * Each coefficient is stored as a column vector whose length is the antenna
 * count of the relay end of the link (1 for single-antenna relays). Absent
 * links hold no coefficient and any attempt to read one throws ShapeError.
 */
class ChannelRealization {
 public:
  using UplinkTable = std::array<std::array<std::optional<Eigen::VectorXcd>, 3>, 4>;
  using DownlinkTable = std::array<std::array<std::optional<Eigen::VectorXcd>, 4>, 3>;

  /// Validates shapes, link presence and the strict magnitude bounds.
  ChannelRealization(Topology topology, std::uint64_t seed, double h_min, double h_max,
                     UplinkTable uplinks, DownlinkTable downlinks);

  const Topology& topology() const { return topology_; }
  std::uint64_t seed() const { return seed_; }
  double h_min() const { return h_min_; }
  double h_max() const { return h_max_; }

  /// H_{s,r}: n_r x 1 channel from source s into relay r.
  const Eigen::VectorXcd& uplink(Source s, Relay r) const;
  /// H_{r,d}: channel from relay r to destination d, stored as an n_r vector
  /// and applied as a row (plain transpose, no conjugation).
  const Eigen::VectorXcd& downlink(Relay r, Dest d) const;
  Complex uplink_scalar(Source s, Relay r) const;
  Complex downlink_scalar(Relay r, Dest d) const;

  /// Same center-relay coefficients on the topology with R1 and R3 removed.
  ChannelRealization without_side_relays() const;

 private:
  Topology topology_;
  std::uint64_t seed_;
  double h_min_;
  double h_max_;
  UplinkTable up_;
  DownlinkTable down_;
};

/// Assembles a realization link by link; mainly for tests and file loading.
class ChannelBuilder {
 public:
  ChannelBuilder(Topology topology, double h_min, double h_max);
  /// Every present link set to `value` on every antenna.
  static ChannelBuilder filled(Topology topology, Complex value, double h_min, double h_max);

  ChannelBuilder& seed(std::uint64_t seed);
  ChannelBuilder& uplink(Source s, Relay r, Eigen::VectorXcd h);
  ChannelBuilder& uplink(Source s, Relay r, Complex h);
  ChannelBuilder& downlink(Relay r, Dest d, Eigen::VectorXcd h);
  ChannelBuilder& downlink(Relay r, Dest d, Complex h);
  ChannelRealization build() const;

 private:
  Topology topology_;
  double h_min_;
  double h_max_;
  std::uint64_t seed_ = 0;
  ChannelRealization::UplinkTable up_;
  ChannelRealization::DownlinkTable down_;
};

inline constexpr double kDefaultHMin = 0.5;
inline constexpr double kDefaultHMax = 2.0;

/// Magnitudes i.i.d. uniform on (h_min, h_max), phases i.i.d. uniform on [0, 2pi).
ChannelRealization sample_channels(const Topology& topology, std::uint64_t seed,
                                   double h_min = kDefaultHMin, double h_max = kDefaultHMax);

using SourceSymbols = std::array<Complex, 4>;
using DestSymbols = std::array<Complex, 4>;
/// One vector per relay sized by its antenna count; absent relays hold size 0.
using RelaySignals = std::array<Eigen::VectorXcd, 3>;

RelaySignals zero_relay_signals(const Topology& topology);

/// Y_{R_k} = sum over linked sources of H_{i,R_k} X_i + Z_{R_k}.
RelaySignals first_hop(const ChannelRealization& ch, const SourceSymbols& x,
                       const RelaySignals& noise);
/// Y_i = sum over linked relays of H_{R_k,i}^T X_{R_k} + Z_i.
DestSymbols second_hop(const ChannelRealization& ch, const RelaySignals& x_relay,
                       const DestSymbols& noise);

/// Unit-variance receiver noise, regenerated from (seed, node, slot).
RelaySignals relay_noise(const Topology& topology, std::uint64_t seed, std::uint64_t slot);
DestSymbols destination_noise(std::uint64_t seed, std::uint64_t slot);

/// Everything that happens in one channel use of a symbol-level run.
struct SymbolFrame {
  std::uint64_t slot = 0;
  SourceSymbols source{};
  RelaySignals relay_noise;
  RelaySignals relay_received;
  RelaySignals relay_transmit;
  DestSymbols dest_noise{};
  DestSymbols dest_received{};
};

using Bits = std::vector<std::uint8_t>;

/// Messages W_1..W_4 of equal length.
struct MessageSet {
  std::array<Bits, 4> w;

  std::size_t length() const { return w[0].size(); }
  const Bits& operator[](Source s) const { return w[index(s)]; }
};

/// Uniform bits for every message, keyed by seed.
MessageSet generate_messages(std::size_t length, std::uint64_t seed);

}  // namespace butterfly
