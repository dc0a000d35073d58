#include "butterfly/monte_carlo.hpp"

#include "butterfly/beamform.hpp"
#include "butterfly/errors.hpp"
#include "butterfly/keyed_stream.hpp"
#include "butterfly/schemes.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

namespace butterfly::analysis {

namespace {

constexpr int kMaxResamples = 16;
constexpr double kProbePower = 1.0;

SourceSymbols unit_probe(Source s) {
  SourceSymbols x{};
  x[index(s)] = 1.0;
  return x;
}

double cache_leakage(const ChannelRealization& ch) {
  const auto bf = schemes::cache_beamformers(ch, kProbePower);
  double coeff_norm2 = 0.0;
  for (Relay r : kRelays) coeff_norm2 += bf.relay_power(r);
  const DestSymbols silent{};
  double worst = 0.0;
  // Stream B alone must vanish at D1 and D3, stream A alone at D2 and D4.
  for (bool probe_b : {true, false}) {
    RelaySignals x;
    for (Relay r : kRelays) {
      const Complex c = bf.scale * (probe_b ? bf.b[index(r)] : bf.a[index(r)]);
      x[index(r)] = Eigen::VectorXcd::Constant(1, c);
    }
    const DestSymbols y = second_hop(ch, x, silent);
    for (Dest d : probe_b ? std::array{Dest::D1, Dest::D3} : std::array{Dest::D2, Dest::D4}) {
      worst = std::max(worst, std::abs(y[index(d)]) / (ch.h_max() * std::sqrt(coeff_norm2)));
    }
  }
  return worst;
}

double mimo_leakage(const ChannelRealization& ch) {
  const auto sol = beamform::solve_v2(ch, kProbePower);
  const Topology& topo = ch.topology();
  const RelaySignals silent_relays = zero_relay_signals(topo);
  const DestSymbols silent{};
  double worst = 0.0;
  for (const auto& [d, s] : beamform::kNullingRows) {
    const RelaySignals y_relay = first_hop(ch, unit_probe(s), silent_relays);
    RelaySignals x = zero_relay_signals(topo);
    x[index(Relay::R2)] = sol.v2 * y_relay[index(Relay::R2)];
    if (topo.has_relay(Relay::R1)) x[index(Relay::R1)] = sol.v1 * y_relay[index(Relay::R1)];
    if (topo.has_relay(Relay::R3)) x[index(Relay::R3)] = sol.v3 * y_relay[index(Relay::R3)];
    const DestSymbols y = second_hop(ch, x, silent);
    worst = std::max(worst, std::abs(y[index(d)]) / (ch.h_max() * ch.h_max() * sol.v2.norm()));
  }
  return worst;
}

double no_cache_leakage(const ChannelRealization& ch) {
  const double alpha = schemes::no_cache_relay_gain(ch, kProbePower);
  const Topology& topo = ch.topology();
  const RelaySignals silent_relays = zero_relay_signals(topo);
  const DestSymbols silent{};
  double worst = 0.0;
  for (Dest d : {Dest::D1, Dest::D3}) {
    const Source known = co_located_source(d);
    const RelaySignals y_relay = first_hop(ch, unit_probe(known), silent_relays);
    RelaySignals x = zero_relay_signals(topo);
    x[index(Relay::R2)] = alpha * y_relay[index(Relay::R2)];
    const DestSymbols y = second_hop(ch, x, silent);
    // The destination rebuilds the forwarded copy of its own transmission.
    const Complex known_term = ch.downlink_scalar(Relay::R2, d) * (alpha * ch.uplink_scalar(known, Relay::R2));
    worst = std::max(worst, std::abs(y[index(d)] - known_term));
  }
  return worst;
}

}  // namespace

SchemeId parse_scheme_id(std::string_view name) {
  if (name == "no_cache") return SchemeId::kNoCache;
  if (name == "cache") return SchemeId::kCache;
  if (name == "mimo") return SchemeId::kMimo;
  throw ConfigError("unknown scheme id '" + std::string(name) + "'");
}

double monte_carlo_residual(SchemeId scheme, int n_trials, std::uint64_t seed) {
  if (n_trials < 1) throw ConfigError("Monte Carlo run needs at least one trial");
  const Topology topo = scheme == SchemeId::kMimo ? Topology::multi_antenna(3) : Topology::single_antenna();
  double worst = 0.0;
  for (int t = 0; t < n_trials; ++t) {
    const std::uint64_t trial_seed = derive_seed(seed, static_cast<std::uint64_t>(t));
    for (int attempt = 0;; ++attempt) {
      const auto ch = sample_channels(topo, derive_seed(trial_seed, static_cast<std::uint64_t>(attempt)));
      try {
        switch (scheme) {
          case SchemeId::kCache:
            worst = std::max(worst, cache_leakage(ch));
            break;
          case SchemeId::kMimo:
            worst = std::max(worst, mimo_leakage(ch));
            break;
          case SchemeId::kNoCache:
            worst = std::max(worst, no_cache_leakage(ch));
            break;
        }
        break;
      } catch (const DegenerateChannelError& e) {
        if (attempt + 1 >= kMaxResamples) throw;
        std::cerr << "warning: trial " << t << " resampled: " << e.what() << '\n';
      }
    }
  }
  return worst;
}

}  // namespace butterfly::analysis
