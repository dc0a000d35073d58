#include "butterfly/schemes.hpp"

#include "butterfly/channel_json.hpp"
#include "butterfly/errors.hpp"
#include "butterfly/keyed_stream.hpp"

#include <algorithm>
#include <cmath>

namespace butterfly::schemes {

namespace {

void require_single_antenna(const ChannelRealization& ch, const char* scheme) {
  if (!ch.topology().is_single_antenna()) {
    throw UnsupportedSchemeError(std::string(scheme) + " scheme needs the single-antenna topology, got " +
                                 ch.topology().name());
  }
}

Complex checked_ratio(Complex num, Complex den, const char* what) {
  if (den == Complex{0.0, 0.0}) {
    throw DegenerateChannelError(std::string("zero channel in cache beamformer denominator ") + what);
  }
  return num / den;
}

Eigen::VectorXcd scalar(Complex z) { return Eigen::VectorXcd::Constant(1, z); }

}  // namespace

std::array<double, 4> SchemeReport::noise_amplification() const {
  std::array<double, 4> out{};
  for (std::size_t i = 0; i < 4; ++i) out[i] = forwarded_noise[i] + 1.0;
  return out;
}

double SchemeReport::residual_max() const {
  double worst = 0.0;
  for (const auto& list : residual_gains) {
    for (Complex r : list) worst = std::max(worst, std::abs(r));
  }
  return worst;
}

analysis::RatePoint rates_from_report(const SchemeReport& report, double power_db) {
  std::array<double, 4> rates{};
  for (std::size_t i = 0; i < 4; ++i) {
    if (!report.active_dest[i]) continue;
    rates[i] = analysis::rate(analysis::sinr(report.desired_gain[i], report.residual_gains[i],
                                             report.forwarded_noise[i], report.effective_power));
  }
  return analysis::RatePoint::at(power_db, rates);
}

nlohmann::json report_to_json(const SchemeReport& report, const analysis::RatePoint& rates) {
  nlohmann::json gains = nlohmann::json::object();
  for (Dest d : kDests) gains[to_string(d)] = complex_to_json(report.desired_gain[index(d)]);
  return {{"scheme", report.scheme},
          {"gains", std::move(gains)},
          {"residual_max", report.residual_max()},
          {"noise_amp", report.noise_amplification()},
          {"rates", rates.rates},
          {"P", report.power}};
}

Complex codebook_symbol(std::uint64_t seed, std::uint16_t stream, std::uint64_t slot) {
  return KeyedStream(seed, StreamDomain::kCodebook, stream, slot).complex_gaussian();
}

// ---------------------------------------------------------------------------
// No cache: two-way 1x1x1 amplify-and-forward through R2.

double no_cache_relay_gain(const ChannelRealization& ch, double power) {
  const double h1 = std::norm(ch.uplink_scalar(Source::S1, Relay::R2));
  const double h3 = std::norm(ch.uplink_scalar(Source::S3, Relay::R2));
  return std::sqrt(power / (h1 * power + h3 * power + 1.0));
}

SchemeReport no_cache_scheme(const ChannelRealization& ch, double power) {
  require_single_antenna(ch, "no-cache");
  if (!(power > 0.0)) throw ConfigError("transmit power must be positive");
  const double alpha = no_cache_relay_gain(ch, power);

  SchemeReport rep;
  rep.scheme = "no_cache";
  rep.power = power;
  rep.effective_power = power;
  rep.active_nodes = {"S1", "R2", "S3"};
  // D1 wants S1 and cancels S3; D3 wants S3 and cancels S1.
  for (Dest d : {Dest::D1, Dest::D3}) {
    const Complex relay_to_dest = ch.downlink_scalar(Relay::R2, d);
    const Complex forward = relay_to_dest * alpha;
    rep.desired_gain[index(d)] = forward * ch.uplink_scalar(intended_source(d), Relay::R2);
    rep.forwarded_noise[index(d)] = std::norm(forward);
    rep.active_dest[index(d)] = true;
  }
  return rep;
}

SchemeRun run_no_cache_scheme(const ChannelRealization& ch, double power_db) {
  SchemeRun run;
  run.report = no_cache_scheme(ch, analysis::db_to_linear(power_db));
  run.rates = rates_from_report(run.report, power_db);
  return run;
}

std::vector<SymbolFrame> simulate_no_cache(const ChannelRealization& ch, double power,
                                           std::size_t n_slots, std::uint64_t seed,
                                           bool with_noise) {
  require_single_antenna(ch, "no-cache");
  const Topology& topo = ch.topology();
  const double alpha = no_cache_relay_gain(ch, power);
  const double amplitude = std::sqrt(power);

  std::vector<SymbolFrame> frames;
  frames.reserve(n_slots);
  RelaySignals previous_rx = zero_relay_signals(topo);
  for (std::size_t m = 0; m < n_slots; ++m) {
    SymbolFrame f;
    f.slot = m;
    for (Source s : {Source::S1, Source::S3}) {
      f.source[index(s)] = amplitude * codebook_symbol(seed, static_cast<std::uint16_t>(index(s)), m);
    }
    f.relay_noise = with_noise ? relay_noise(topo, seed, m) : zero_relay_signals(topo);
    f.dest_noise = with_noise ? destination_noise(seed, m) : DestSymbols{};
    f.relay_received = first_hop(ch, f.source, f.relay_noise);
    // Causal relay: slot m forwards what arrived in slot m-1.
    f.relay_transmit = zero_relay_signals(topo);
    f.relay_transmit[index(Relay::R2)] = alpha * previous_rx[index(Relay::R2)];
    f.dest_received = second_hop(ch, f.relay_transmit, f.dest_noise);
    previous_rx = f.relay_received;
    frames.push_back(std::move(f));
  }
  return frames;
}

// ---------------------------------------------------------------------------
// Cache: XOR placement, zero-forcing delivery.

CachedContent cache_placement(const MessageSet& msgs, double fraction) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw ConfigError("cache fraction must lie in [0, 1]");
  const std::size_t len = msgs.length();
  for (Source s : kSources) {
    if (msgs[s].size() != len) throw PlacementError("messages must have equal length");
  }
  CachedContent c;
  c.fraction = fraction;
  c.cached_bits = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(len)));
  c.w1_xor_w3.resize(len);
  c.w2_xor_w4.resize(len);
  for (std::size_t i = 0; i < len; ++i) {
    c.w1_xor_w3[i] = msgs[Source::S1][i] ^ msgs[Source::S3][i];
    c.w2_xor_w4[i] = msgs[Source::S2][i] ^ msgs[Source::S4][i];
  }
  return c;
}

double CacheBeamformers::relay_power(Relay r) const {
  return scale * scale * (std::norm(a[index(r)]) + std::norm(b[index(r)]));
}

CacheBeamformers cache_beamformers(const ChannelRealization& ch) {
  require_single_antenna(ch, "cache");
  auto h = [&](Relay r, Dest d) { return ch.downlink_scalar(r, d); };
  CacheBeamformers bf;
  bf.a[index(Relay::R1)] = -checked_ratio(h(Relay::R2, Dest::D2), h(Relay::R1, Dest::D2), "H_{R1,2}");
  bf.b[index(Relay::R1)] = -checked_ratio(h(Relay::R2, Dest::D3), h(Relay::R1, Dest::D3), "H_{R1,3}");
  bf.a[index(Relay::R2)] = 1.0;
  bf.b[index(Relay::R2)] = 1.0;
  bf.a[index(Relay::R3)] = -checked_ratio(h(Relay::R2, Dest::D4), h(Relay::R3, Dest::D4), "H_{R3,4}");
  bf.b[index(Relay::R3)] = -checked_ratio(h(Relay::R2, Dest::D1), h(Relay::R3, Dest::D1), "H_{R3,1}");
  return bf;
}

CacheBeamformers cache_beamformers(const ChannelRealization& ch, double power) {
  if (!(power > 0.0)) throw ConfigError("transmit power must be positive");
  CacheBeamformers bf = cache_beamformers(ch);
  double loudest = 0.0;
  for (Relay r : kRelays) loudest = std::max(loudest, bf.relay_power(r));
  bf.scale = std::sqrt(power / loudest);
  return bf;
}

SchemeReport cache_delivery_gains(const ChannelRealization& ch) {
  const CacheBeamformers bf = cache_beamformers(ch);
  SchemeReport rep;
  rep.scheme = "cache";
  rep.active_nodes = {"R1", "R2", "R3"};
  for (Dest d : kDests) {
    Complex gain_a{0.0, 0.0};
    Complex gain_b{0.0, 0.0};
    for (Relay r : kRelays) {
      if (!ch.topology().has_link(r, d)) continue;
      gain_a += ch.downlink_scalar(r, d) * bf.a[index(r)];
      gain_b += ch.downlink_scalar(r, d) * bf.b[index(r)];
    }
    const bool wants_a = d == Dest::D1 || d == Dest::D3;
    rep.desired_gain[index(d)] = wants_a ? gain_a : gain_b;
    rep.residual_gains[index(d)] = {wants_a ? gain_b : gain_a};
    rep.active_dest[index(d)] = true;
  }
  return rep;
}

double cache_gain_threshold(const ChannelRealization& ch) { return 1e-9 * ch.h_max(); }

SchemeRun run_cache_scheme(const ChannelRealization& ch, double power_db) {
  const double power = analysis::db_to_linear(power_db);
  SchemeRun run;
  run.report = cache_delivery_gains(ch);
  const double threshold = cache_gain_threshold(ch);
  for (Dest d : kDests) {
    if (std::abs(run.report.desired_gain[index(d)]) <= threshold) {
      throw DegenerateChannelError("cache delivery gain at " + to_string(d) +
                                   " vanishes for this realization");
    }
  }
  const CacheBeamformers bf = cache_beamformers(ch, power);
  run.report.power = power;
  run.report.effective_power = bf.scale * bf.scale;

  const auto per_dest = rates_from_report(run.report, power_db).rates;
  // A common codeword has to be decodable at both of its destinations.
  const double rate_a = std::min(per_dest[index(Dest::D1)], per_dest[index(Dest::D3)]);
  const double rate_b = std::min(per_dest[index(Dest::D2)], per_dest[index(Dest::D4)]);
  run.rates = analysis::RatePoint::at(power_db, {rate_a, rate_b, rate_a, rate_b});
  return run;
}

std::vector<SymbolFrame> simulate_cache(const ChannelRealization& ch, double power,
                                        std::size_t n_slots, std::uint64_t seed,
                                        bool with_noise) {
  const CacheBeamformers bf = cache_beamformers(ch, power);
  const Topology& topo = ch.topology();
  std::vector<SymbolFrame> frames;
  frames.reserve(n_slots);
  for (std::size_t m = 0; m < n_slots; ++m) {
    SymbolFrame f;
    f.slot = m;
    // Delivery phase: sources are silent, relays read their caches with no delay.
    f.relay_noise = with_noise ? relay_noise(topo, seed, m) : zero_relay_signals(topo);
    f.dest_noise = with_noise ? destination_noise(seed, m) : DestSymbols{};
    f.relay_received = first_hop(ch, f.source, f.relay_noise);
    const Complex a = codebook_symbol(seed, kStreamA, m);
    const Complex b = codebook_symbol(seed, kStreamB, m);
    for (Relay r : kRelays) {
      f.relay_transmit[index(r)] = scalar(bf.scale * (bf.a[index(r)] * a + bf.b[index(r)] * b));
    }
    f.dest_received = second_hop(ch, f.relay_transmit, f.dest_noise);
    frames.push_back(std::move(f));
  }
  return frames;
}

std::array<Bits, 4> deliver_cached_messages(const ChannelRealization& ch, double power,
                                            const CachedContent& cache, const MessageSet& msgs,
                                            std::optional<std::uint64_t> noise_seed) {
  const CacheBeamformers bf = cache_beamformers(ch, power);
  const SchemeReport gains = cache_delivery_gains(ch);
  const std::size_t n = cache.cached_bits;

  std::array<Bits, 4> recovered;
  for (auto& bits : recovered) bits.resize(n);
  for (std::size_t m = 0; m < n; ++m) {
    const double a = cache.w1_xor_w3[m] ? -1.0 : 1.0;
    const double b = cache.w2_xor_w4[m] ? -1.0 : 1.0;
    RelaySignals x;
    for (Relay r : kRelays) {
      x[index(r)] = scalar(bf.scale * (bf.a[index(r)] * a + bf.b[index(r)] * b));
    }
    const DestSymbols z = noise_seed ? destination_noise(*noise_seed, m) : DestSymbols{};
    const DestSymbols y = second_hop(ch, x, z);
    for (Dest d : kDests) {
      const Complex estimate = y[index(d)] / (bf.scale * gains.desired_gain[index(d)]);
      const std::uint8_t xor_bit = estimate.real() < 0.0 ? 1 : 0;
      recovered[index(d)][m] = xor_bit ^ msgs[co_located_source(d)][m];
    }
  }
  return recovered;
}

// ---------------------------------------------------------------------------

analysis::RatePoint time_share(double fraction, const analysis::RatePoint& no_cache,
                               const analysis::RatePoint& cache) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw ConfigError("cache fraction must lie in [0, 1]");
  std::array<double, 4> rates{};
  for (std::size_t i = 0; i < 4; ++i) {
    rates[i] = (1.0 - fraction) * no_cache.rates[i] + fraction * cache.rates[i];
  }
  return analysis::RatePoint::at(no_cache.power_db, rates);
}

}  // namespace butterfly::schemes
