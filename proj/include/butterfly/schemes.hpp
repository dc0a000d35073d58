/**
 * @file schemes.hpp
 * @brief Single-antenna achievability schemes for the two-way butterfly.
 *
 *  - no-cache: S1 and S3 exchange messages through R2, which amplifies and
 *    forwards its received sum with one slot of delay. Everybody else is
 *    silent.
 *  - cache: relays hold W1^W3 and W2^W4 and send them as common streams A and
 *    B, precoded so that B vanishes at D1/D3 and A vanishes at D2/D4. Each
 *    destination decodes its stream and XORs out its co-located message.
 *  - time sharing: a fraction p of the time with the cache scheme, the rest
 *    without.
 */
#pragma once

#include "butterfly/analysis.hpp"
#include "butterfly/netmodel.hpp"

#include <json.hpp>

#include <array>
#include <string>
#include <vector>

namespace butterfly::schemes {

/**
 * Effective single-letter view of a scheme at one destination set:
 * desired gain, leftover interference gains and the forwarded relay noise.
 * The SINR at D_i is |g_i|^2 P_eff / (sum |r|^2 P_eff + forwarded_i + 1).
 */
struct SchemeReport {
  std::string scheme;
  double power = 0.0;
  /// Per-stream power multiplying |g_i|^2.
  double effective_power = 0.0;
  std::array<Complex, 4> desired_gain{};
  /// Every unintended stream that the destination cannot cancel with side information.
  std::array<std::vector<Complex>, 4> residual_gains;
  /// Relay noise reaching the destination, excluding its own unit noise.
  std::array<double, 4> forwarded_noise{};
  std::array<bool, 4> active_dest{};
  std::vector<std::string> active_nodes;

  /// forwarded_noise + 1 per destination.
  std::array<double, 4> noise_amplification() const;
  double residual_max() const;
};

struct SchemeRun {
  SchemeReport report;
  analysis::RatePoint rates;
};

/// Rates read off a report: log2(1 + SINR) for active destinations, 0 otherwise.
analysis::RatePoint rates_from_report(const SchemeReport& report, double power_db);

nlohmann::json report_to_json(const SchemeReport& report, const analysis::RatePoint& rates);

// --- no cache -------------------------------------------------------------

/// sqrt(P / (|H_{1,R2}|^2 P + |H_{3,R2}|^2 P + 1))
double no_cache_relay_gain(const ChannelRealization& ch, double power);

SchemeReport no_cache_scheme(const ChannelRealization& ch, double power);
SchemeRun run_no_cache_scheme(const ChannelRealization& ch, double power_db);

/// Symbol-level run: S1, S3 send sqrt(P) times codebook symbols, R2 sends
/// alpha * Y_R2[m-1]. Noise is drawn from `seed` unless disabled.
std::vector<SymbolFrame> simulate_no_cache(const ChannelRealization& ch, double power,
                                           std::size_t n_slots, std::uint64_t seed,
                                           bool with_noise);

// --- cache ----------------------------------------------------------------

struct CachedContent {
  Bits w1_xor_w3;
  Bits w2_xor_w4;
  double fraction = 1.0;
  /// floor(fraction * length) leading bits of each XOR are held by the relays.
  std::size_t cached_bits = 0;
};

CachedContent cache_placement(const MessageSet& msgs, double fraction);

/// Relay transmit coefficients for the two common streams:
/// X_{R_k} = scale * (a[k] A + b[k] B).
struct CacheBeamformers {
  std::array<Complex, 3> a{};
  std::array<Complex, 3> b{};
  /// Common factor that puts the most loaded relay at power P (1 until scaled).
  double scale = 1.0;

  double relay_power(Relay r) const;
};

/// Unscaled coefficients; throws DegenerateChannelError on a zero denominator.
CacheBeamformers cache_beamformers(const ChannelRealization& ch);
/// The same coefficients with the common scale set for power P.
CacheBeamformers cache_beamformers(const ChannelRealization& ch, double power);

/// Unscaled effective gains: stream A at D1/D3, stream B at D2/D4, with the
/// other stream reported as residual. Power fields are left at zero.
SchemeReport cache_delivery_gains(const ChannelRealization& ch);

/// Smallest |g_i| below which a cache realization is treated as degenerate.
double cache_gain_threshold(const ChannelRealization& ch);

/// Both streams carry unit-power codebook symbols, so P_eff = scale^2. Streams
/// are common codewords: W1 and W3 share the rate of A, limited by the weaker
/// of D1 and D3 (likewise B for D2 and D4).
SchemeRun run_cache_scheme(const ChannelRealization& ch, double power_db);

std::vector<SymbolFrame> simulate_cache(const ChannelRealization& ch, double power,
                                        std::size_t n_slots, std::uint64_t seed,
                                        bool with_noise);

/// Bits recovered at each destination after BPSK delivery of the cached XORs
/// over the symbol-level channel and removal of the co-located message.
std::array<Bits, 4> deliver_cached_messages(const ChannelRealization& ch, double power,
                                            const CachedContent& cache, const MessageSet& msgs,
                                            std::optional<std::uint64_t> noise_seed);

// --- time sharing ---------------------------------------------------------

/// rate_i = (1 - p) rate_i^NC + p rate_i^C
analysis::RatePoint time_share(double fraction, const analysis::RatePoint& no_cache,
                               const analysis::RatePoint& cache);

/// Unit-variance codebook symbol of stream `stream` at `slot`, shared by every
/// node that knows the stream.
Complex codebook_symbol(std::uint64_t seed, std::uint16_t stream, std::uint64_t slot);

inline constexpr std::uint16_t kStreamA = 100;
inline constexpr std::uint16_t kStreamB = 101;

}  // namespace butterfly::schemes
