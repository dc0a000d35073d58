#include "butterfly/analysis.hpp"
#include "butterfly/errors.hpp"
#include "butterfly/keyed_stream.hpp"
#include "butterfly/monte_carlo.hpp"
#include "butterfly/schemes.hpp"

#include <doctest.h>

#include <cmath>
#include <functional>

using namespace butterfly;
using namespace butterfly::schemes;

namespace {

using Runner = std::function<SchemeRun(const ChannelRealization&, double)>;

analysis::DofEstimate sweep(const ChannelRealization& ch, const Runner& run) {
  std::vector<analysis::RatePoint> points;
  for (double db : analysis::power_grid_db(40.0, 100.0, 10.0)) points.push_back(run(ch, db).rates);
  return analysis::dof_slope(points);
}

Bits bits(const char* text) {
  Bits out;
  for (const char* c = text; *c; ++c) out.push_back(*c == '1' ? 1 : 0);
  return out;
}

// Wider bounds so that hand-picked coefficients such as 2 stay strictly inside.
ChannelBuilder unit_builder() { return ChannelBuilder::filled(Topology::single_antenna(), 1.0, 0.1, 3.0); }

}  // namespace

TEST_CASE("no-cache with unit channels") {
  const auto ch = unit_builder().build();
  CHECK(no_cache_relay_gain(ch, 1.0) == doctest::Approx(1.0 / std::sqrt(3.0)));
  const SchemeReport rep = no_cache_scheme(ch, 1.0);
  CHECK(std::abs(rep.desired_gain[0] - 1.0 / std::sqrt(3.0)) < 1e-15);
  CHECK(rep.noise_amplification()[0] == doctest::Approx(1.0 / 3.0 + 1.0));
  CHECK(rep.residual_max() == 0.0);
  CHECK(rep.active_dest[0]);
  CHECK_FALSE(rep.active_dest[1]);
  CHECK(rep.active_dest[2]);
  CHECK_FALSE(rep.active_dest[3]);
}

TEST_CASE("no-cache silences D2 and D4 and ignores side relays") {
  const auto ch = sample_channels(Topology::single_antenna(), 4);
  ChannelBuilder other = unit_builder();
  for (auto [s, r] : ch.topology().uplinks()) other.uplink(s, r, r == Relay::R2 ? ch.uplink_scalar(s, r) : Complex(0.7, 0.2));
  for (auto [r, d] : ch.topology().downlinks())
    other.downlink(r, d, r == Relay::R2 ? ch.downlink_scalar(r, d) : Complex(-0.4, 1.1));
  const auto a = run_no_cache_scheme(ch, 60.0);
  const auto b = run_no_cache_scheme(other.build(), 60.0);
  CHECK(a.rates.rates == b.rates.rates);
  CHECK(a.rates.rates[1] == 0.0);
  CHECK(a.rates.rates[3] == 0.0);
}

TEST_CASE("no-cache rejects multi-antenna topologies") {
  CHECK_THROWS_AS(no_cache_scheme(sample_channels(Topology::multi_antenna(3), 1), 1.0), UnsupportedSchemeError);
}

TEST_CASE("no-cache symbol run leaves only the wanted term") {
  const auto ch = sample_channels(Topology::single_antenna(), 6);
  const double power = 100.0;
  const double alpha = no_cache_relay_gain(ch, power);
  const auto frames = simulate_no_cache(ch, power, 50, 9, false);
  CHECK(frames[0].relay_transmit[1][0] == Complex(0.0));
  for (std::size_t m = 1; m < frames.size(); ++m) {
    for (Dest d : {Dest::D1, Dest::D3}) {
      const Complex g = ch.downlink_scalar(Relay::R2, d) * alpha;
      const Complex known = g * ch.uplink_scalar(co_located_source(d), Relay::R2) *
                            frames[m - 1].source[index(co_located_source(d))];
      const Complex wanted = g * ch.uplink_scalar(intended_source(d), Relay::R2) *
                             frames[m - 1].source[index(intended_source(d))];
      const Complex leftover = frames[m].dest_received[index(d)] - known;
      CHECK(std::abs(leftover - wanted) <= 1e-12 * std::abs(wanted));
    }
  }
  CHECK(analysis::monte_carlo_residual(analysis::SchemeId::kNoCache, 50, 3) == 0.0);
}

TEST_CASE("no-cache relay is causal") {
  const auto ch = sample_channels(Topology::single_antenna(), 6);
  const auto a = simulate_no_cache(ch, 10.0, 20, 1, true);
  const auto b = simulate_no_cache(ch, 10.0, 20, 2, true);
  // Relay output at slot m is fully determined by slot m-1.
  const double alpha = no_cache_relay_gain(ch, 10.0);
  for (std::size_t m = 1; m < a.size(); ++m) {
    const Eigen::VectorXcd expect = alpha * a[m - 1].relay_received[1];
    CHECK((a[m].relay_transmit[1] - expect).norm() == 0.0);
  }
  CHECK(a[5].relay_transmit[1] != b[5].relay_transmit[1]);
}

TEST_CASE("no-cache relay power stays within budget") {
  const auto ch = sample_channels(Topology::single_antenna(), 10);
  const double power = 20.0;
  const auto frames = simulate_no_cache(ch, power, 10000, 4, true);
  double relay = 0.0;
  double s1 = 0.0;
  for (const auto& f : frames) {
    relay += f.relay_transmit[1].squaredNorm();
    s1 += std::norm(f.source[0]);
  }
  CHECK(relay / frames.size() == doctest::Approx(power).epsilon(0.05));
  CHECK(s1 / frames.size() == doctest::Approx(power).epsilon(0.05));
}

TEST_CASE("no-cache slope") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto est = sweep(sample_channels(Topology::single_antenna(), seed), run_no_cache_scheme);
    CHECK(est.total_slope == doctest::Approx(2.0).epsilon(0.05));
  }
}

TEST_CASE("cache placement") {
  MessageSet m;
  m.w = {bits("1010"), bits("0000"), bits("0110"), bits("1111")};
  const CachedContent c = cache_placement(m, 1.0);
  CHECK(c.w1_xor_w3 == bits("1100"));
  CHECK(c.w2_xor_w4 == bits("1111"));
  CHECK(c.cached_bits == 4);

  m.w[2] = m.w[0];
  CHECK(cache_placement(m, 1.0).w1_xor_w3 == bits("0000"));

  const MessageSet big = generate_messages(100, 3);
  CHECK(cache_placement(big, 0.25).cached_bits == 25);
  CHECK(cache_placement(big, 0.0).cached_bits == 0);

  MessageSet uneven = big;
  uneven.w[3].pop_back();
  CHECK_THROWS_AS(cache_placement(uneven, 1.0), PlacementError);
  CHECK_THROWS_AS(cache_placement(big, 1.5), ConfigError);
}

TEST_CASE("cache beamformer coefficients") {
  const auto ch = unit_builder().downlink(Relay::R2, Dest::D2, 1.0).downlink(Relay::R1, Dest::D2, 2.0).build();
  const CacheBeamformers bf = cache_beamformers(ch);
  CHECK(bf.a[0] == Complex(-0.5));
  CHECK(bf.a[1] == Complex(1.0));
  CHECK(bf.b[1] == Complex(1.0));

  const CacheBeamformers ones = cache_beamformers(unit_builder().build());
  CHECK(ones.a[0] == Complex(-1.0));
  CHECK(ones.b[0] == Complex(-1.0));
  CHECK(ones.a[1] == Complex(1.0));
  CHECK(ones.b[1] == Complex(1.0));
  CHECK(ones.a[2] == Complex(-1.0));
  CHECK(ones.b[2] == Complex(-1.0));

  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const CacheBeamformers r = cache_beamformers(sample_channels(Topology::single_antenna(), seed));
    CHECK(r.a[1] == Complex(1.0));
    CHECK(r.b[1] == Complex(1.0));
  }
}

TEST_CASE("cache beamformer power scaling") {
  const auto ch = sample_channels(Topology::single_antenna(), 13);
  const CacheBeamformers bf = cache_beamformers(ch, 50.0);
  double loudest = 0.0;
  for (Relay r : kRelays) {
    CHECK(bf.relay_power(r) <= 50.0 * (1.0 + 1e-12));
    loudest = std::max(loudest, bf.relay_power(r));
  }
  CHECK(loudest == doctest::Approx(50.0));
}

TEST_CASE("cache delivery gains match the closed forms") {
  const auto symmetric = cache_delivery_gains(unit_builder().build());
  CHECK(std::abs(symmetric.desired_gain[0]) == 0.0);
  CHECK_THROWS_AS(run_cache_scheme(unit_builder().build(), 60.0), DegenerateChannelError);

  const auto ch = unit_builder()
                      .downlink(Relay::R2, Dest::D1, 2.0)
                      .downlink(Relay::R3, Dest::D1, 1.0)
                      .downlink(Relay::R2, Dest::D4, 1.0)
                      .downlink(Relay::R3, Dest::D4, 1.0)
                      .build();
  CHECK(std::abs(cache_delivery_gains(ch).desired_gain[0] - 1.0) < 1e-15);

  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    const auto r = sample_channels(Topology::single_antenna(), seed);
    auto h = [&](Relay k, Dest d) { return r.downlink_scalar(k, d); };
    const std::array<Complex, 4> closed{
        h(Relay::R2, Dest::D1) - h(Relay::R3, Dest::D1) * h(Relay::R2, Dest::D4) / h(Relay::R3, Dest::D4),
        h(Relay::R2, Dest::D2) - h(Relay::R1, Dest::D2) * h(Relay::R2, Dest::D3) / h(Relay::R1, Dest::D3),
        h(Relay::R2, Dest::D3) - h(Relay::R1, Dest::D3) * h(Relay::R2, Dest::D2) / h(Relay::R1, Dest::D2),
        h(Relay::R2, Dest::D4) - h(Relay::R3, Dest::D4) * h(Relay::R2, Dest::D1) / h(Relay::R3, Dest::D1)};
    const SchemeReport rep = cache_delivery_gains(r);
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(std::abs(rep.desired_gain[i] - closed[i]) <= 1e-12 * std::max(1.0, std::abs(closed[i])));
      CHECK(rep.forwarded_noise[i] == 0.0);
      CHECK(rep.noise_amplification()[i] == 1.0);
    }
  }
}

TEST_CASE("cache cross-stream residual over 1000 realizations") {
  double worst = 0.0;
  for (std::uint64_t t = 0; t < 1000; ++t) {
    const auto ch = sample_channels(Topology::single_antenna(), derive_seed(99, t));
    worst = std::max(worst, cache_delivery_gains(ch).residual_max() / ch.h_max());
  }
  CHECK(worst <= 1e-9);
}

TEST_CASE("cache symbol run matches the effective gains") {
  const auto ch = sample_channels(Topology::single_antenna(), 17);
  const double power = 1000.0;
  const CacheBeamformers bf = cache_beamformers(ch, power);
  const SchemeReport rep = cache_delivery_gains(ch);
  const auto frames = simulate_cache(ch, power, 64, 5, false);
  for (const auto& f : frames) {
    for (Source s : kSources) CHECK(f.source[index(s)] == Complex(0.0));
    const Complex a = codebook_symbol(5, kStreamA, f.slot);
    const Complex b = codebook_symbol(5, kStreamB, f.slot);
    for (Dest d : kDests) {
      const bool wants_a = d == Dest::D1 || d == Dest::D3;
      const Complex expect = bf.scale * rep.desired_gain[index(d)] * (wants_a ? a : b);
      CHECK(std::abs(f.dest_received[index(d)] - expect) <= 1e-9 * std::abs(expect));
    }
  }
}

TEST_CASE("cache relays respect the power budget over 1e4 slots") {
  const auto ch = sample_channels(Topology::single_antenna(), 23);
  const double power = 10.0;
  const auto frames = simulate_cache(ch, power, 10000, 8, true);
  for (Relay r : kRelays) {
    double sum = 0.0;
    for (const auto& f : frames) sum += f.relay_transmit[index(r)].squaredNorm();
    CHECK(sum / frames.size() <= power * 1.05);
  }
}

TEST_CASE("cache scale invariance") {
  const auto ch = sample_channels(Topology::single_antenna(), 29);
  const Complex c(0.6, -0.3);
  ChannelBuilder scaled(ch.topology(), ch.h_min() * 0.1, ch.h_max());
  for (auto [s, r] : ch.topology().uplinks()) scaled.uplink(s, r, ch.uplink(s, r));
  for (auto [r, d] : ch.topology().downlinks()) scaled.downlink(r, d, c * ch.downlink_scalar(r, d));
  const SchemeReport base = cache_delivery_gains(ch);
  const SchemeReport moved = cache_delivery_gains(scaled.build());
  CHECK(moved.residual_max() <= 1e-12 * ch.h_max());
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(std::abs(moved.desired_gain[i] - c * base.desired_gain[i]) <= 1e-12 * std::abs(base.desired_gain[i]));
  }
}

TEST_CASE("cached XOR delivery recovers every message") {
  const MessageSet msgs = generate_messages(512, 77);
  const CachedContent cache = cache_placement(msgs, 1.0);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto ch = sample_channels(Topology::single_antenna(), seed);
    const auto out = deliver_cached_messages(ch, 1e4, cache, msgs, std::nullopt);
    for (Dest d : kDests) CHECK(out[index(d)] == msgs[intended_source(d)]);
  }
  const CachedContent partial = cache_placement(msgs, 0.25);
  const auto out = deliver_cached_messages(sample_channels(Topology::single_antenna(), 2), 1e4, partial, msgs,
                                           std::nullopt);
  CHECK(out[0].size() == 128);
  CHECK(std::equal(out[0].begin(), out[0].end(), msgs[Source::S1].begin()));
}

TEST_CASE("cache slopes") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto est = sweep(sample_channels(Topology::single_antenna(), seed), run_cache_scheme);
    CHECK(est.total_slope == doctest::Approx(4.0).epsilon(0.025));
    for (double d : est.user_slopes) CHECK(std::abs(d - 1.0) <= 0.05);
  }
}

TEST_CASE("time sharing") {
  const auto ch = sample_channels(Topology::single_antenna(), 3);
  for (double p : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    const auto est = sweep(ch, [p](const ChannelRealization& c, double db) {
      SchemeRun run;
      run.rates = time_share(p, run_no_cache_scheme(c, db).rates, run_cache_scheme(c, db).rates);
      return run;
    });
    CHECK(std::abs(est.total_slope - (2.0 + 2.0 * p)) <= 0.1);
  }
  const auto nc = run_no_cache_scheme(ch, 50.0).rates;
  const auto c = run_cache_scheme(ch, 50.0).rates;
  CHECK(time_share(0.0, nc, c).rates == nc.rates);
  CHECK(time_share(1.0, nc, c).rates == c.rates);
  CHECK_THROWS_AS(time_share(-0.1, nc, c), ConfigError);
  CHECK_THROWS_AS(time_share(1.1, nc, c), ConfigError);
}

TEST_CASE("sum rate is nondecreasing in the cached fraction") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto ch = sample_channels(Topology::single_antenna(), seed);
    for (double db : {40.0, 70.0, 100.0}) {
      const auto nc = run_no_cache_scheme(ch, db).rates;
      const auto c = run_cache_scheme(ch, db).rates;
      double previous = -1.0;
      for (int k = 0; k <= 20; ++k) {
        const double sum = time_share(k / 20.0, nc, c).sum;
        CHECK(sum >= previous);
        previous = sum;
      }
    }
  }
}

TEST_CASE("scheme report json") {
  const auto run = run_cache_scheme(sample_channels(Topology::single_antenna(), 3), 60.0);
  const nlohmann::json j = report_to_json(run.report, run.rates);
  CHECK(j.at("scheme") == "cache");
  CHECK(j.at("gains").size() == 4);
  CHECK(j.at("gains").at("D3").size() == 2);
  CHECK(j.at("noise_amp").size() == 4);
  CHECK(j.at("rates").size() == 4);
  CHECK(j.at("P").get<double>() == doctest::Approx(1e6));
  CHECK(j.at("residual_max").get<double>() <= 1e-9);
}
