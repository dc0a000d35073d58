#include "butterfly/analysis.hpp"
#include "butterfly/beamform.hpp"
#include "butterfly/errors.hpp"
#include "butterfly/keyed_stream.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace butterfly;
using namespace butterfly::beamform;

namespace {

Eigen::MatrixXcd random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  KeyedStream ks(seed, StreamDomain::kMessage, 500, 0);
  Eigen::MatrixXcd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = ks.complex_gaussian();
  }
  return m;
}

// sum_j sum_k h_j V_jk g_k evaluated term by term.
Complex direct_bilinear(const Eigen::VectorXcd& h, const Eigen::MatrixXcd& v, const Eigen::VectorXcd& g) {
  Complex acc{0.0, 0.0};
  for (Eigen::Index j = 0; j < v.rows(); ++j) {
    for (Eigen::Index k = 0; k < v.cols(); ++k) acc += h[j] * v(j, k) * g[k];
  }
  return acc;
}

// Bilinear cross product; a x b annihilates span{a, b} under the plain transpose.
Eigen::Vector3cd cross(const Eigen::Vector3cd& a, const Eigen::Vector3cd& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

Eigen::VectorXcd kron(const Eigen::VectorXcd& a, const Eigen::VectorXcd& b) {
  Eigen::VectorXcd out(a.size() * b.size());
  for (Eigen::Index j = 0; j < a.size(); ++j) out.segment(j * b.size(), b.size()) = a[j] * b;
  return out;
}

double distance_to_row_span(const Eigen::MatrixXcd& rows, const Eigen::VectorXcd& v) {
  const Eigen::MatrixXcd a = rows.transpose();
  const Eigen::VectorXcd coeffs = a.colPivHouseholderQr().solve(v);
  return (a * coeffs - v).norm() / v.norm();
}

double orthonormality_error(const Eigen::MatrixXcd& b) {
  const Eigen::MatrixXcd gram = b.adjoint() * b;
  return (gram - Eigen::MatrixXcd::Identity(b.cols(), b.cols())).norm();
}

}  // namespace

TEST_CASE("nulling system shape") {
  for (int n = 1; n <= 4; ++n) {
    const NullingSystem sys = build_nulling_system(sample_channels(Topology::multi_antenna(n), 3));
    CHECK(sys.matrix.rows() == 8);
    CHECK(sys.matrix.cols() == n * n);
  }
  CHECK_THROWS_AS(build_nulling_system(sample_channels(Topology::single_antenna(), 3)), UnsupportedSchemeError);
}

TEST_CASE("nulling rows reproduce the bilinear forms") {
  for (std::uint64_t seed = 1; seed <= 25; ++seed) {
    const auto ch = sample_channels(Topology::multi_antenna(3), seed);
    const NullingSystem sys = build_nulling_system(ch);
    CHECK((sys.matrix * flatten(Eigen::MatrixXcd::Zero(3, 3))).norm() == 0.0);
    const Eigen::MatrixXcd v2 = random_matrix(3, 3, seed);
    const Eigen::VectorXcd applied = sys.matrix * flatten(v2);
    for (std::size_t row = 0; row < 8; ++row) {
      const auto [d, s] = kNullingRows[row];
      const Complex expect = direct_bilinear(ch.downlink(Relay::R2, d), v2, ch.uplink(s, Relay::R2));
      CHECK(std::abs(applied[static_cast<Eigen::Index>(row)] - expect) <= 1e-12 * std::abs(expect));
    }
  }
}

TEST_CASE("flatten is row-major and invertible") {
  Eigen::MatrixXcd v(2, 2);
  v << 1.0, 2.0, 3.0, 4.0;
  const Eigen::VectorXcd f = flatten(v);
  CHECK(f[1] == Complex(2.0));
  CHECK(f[2] == Complex(3.0));
  CHECK(unflatten(f, 2) == v);
  CHECK_THROWS_AS(unflatten(f, 3), ShapeError);
}

TEST_CASE("full system keeps the reduced block and adds side columns") {
  const auto ch = sample_channels(Topology::multi_antenna(3), 7);
  const NullingSystem full = build_full_nulling_system(ch);
  CHECK(full.matrix.rows() == 8);
  CHECK(full.matrix.cols() == 11);
  CHECK(full.with_side_scalars);
  CHECK(full.matrix.leftCols(9) == build_nulling_system(ch).matrix);
  // (D1, S2) reaches D1 through R3 only; (D1, S4) has no side path.
  CHECK(full.matrix(0, 9) == Complex(0.0));
  CHECK(full.matrix(0, 10) == ch.downlink_scalar(Relay::R3, Dest::D1) * ch.uplink_scalar(Source::S2, Relay::R3));
  CHECK(full.matrix(1, 9) == Complex(0.0));
  CHECK(full.matrix(1, 10) == Complex(0.0));
}

TEST_CASE("nullspace of constructed matrices") {
  const NullspaceBasis zero = nullspace(Eigen::MatrixXcd::Zero(8, 9));
  CHECK(zero.rank == 0);
  CHECK(zero.dimension() == 9);
  CHECK(orthonormality_error(zero.basis) < 1e-12);

  Eigen::MatrixXcd dup = random_matrix(8, 9, 11);
  dup.row(7) = dup.row(3);
  for (const NullspaceBasis& ns : {nullspace(dup), nullspace_row_reduction(dup)}) {
    CHECK(ns.rank == 7);
    CHECK(ns.dimension() == 2);
    CHECK(orthonormality_error(ns.basis) < 1e-10);
    CHECK((dup * ns.basis).norm() <= 1e-9 * dup.norm());
  }

  const NullspaceBasis full = nullspace(random_matrix(8, 9, 12));
  CHECK(full.rank == 8);
  CHECK(full.dimension() == 1);
  CHECK(full.gap > 1e3);

  const NullspaceBasis square = nullspace(random_matrix(5, 5, 13));
  CHECK(square.dimension() == 0);

  CHECK_THROWS_AS(nullspace(Eigen::MatrixXcd(0, 0)), ShapeError);
  CHECK_THROWS_AS(nullspace_row_reduction(Eigen::MatrixXcd(0, 3)), ShapeError);
}

TEST_CASE("both nullspace routes agree on rank-deficient matrices") {
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    const Eigen::Index rank = 1 + static_cast<Eigen::Index>(seed % 6);
    const Eigen::MatrixXcd m = random_matrix(8, rank, seed) * random_matrix(rank, 9, seed + 1000);
    const NullspaceBasis a = nullspace(m);
    const NullspaceBasis b = nullspace_row_reduction(m);
    CHECK(a.rank == rank);
    CHECK(b.rank == rank);
    CHECK(a.dimension() == 9 - rank);
    CHECK(principal_angle(a.basis, b.basis) <= 1e-8);
  }
}

TEST_CASE("principal angle") {
  const Eigen::MatrixXcd e = Eigen::MatrixXcd::Identity(3, 3);
  CHECK(principal_angle(e.leftCols(1), e.leftCols(1)) == doctest::Approx(0.0));
  CHECK(principal_angle(e.leftCols(1), e.col(1)) == doctest::Approx(std::numbers::pi / 2));
  Eigen::MatrixXcd rotated(3, 2);
  rotated.col(0) = (e.col(0) + e.col(1)) / std::sqrt(2.0);
  rotated.col(1) = Complex(0.0, 1.0) * (e.col(0) - e.col(1)) / std::sqrt(2.0);
  CHECK(principal_angle(e.leftCols(2), rotated) < 1e-12);
}

TEST_CASE("generic nulling rank") {
  CHECK(generic_nulling_rank(1) == 1);
  CHECK(generic_nulling_rank(2) == 4);
  CHECK(generic_nulling_rank(3) == 7);
  CHECK(generic_nulling_rank(4) == 8);
  CHECK(generic_nulling_rank(5) == 8);
  for (int n = 1; n <= 5; ++n) {
    const auto ch = sample_channels(Topology::multi_antenna(n), 40 + static_cast<std::uint64_t>(n));
    const NullingSystem sys = build_nulling_system(ch);
    CHECK(nullspace(sys.matrix).rank == generic_nulling_rank(n));
    CHECK(nullspace_row_reduction(sys.matrix).rank == generic_nulling_rank(n));
  }
  CHECK_THROWS_AS(generic_nulling_rank(0), ConfigError);
}

TEST_CASE("three-antenna constraint blocks share one direction") {
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    const auto ch = sample_channels(Topology::multi_antenna(3), seed);
    auto h = [&](Dest d) -> Eigen::Vector3cd { return ch.downlink(Relay::R2, d); };
    auto g = [&](Source s) -> Eigen::Vector3cd { return ch.uplink(s, Relay::R2); };
    const Eigen::Vector3cd u = cross(cross(h(Dest::D1), h(Dest::D3)), cross(h(Dest::D2), h(Dest::D4)));
    const Eigen::Vector3cd w = cross(cross(g(Source::S2), g(Source::S4)), cross(g(Source::S1), g(Source::S3)));
    const Eigen::VectorXcd shared = kron(u, w);
    const NullingSystem sys = build_nulling_system(ch);
    CHECK(distance_to_row_span(sys.matrix.topRows(4), shared) < 1e-10);
    CHECK(distance_to_row_span(sys.matrix.bottomRows(4), shared) < 1e-10);
  }
}

TEST_CASE("nullspace census over 1000 three-antenna realizations") {
  const NullspaceCensus census = nullspace_census(1000, 1, 100);
  CHECK(census.trials == 1000);
  CHECK(census.rank_full == 0);
  CHECK(census.nullity_counts.size() == 1);
  CHECK(census.nullity_counts.at(2) == 1000);
  CHECK(census.routes_agree == 1000);
  CHECK(census.cross_checked == 100);
  CHECK(census.worst_angle <= 1e-8);

  const NullspaceCensus four = nullspace_census(100, 2, 20, 1e-9, 4);
  CHECK(four.rank_full == 100);
  CHECK(four.expected_nullity == 100);
  CHECK(four.worst_angle <= 1e-8);
}

TEST_CASE("solve_v2 certificate over 1000 realizations") {
  const double power = 1e4;
  int solved = 0;
  double worst_gain_ratio = std::numeric_limits<double>::infinity();
  for (std::uint64_t t = 0; t < 1000; ++t) {
    const auto ch = sample_channels(Topology::multi_antenna(3), derive_seed(5, t));
    const BeamformingSolution sol = solve_v2(ch, power);
    ++solved;
    CHECK(sol.v1 == Complex(0.0));
    CHECK(sol.v3 == Complex(0.0));
    const double scale = sol.v2.norm() * ch.h_max() * ch.h_max();
    for (std::size_t row = 0; row < 8; ++row) {
      const auto [d, s] = kNullingRows[row];
      const double direct = std::abs(direct_bilinear(ch.downlink(Relay::R2, d), sol.v2, ch.uplink(s, Relay::R2)));
      CHECK(direct <= 1e-9 * scale);
    }
    for (Dest d : kDests) {
      const double g = std::abs(direct_bilinear(ch.downlink(Relay::R2, d), sol.v2,
                                                ch.uplink(intended_source(d), Relay::R2)));
      worst_gain_ratio = std::min(worst_gain_ratio, g / sol.v2.norm());
    }
  }
  CHECK(solved == 1000);
  CHECK(worst_gain_ratio > 1e-6 * kDefaultHMin * kDefaultHMin);
}

TEST_CASE("solve_v2 meets the relay power budget") {
  const auto ch = sample_channels(Topology::multi_antenna(3), 8);
  for (double power : {1.0, 1e3, 1e8}) {
    const BeamformingSolution sol = solve_v2(ch, power);
    Eigen::MatrixXcd cov = Eigen::MatrixXcd::Identity(3, 3);
    for (Source s : kSources) cov += power * ch.uplink(s, Relay::R2) * ch.uplink(s, Relay::R2).adjoint();
    CHECK((sol.v2 * cov * sol.v2.adjoint()).trace().real() == doctest::Approx(power).epsilon(1e-10));
  }

  const BeamformingSolution sol = solve_v2(ch, 5.0);
  const auto frames = simulate_mimo(ch, sol, 5.0, 10000, 3, true);
  double sum = 0.0;
  for (const auto& f : frames) sum += f.relay_transmit[1].squaredNorm();
  CHECK(sum / frames.size() == doctest::Approx(5.0).epsilon(0.05));
}

TEST_CASE("nulling ratios are invariant to scaling the beamformer") {
  const auto ch = sample_channels(Topology::multi_antenna(3), 9);
  const BeamformingSolution sol = solve_v2(ch, 1.0);
  const Complex c(-3.0, 0.5);
  const Eigen::MatrixXcd scaled = c * sol.v2;
  for (Dest d : kDests) {
    const Complex g = direct_bilinear(ch.downlink(Relay::R2, d), sol.v2, ch.uplink(intended_source(d), Relay::R2));
    const Complex gs = direct_bilinear(ch.downlink(Relay::R2, d), scaled, ch.uplink(intended_source(d), Relay::R2));
    CHECK(std::abs(gs / g - c) < 1e-12);
  }
  const Complex k(0.8, 0.6);
  ChannelBuilder b(ch.topology(), ch.h_min(), ch.h_max());
  for (auto [s, r] : ch.topology().uplinks()) b.uplink(s, r, ch.uplink(s, r));
  for (auto [r, d] : ch.topology().downlinks()) b.downlink(r, d, Eigen::VectorXcd(k * ch.downlink(r, d)));
  const auto turned = b.build();
  const NullingSystem sys = build_nulling_system(turned);
  const double residual = (sys.matrix * flatten(sol.v2)).cwiseAbs().maxCoeff();
  CHECK(residual <= 1e-9 * sol.v2.norm() * ch.h_max() * ch.h_max());
}

TEST_CASE("solution json") {
  const BeamformingSolution sol = solve_v2(sample_channels(Topology::multi_antenna(3), 4), 10.0);
  const nlohmann::json j = solution_to_json(sol);
  CHECK(j.at("V2").size() == 9);
  CHECK(j.at("residuals").size() == 8);
  CHECK(j.at("desired_gains").size() == 4);
  CHECK(j.at("v1") == nlohmann::json::array({0.0, 0.0}));
}

TEST_CASE("feasibility counting") {
  const auto a = feasibility_count(2, true);
  CHECK(a.parameters == 6);
  CHECK(a.constraints == 8);
  CHECK_FALSE(a.counting_feasible);
  const auto b = feasibility_count(3, false);
  CHECK(b.parameters == 9);
  CHECK(b.constraints == 8);
  CHECK(b.counting_feasible);
  const auto c = feasibility_count(1, true);
  CHECK(c.parameters == 3);
  CHECK_FALSE(c.counting_feasible);
  CHECK_THROWS_AS(feasibility_count(0, false), ConfigError);
}

TEST_CASE("side relays off or removed give bitwise identical results") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto ch = sample_channels(Topology::multi_antenna(3), seed);
    for (double db : {40.0, 70.0, 100.0}) {
      const auto with = run_mimo_scheme(ch, db, true);
      const auto without = run_mimo_scheme(ch.without_side_relays(), db, false);
      CHECK(with.report.desired_gain == without.report.desired_gain);
      CHECK(with.report.forwarded_noise == without.report.forwarded_noise);
      CHECK(with.rates.rates == without.rates.rates);
    }
  }
}

TEST_CASE("mimo symbol run leaves only the wanted term") {
  const auto ch = sample_channels(Topology::multi_antenna(3), 14);
  const double power = 100.0;
  const BeamformingSolution sol = solve_v2(ch, power);
  const auto frames = simulate_mimo(ch, sol, power, 40, 6, false);
  for (std::size_t m = 1; m < frames.size(); ++m) {
    for (Dest d : kDests) {
      const Source known = co_located_source(d);
      const Source wanted = intended_source(d);
      const Complex known_term = effective_gain(ch, sol, d, known) * frames[m - 1].source[index(known)];
      const Complex wanted_term = effective_gain(ch, sol, d, wanted) * frames[m - 1].source[index(wanted)];
      const Complex leftover = frames[m].dest_received[index(d)] - known_term;
      CHECK(std::abs(leftover - wanted_term) <= 1e-9 * std::abs(wanted_term));
    }
  }
}

TEST_CASE("mimo slopes") {
  const auto grid = analysis::power_grid_db(40.0, 100.0, 10.0);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto ch = sample_channels(Topology::multi_antenna(3), seed);
    std::vector<analysis::RatePoint> points;
    for (double db : grid) points.push_back(run_mimo_scheme(ch, db, true).rates);
    const auto est = analysis::dof_slope(points);
    CHECK(std::abs(est.total_slope - 4.0) <= 0.1);
    for (double d : est.user_slopes) CHECK(std::abs(d - 1.0) <= 0.05);
  }
}
