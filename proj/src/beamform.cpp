#include "butterfly/beamform.hpp"

#include "butterfly/channel_json.hpp"
#include "butterfly/errors.hpp"
#include "butterfly/keyed_stream.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace butterfly::beamform {

namespace {

constexpr int kConstraints = 8;

void require_multi_antenna(const ChannelRealization& ch) {
  if (ch.topology().is_single_antenna()) {
    throw UnsupportedSchemeError("nulling needs a multi-antenna center relay, got " +
                                 ch.topology().name());
  }
}

// H_{R2,d}^T V2 H_{s,R2}
Complex bilinear(const Eigen::VectorXcd& downlink, const Eigen::MatrixXcd& v2,
                 const Eigen::VectorXcd& uplink) {
  return (downlink.transpose() * v2 * uplink).value();
}

/// Modified Gram-Schmidt, applied twice. Columns that collapse are dropped.
Eigen::MatrixXcd orthonormalise(const Eigen::MatrixXcd& vectors) {
  std::vector<Eigen::VectorXcd> kept;
  for (Eigen::Index c = 0; c < vectors.cols(); ++c) {
    Eigen::VectorXcd v = vectors.col(c);
    const double original = v.norm();
    for (int pass = 0; pass < 2; ++pass) {
      for (const auto& q : kept) v -= q * q.dot(v);
    }
    const double norm = v.norm();
    if (norm <= 1e-12 * original || norm == 0.0) continue;
    kept.push_back(v / norm);
  }
  Eigen::MatrixXcd out(vectors.rows(), static_cast<Eigen::Index>(kept.size()));
  for (std::size_t i = 0; i < kept.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = kept[i];
  return out;
}

void check_nullspace_args(const Eigen::MatrixXcd& m, double tol) {
  if (m.rows() == 0 || m.cols() == 0) throw ShapeError("nullspace of an empty matrix");
  if (!(tol > 0.0)) throw ConfigError("nullspace tolerance must be positive");
}

}  // namespace

Eigen::VectorXcd flatten(const Eigen::MatrixXcd& v2) {
  const Eigen::Index n = v2.rows();
  Eigen::VectorXcd out(v2.size());
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index k = 0; k < v2.cols(); ++k) out[j * v2.cols() + k] = v2(j, k);
  }
  return out;
}

Eigen::MatrixXcd unflatten(const Eigen::VectorXcd& v, int n) {
  if (v.size() != static_cast<Eigen::Index>(n) * n) throw ShapeError("flattened beamformer has wrong size");
  Eigen::MatrixXcd out(n, n);
  for (int j = 0; j < n; ++j) {
    for (int k = 0; k < n; ++k) out(j, k) = v[j * n + k];
  }
  return out;
}

NullingSystem build_nulling_system(const ChannelRealization& ch) {
  require_multi_antenna(ch);
  const int n = ch.topology().center_antennas();
  NullingSystem sys;
  sys.antennas = n;
  sys.matrix.resize(kConstraints, static_cast<Eigen::Index>(n) * n);
  for (int row = 0; row < kConstraints; ++row) {
    const auto [d, s] = kNullingRows[static_cast<std::size_t>(row)];
    const Eigen::VectorXcd& h = ch.downlink(Relay::R2, d);
    const Eigen::VectorXcd& g = ch.uplink(s, Relay::R2);
    // sum_jk h_j V_jk g_k: coefficient of V_jk is h_j g_k.
    for (int j = 0; j < n; ++j) {
      for (int k = 0; k < n; ++k) sys.matrix(row, j * n + k) = h[j] * g[k];
    }
  }
  return sys;
}

NullingSystem build_full_nulling_system(const ChannelRealization& ch) {
  NullingSystem reduced = build_nulling_system(ch);
  const Topology& topo = ch.topology();
  const Eigen::Index nn = reduced.matrix.cols();
  NullingSystem sys;
  sys.antennas = reduced.antennas;
  sys.with_side_scalars = true;
  sys.matrix = Eigen::MatrixXcd::Zero(kConstraints, nn + 2);
  sys.matrix.leftCols(nn) = reduced.matrix;
  const std::array<Relay, 2> side{Relay::R1, Relay::R3};
  for (int row = 0; row < kConstraints; ++row) {
    const auto [d, s] = kNullingRows[static_cast<std::size_t>(row)];
    for (std::size_t c = 0; c < side.size(); ++c) {
      const Relay r = side[c];
      if (topo.has_link(s, r) && topo.has_link(r, d)) {
        sys.matrix(row, nn + static_cast<Eigen::Index>(c)) =
            ch.downlink_scalar(r, d) * ch.uplink_scalar(s, r);
      }
    }
  }
  return sys;
}

NullspaceBasis nullspace(const Eigen::MatrixXcd& m, double tol) {
  check_nullspace_args(m, tol);
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(m, Eigen::ComputeFullV);
  const Eigen::VectorXd& sv = svd.singularValues();
  const double threshold = tol * sv[0];

  NullspaceBasis out;
  out.spectrum = sv;
  out.rank = 0;
  while (out.rank < sv.size() && sv[out.rank] > threshold) ++out.rank;

  const Eigen::Index cols = m.cols();
  const Eigen::Index nullity = cols - out.rank;
  out.basis.resize(cols, nullity);
  for (Eigen::Index i = 0; i < nullity; ++i) out.basis.col(i) = svd.matrixV().col(cols - 1 - i);

  if (out.rank == 0) {
    out.gap = 0.0;
  } else if (out.rank < sv.size() && sv[out.rank] > 0.0) {
    out.gap = sv[out.rank - 1] / sv[out.rank];
  } else {
    out.gap = std::numeric_limits<double>::infinity();
  }
  return out;
}

NullspaceBasis nullspace_row_reduction(const Eigen::MatrixXcd& m, double tol) {
  check_nullspace_args(m, tol);
  Eigen::MatrixXcd a = m;
  const Eigen::Index rows = a.rows();
  const Eigen::Index cols = a.cols();
  const double threshold = tol * a.cwiseAbs().maxCoeff();
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(cols));
  std::iota(perm.begin(), perm.end(), 0);

  NullspaceBasis out;
  std::vector<double> pivots;
  double first_rejected = 0.0;
  Eigen::Index rank = 0;
  for (; rank < std::min(rows, cols); ++rank) {
    Eigen::Index pr = 0;
    Eigen::Index pc = 0;
    const double best = a.bottomRightCorner(rows - rank, cols - rank).cwiseAbs().maxCoeff(&pr, &pc);
    if (!(best > threshold)) {
      first_rejected = best;
      break;
    }
    pr += rank;
    pc += rank;
    a.row(rank).swap(a.row(pr));
    a.col(rank).swap(a.col(pc));
    std::swap(perm[static_cast<std::size_t>(rank)], perm[static_cast<std::size_t>(pc)]);
    pivots.push_back(best);

    a.row(rank) /= a(rank, rank);
    for (Eigen::Index i = 0; i < rows; ++i) {
      if (i == rank) continue;
      const Complex factor = a(i, rank);
      if (factor != Complex{0.0, 0.0}) a.row(i) -= factor * a.row(rank);
    }
  }
  out.rank = static_cast<int>(rank);
  out.spectrum = Eigen::Map<const Eigen::VectorXd>(pivots.data(), static_cast<Eigen::Index>(pivots.size()));

  // Reduced form in permuted coordinates: [I F; 0 0]; free variables span the kernel.
  const Eigen::Index nullity = cols - rank;
  Eigen::MatrixXcd kernel = Eigen::MatrixXcd::Zero(cols, nullity);
  for (Eigen::Index f = 0; f < nullity; ++f) {
    Eigen::VectorXcd permuted = Eigen::VectorXcd::Zero(cols);
    permuted.head(rank) = -a.block(0, rank + f, rank, 1);
    permuted[rank + f] = 1.0;
    for (Eigen::Index j = 0; j < cols; ++j) kernel(perm[static_cast<std::size_t>(j)], f) = permuted[j];
  }
  out.basis = orthonormalise(kernel);

  if (rank == 0) {
    out.gap = 0.0;
  } else if (first_rejected > 0.0) {
    out.gap = pivots.back() / first_rejected;
  } else {
    out.gap = std::numeric_limits<double>::infinity();
  }
  return out;
}

double principal_angle(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError("principal angle needs subspaces of equal dimension");
  }
  if (a.cols() == 0) return 0.0;
  // sin of the largest angle = || (I - A A^H) B ||_2
  const Eigen::MatrixXcd leftover = b - a * (a.adjoint() * b);
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(leftover);
  return std::asin(std::min(1.0, svd.singularValues()[0]));
}

int generic_nulling_rank(int n_antennas) {
  if (n_antennas < 1) throw ConfigError("relay needs at least one antenna");
  // Each destination pair sees two interferers, so its four rows span
  // U (x) W with dim U = dim W = min(2, n). The two pairs' subspaces meet in
  // (U1 ^ U2) (x) (W1 ^ W2), which is generically max(0, 4 - n) squared.
  const int block = std::min(2, n_antennas);
  const int overlap = std::min(block, std::max(0, 4 - n_antennas));
  return 2 * block * block - overlap * overlap;
}

BeamformingSolution solve_v2(const ChannelRealization& ch, double power, double rank_tol) {
  if (!(power > 0.0)) throw ConfigError("transmit power must be positive");
  const NullingSystem sys = build_nulling_system(ch);
  const NullspaceBasis ns = nullspace(sys.matrix, rank_tol);
  const int generic = generic_nulling_rank(sys.antennas);
  if (ns.rank < generic) {
    throw DegenerateChannelError("nulling system has rank " + std::to_string(ns.rank) + " < " +
                                 std::to_string(generic) + " for this realization");
  }
  if (ns.dimension() == 0) {
    throw DegenerateChannelError("nulling system has no nonzero solution with " +
                                 std::to_string(sys.antennas) + " relay antennas");
  }
  const int n = sys.antennas;
  const Eigen::MatrixXcd direction = unflatten(ns.basis.col(0), n);

  Eigen::MatrixXcd covariance = Eigen::MatrixXcd::Identity(n, n);
  for (Source s : kSources) {
    const Eigen::VectorXcd& g = ch.uplink(s, Relay::R2);
    covariance += power * g * g.adjoint();
  }
  const double unit_power = (direction * covariance * direction.adjoint()).trace().real();

  BeamformingSolution sol;
  sol.power_scale[index(Relay::R2)] = std::sqrt(power / unit_power);
  sol.v2 = sol.power_scale[index(Relay::R2)] * direction;

  const double hmax2 = ch.h_max() * ch.h_max();
  const double scale = sol.v2.norm() * hmax2;
  for (std::size_t row = 0; row < kNullingRows.size(); ++row) {
    const auto [d, s] = kNullingRows[row];
    sol.residuals[row] = std::abs(bilinear(ch.downlink(Relay::R2, d), sol.v2, ch.uplink(s, Relay::R2)));
    if (sol.residuals[row] > 1e-9 * scale) {
      throw DegenerateChannelError("nulling residual " + std::to_string(sol.residuals[row] / scale) +
                                   " fails substitution check");
    }
  }
  for (Dest d : kDests) {
    const Source s = intended_source(d);
    sol.desired_gains[index(d)] = bilinear(ch.downlink(Relay::R2, d), sol.v2, ch.uplink(s, Relay::R2));
    if (std::abs(sol.desired_gains[index(d)]) < 1e-9 * scale) {
      throw DegenerateChannelError("desired gain at " + to_string(d) + " vanishes after nulling");
    }
  }
  return sol;
}

nlohmann::json solution_to_json(const BeamformingSolution& sol) {
  nlohmann::json v2 = nlohmann::json::array();
  for (Eigen::Index j = 0; j < sol.v2.rows(); ++j) {
    for (Eigen::Index k = 0; k < sol.v2.cols(); ++k) v2.push_back(complex_to_json(sol.v2(j, k)));
  }
  nlohmann::json gains = nlohmann::json::array();
  for (Complex g : sol.desired_gains) gains.push_back(complex_to_json(g));
  return {{"v1", complex_to_json(sol.v1)},
          {"v3", complex_to_json(sol.v3)},
          {"V2", std::move(v2)},
          {"residuals", sol.residuals},
          {"desired_gains", std::move(gains)}};
}

Complex effective_gain(const ChannelRealization& ch, const BeamformingSolution& sol, Dest d,
                       Source s) {
  const Topology& topo = ch.topology();
  Complex gain = bilinear(ch.downlink(Relay::R2, d), sol.v2, ch.uplink(s, Relay::R2));
  if (topo.has_link(s, Relay::R1) && topo.has_link(Relay::R1, d)) {
    gain += ch.downlink_scalar(Relay::R1, d) * sol.v1 * ch.uplink_scalar(s, Relay::R1);
  }
  if (topo.has_link(s, Relay::R3) && topo.has_link(Relay::R3, d)) {
    gain += ch.downlink_scalar(Relay::R3, d) * sol.v3 * ch.uplink_scalar(s, Relay::R3);
  }
  return gain;
}

schemes::SchemeRun run_mimo_scheme(const ChannelRealization& ch, double power_db,
                                   bool use_side_relays) {
  require_multi_antenna(ch);
  const Topology& topo = ch.topology();
  if (use_side_relays && topo.kind() == Topology::Kind::kMultiAntennaRelayOnly) {
    throw UnsupportedSchemeError("side relays requested on a topology without them");
  }
  const ChannelRealization working =
      (!use_side_relays && topo.kind() == Topology::Kind::kMultiAntennaRelay) ? ch.without_side_relays()
                                                                               : ch;
  const double power = analysis::db_to_linear(power_db);
  const BeamformingSolution sol = solve_v2(working, power);

  schemes::SchemeRun run;
  auto& rep = run.report;
  rep.scheme = use_side_relays ? "mimo" : "mimo_no_side";
  rep.power = power;
  rep.effective_power = power;
  rep.active_nodes = {"S1", "S2", "S3", "S4", "R2"};
  for (Dest d : kDests) {
    const Source wanted = intended_source(d);
    const Source known = co_located_source(d);
    rep.desired_gain[index(d)] = effective_gain(working, sol, d, wanted);
    for (Source s : kSources) {
      if (s != wanted && s != known) rep.residual_gains[index(d)].push_back(effective_gain(working, sol, d, s));
    }
    double forwarded = (working.downlink(Relay::R2, d).transpose() * sol.v2).squaredNorm();
    if (working.topology().has_link(Relay::R1, d)) forwarded += std::norm(working.downlink_scalar(Relay::R1, d) * sol.v1);
    if (working.topology().has_link(Relay::R3, d)) forwarded += std::norm(working.downlink_scalar(Relay::R3, d) * sol.v3);
    rep.forwarded_noise[index(d)] = forwarded;
    rep.active_dest[index(d)] = true;
  }
  run.rates = schemes::rates_from_report(rep, power_db);
  return run;
}

std::vector<SymbolFrame> simulate_mimo(const ChannelRealization& ch,
                                       const BeamformingSolution& sol, double power,
                                       std::size_t n_slots, std::uint64_t seed,
                                       bool with_noise) {
  require_multi_antenna(ch);
  const Topology& topo = ch.topology();
  const double amplitude = std::sqrt(power);
  std::vector<SymbolFrame> frames;
  frames.reserve(n_slots);
  RelaySignals previous_rx = zero_relay_signals(topo);
  for (std::size_t m = 0; m < n_slots; ++m) {
    SymbolFrame f;
    f.slot = m;
    for (Source s : kSources) {
      f.source[index(s)] = amplitude * schemes::codebook_symbol(seed, static_cast<std::uint16_t>(index(s)), m);
    }
    f.relay_noise = with_noise ? relay_noise(topo, seed, m) : zero_relay_signals(topo);
    f.dest_noise = with_noise ? destination_noise(seed, m) : DestSymbols{};
    f.relay_received = first_hop(ch, f.source, f.relay_noise);
    f.relay_transmit = zero_relay_signals(topo);
    f.relay_transmit[index(Relay::R2)] = sol.v2 * previous_rx[index(Relay::R2)];
    if (topo.has_relay(Relay::R1)) f.relay_transmit[index(Relay::R1)] = sol.v1 * previous_rx[index(Relay::R1)];
    if (topo.has_relay(Relay::R3)) f.relay_transmit[index(Relay::R3)] = sol.v3 * previous_rx[index(Relay::R3)];
    f.dest_received = second_hop(ch, f.relay_transmit, f.dest_noise);
    previous_rx = f.relay_received;
    frames.push_back(std::move(f));
  }
  return frames;
}

FeasibilityCount feasibility_count(int n_antennas, bool include_side_scalars) {
  if (n_antennas < 1) throw ConfigError("relay antenna count must be positive");
  FeasibilityCount c;
  c.parameters = n_antennas * n_antennas + (include_side_scalars ? 2 : 0);
  c.constraints = kConstraints;
  c.counting_feasible = c.parameters > c.constraints;
  return c;
}

NullspaceCensus nullspace_census(int n_trials, std::uint64_t seed, int cross_check_trials,
                                 double rank_tol, int n_antennas) {
  if (n_trials < 1) throw ConfigError("census needs at least one trial");
  const Topology topo = Topology::multi_antenna(n_antennas);
  const int expected = std::max(0, n_antennas * n_antennas - kConstraints);
  NullspaceCensus census;
  census.trials = n_trials;
  for (int t = 0; t < n_trials; ++t) {
    const auto ch = sample_channels(topo, derive_seed(seed, static_cast<std::uint64_t>(t)));
    const NullingSystem sys = build_nulling_system(ch);
    const NullspaceBasis svd = nullspace(sys.matrix, rank_tol);
    const NullspaceBasis rr = nullspace_row_reduction(sys.matrix, rank_tol);
    if (svd.rank == kConstraints) ++census.rank_full;
    if (svd.dimension() == expected) ++census.expected_nullity;
    ++census.nullity_counts[svd.dimension()];
    if (rr.rank == svd.rank && rr.dimension() == svd.dimension()) ++census.routes_agree;
    if (t < cross_check_trials && rr.dimension() == svd.dimension()) {
      ++census.cross_checked;
      census.worst_angle = std::max(census.worst_angle, principal_angle(svd.basis, rr.basis));
    }
  }
  return census;
}

}  // namespace butterfly::beamform
