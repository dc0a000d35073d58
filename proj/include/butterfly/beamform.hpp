/**
 * @file beamform.hpp
 * @brief Interference nulling with a multi-antenna center relay.
 *
 * With side relays switched off (v1 = v3 = 0), destination d sees source s
 * through R2 with gain H_{R2,d} V2 H_{s,R2}. Each destination must null the
 * two sources that are neither wanted nor known, giving eight homogeneous
 * linear equations in the n^2 entries of V2. For n = 3 the system is 8x9 but
 * only rank 7, so the solution space is two-dimensional.
 */
#pragma once

#include "butterfly/netmodel.hpp"
#include "butterfly/schemes.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <array>
#include <map>
#include <vector>

namespace butterfly::beamform {

/// One nulling condition: `interferer` must not reach `dest`.
struct NullingRow {
  Dest dest;
  Source interferer;
};

/// Row order used by every nulling system.
inline constexpr std::array<NullingRow, 8> kNullingRows{{
    {Dest::D1, Source::S2}, {Dest::D1, Source::S4}, {Dest::D3, Source::S4},
    {Dest::D3, Source::S2}, {Dest::D2, Source::S1}, {Dest::D2, Source::S3},
    {Dest::D4, Source::S3}, {Dest::D4, Source::S1},
}};

struct NullingSystem {
  /// 8 x n^2 (or 8 x (n^2 + 2) with side scalars v1, v3 as the last two columns).
  Eigen::MatrixXcd matrix;
  std::array<NullingRow, 8> rows = kNullingRows;
  int antennas = 0;
  bool with_side_scalars = false;
};

/// Row-major flattening: entry (j, k) of V2 maps to column j * n + k.
Eigen::VectorXcd flatten(const Eigen::MatrixXcd& v2);
Eigen::MatrixXcd unflatten(const Eigen::VectorXcd& v, int n);

/// Rows satisfy M flatten(V2) = H_{R2,d}^T V2 H_{s,R2} for the eight (d, s) pairs.
NullingSystem build_nulling_system(const ChannelRealization& ch);

/// The unreduced system with the side-relay scalars v1, v3 as extra unknowns.
/// Side terms follow the topology's link sets.
NullingSystem build_full_nulling_system(const ChannelRealization& ch);

struct NullspaceBasis {
  /// Orthonormal basis vectors as columns.
  Eigen::MatrixXcd basis;
  int rank = 0;
  /// Singular values (SVD route) or absolute pivots (row-reduction route).
  Eigen::VectorXd spectrum;
  /// Ratio between the smallest retained and the largest discarded spectrum
  /// entry; infinity when nothing was discarded.
  double gap = 0.0;

  int dimension() const { return static_cast<int>(basis.cols()); }
};

/// Right nullspace from the SVD; singular values at or below tol * sigma_max
/// are treated as zero. Basis columns are ordered from the smallest singular
/// direction upward.
NullspaceBasis nullspace(const Eigen::MatrixXcd& m, double tol = 1e-9);

/// Independent route: Gaussian elimination with complete pivoting, pivots at
/// or below tol * max|m_ij| are treated as zero, followed by orthonormalisation.
NullspaceBasis nullspace_row_reduction(const Eigen::MatrixXcd& m, double tol = 1e-9);

/// Largest principal angle (radians) between the column spans of two
/// orthonormal bases of equal dimension.
double principal_angle(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b);

struct BeamformingSolution {
  Complex v1{0.0, 0.0};
  Complex v3{0.0, 0.0};
  Eigen::MatrixXcd v2;
  /// Normalisation factor applied per relay (R1, R2, R3).
  std::array<double, 3> power_scale{1.0, 1.0, 1.0};
  /// |H_{R2,d}^T V2 H_{s,R2}| in kNullingRows order.
  std::array<double, 8> residuals{};
  /// H_{R2,i}^T V2 H_{i,R2}
  std::array<Complex, 4> desired_gains{};
};

/// Rank of the nulling system for generic channels. Below four antennas the
/// two destination pairs' constraint blocks share directions, so for n = 3 it
/// is 7 rather than 8.
int generic_nulling_rank(int n_antennas);

/// Null-space beamformer scaled so that R2 transmits average power P given
/// its received covariance P sum_i H_{i,R2} H_{i,R2}^H + I.
BeamformingSolution solve_v2(const ChannelRealization& ch, double power, double rank_tol = 1e-9);

nlohmann::json solution_to_json(const BeamformingSolution& sol);

/// Effective gain of source s at destination d through every active relay.
Complex effective_gain(const ChannelRealization& ch, const BeamformingSolution& sol, Dest d,
                       Source s);

/// Per-user report of the nulling scheme. With `use_side_relays` the side
/// relays take part with v1 = v3 = 0; without it they are removed from the
/// topology. Both give identical gains.
schemes::SchemeRun run_mimo_scheme(const ChannelRealization& ch, double power_db,
                                   bool use_side_relays);

/// Symbol-level run: all four sources send sqrt(P) times codebook symbols and
/// R2 transmits V2 Y_R2[m-1].
std::vector<SymbolFrame> simulate_mimo(const ChannelRealization& ch,
                                       const BeamformingSolution& sol, double power,
                                       std::size_t n_slots, std::uint64_t seed,
                                       bool with_noise);

struct FeasibilityCount {
  int parameters = 0;
  int constraints = 0;
  bool counting_feasible = false;
};

/// n^2 (+2 with side scalars) unknowns against the eight nulling equations.
FeasibilityCount feasibility_count(int n_antennas, bool include_side_scalars);

/// Rank census of random n-antenna nulling systems across both solvers.
struct NullspaceCensus {
  int trials = 0;
  int rank_full = 0;        // SVD rank equals 8
  int expected_nullity = 0;  // SVD nullspace dimension equals n^2 - 8
  int routes_agree = 0;      // row reduction finds the same rank
  int cross_checked = 0;
  double worst_angle = 0.0;  // over the cross-checked trials
  std::map<int, int> nullity_counts;  // SVD nullspace dimension -> trials
};

NullspaceCensus nullspace_census(int n_trials, std::uint64_t seed, int cross_check_trials,
                                 double rank_tol = 1e-9, int n_antennas = 3);

}  // namespace butterfly::beamform
