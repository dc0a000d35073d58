/**
 * @file analysis.hpp
 * @brief SINR and rate evaluation, power grids and DoF slope regression.
 */
#pragma once

#include "butterfly/netmodel.hpp"

#include <json.hpp>

#include <array>
#include <iosfwd>
#include <span>
#include <vector>

namespace butterfly::analysis {

/// Per-user rates (bits per channel use) at one transmit power.
struct RatePoint {
  double power_db = 0.0;
  double power = 1.0;
  std::array<double, 4> rates{};
  double sum = 0.0;

  /// Builds a point at `power_db`; the sum is computed from the components.
  static RatePoint at(double power_db, const std::array<double, 4>& rates);
};

/// |g|^2 P / (sum |r_j|^2 P + forwarded_noise + 1).
double sinr(Complex desired_gain, std::span<const Complex> residual_gains,
            double forwarded_noise, double effective_power);

/// log2(1 + sinr)
double rate(double sinr);

double db_to_linear(double db);

/// Inclusive dB grid start, start+step, ..., stop.
std::vector<double> power_grid_db(double start_db, double stop_db, double step_db);

/// Least-squares slopes of each rate series against log2(P).
struct DofEstimate {
  std::array<double, 4> user_slopes{};
  std::array<double, 4> user_intercepts{};
  double total_slope = 0.0;
  double total_intercept = 0.0;
  /// Coefficient of determination of the sum-rate fit.
  double r_squared = 0.0;
  std::vector<double> grid_db;
};

/// Needs at least 3 points, strictly increasing power, spanning at least 40 dB.
DofEstimate dof_slope(std::span<const RatePoint> points);

/// Columns P_dB,R1,R2,R3,R4,sum; 17 significant digits.
void write_rate_csv(std::ostream& os, std::span<const RatePoint> points);
nlohmann::json dof_to_json(const DofEstimate& est);

}  // namespace butterfly::analysis
