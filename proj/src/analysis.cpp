#include "butterfly/analysis.hpp"

#include "butterfly/errors.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>

namespace butterfly::analysis {

namespace {

struct LineFit {
  double slope;
  double intercept;
};

LineFit fit_line(std::span<const double> x, std::span<const double> y) {
  const double n = static_cast<double>(x.size());
  const double mean_x = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double mean_y = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mean_x) * (x[i] - mean_x);
    sxy += (x[i] - mean_x) * (y[i] - mean_y);
  }
  const double slope = sxy / sxx;
  return {slope, mean_y - slope * mean_x};
}

std::string format17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

RatePoint RatePoint::at(double power_db, const std::array<double, 4>& rates) {
  RatePoint p;
  p.power_db = power_db;
  p.power = db_to_linear(power_db);
  p.rates = rates;
  p.sum = rates[0] + rates[1] + rates[2] + rates[3];
  return p;
}

double sinr(Complex desired_gain, std::span<const Complex> residual_gains, double forwarded_noise,
            double effective_power) {
  if (forwarded_noise < 0.0 || !std::isfinite(forwarded_noise)) {
    throw NumericError("forwarded noise must be finite and nonnegative");
  }
  if (effective_power < 0.0 || !std::isfinite(effective_power)) {
    throw NumericError("effective power must be finite and nonnegative");
  }
  double interference = 0.0;
  for (Complex r : residual_gains) interference += std::norm(r) * effective_power;
  const double denominator = interference + forwarded_noise + 1.0;
  if (!(denominator > 0.0)) throw NumericError("SINR denominator is zero");
  return std::norm(desired_gain) * effective_power / denominator;
}

double rate(double sinr) {
  if (sinr < 0.0 || std::isnan(sinr)) throw NumericError("rate of a negative SINR");
  return std::log2(1.0 + sinr);
}

double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

std::vector<double> power_grid_db(double start_db, double stop_db, double step_db) {
  if (!(step_db > 0.0) || !(stop_db >= start_db)) {
    throw ConfigError("power grid needs step > 0 and stop >= start");
  }
  std::vector<double> grid;
  const auto count = static_cast<long>(std::floor((stop_db - start_db) / step_db + 1e-9));
  for (long i = 0; i <= count; ++i) grid.push_back(start_db + static_cast<double>(i) * step_db);
  return grid;
}

DofEstimate dof_slope(std::span<const RatePoint> points) {
  if (points.size() < 3) throw EstimationError("DoF regression needs at least 3 power points");
  for (std::size_t i = 1; i < points.size(); ++i) {
    if (!(points[i].power > points[i - 1].power)) {
      throw EstimationError("power grid must be strictly increasing");
    }
  }
  if (points.back().power < 1e4 * points.front().power * (1.0 - 1e-12)) {
    throw EstimationError("power grid must span at least 40 dB");
  }

  std::vector<double> x;
  std::vector<double> y(points.size());
  for (const auto& p : points) x.push_back(std::log2(p.power));

  DofEstimate est;
  for (std::size_t u = 0; u < 4; ++u) {
    for (std::size_t i = 0; i < points.size(); ++i) y[i] = points[i].rates[u];
    const auto fit = fit_line(x, y);
    est.user_slopes[u] = fit.slope;
    est.user_intercepts[u] = fit.intercept;
  }
  for (std::size_t i = 0; i < points.size(); ++i) y[i] = points[i].sum;
  const auto fit = fit_line(x, y);
  est.total_slope = fit.slope;
  est.total_intercept = fit.intercept;

  const double mean_y = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
  double ss_res = 0.0;
  double ss_tot = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double r = y[i] - (fit.slope * x[i] + fit.intercept);
    ss_res += r * r;
    ss_tot += (y[i] - mean_y) * (y[i] - mean_y);
  }
  // A constant series is fitted exactly by a flat line.
  est.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
  for (const auto& p : points) est.grid_db.push_back(p.power_db);
  return est;
}

void write_rate_csv(std::ostream& os, std::span<const RatePoint> points) {
  os << "P_dB,R1,R2,R3,R4,sum\n";
  for (const auto& p : points) {
    os << format17(p.power_db);
    for (double r : p.rates) os << ',' << format17(r);
    os << ',' << format17(p.sum) << '\n';
  }
}

nlohmann::json dof_to_json(const DofEstimate& est) {
  return {{"slopes", est.user_slopes},
          {"total", est.total_slope},
          {"r2", est.r_squared},
          {"grid", est.grid_db}};
}

}  // namespace butterfly::analysis
