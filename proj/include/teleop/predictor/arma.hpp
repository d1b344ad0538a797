#pragma once

#include <Eigen/Core>
#include <array>
#include <span>
#include <vector>

#include "teleop/core/pose.hpp"
#include "teleop/core/time.hpp"
#include "teleop/predictor/history.hpp"

namespace teleop {

struct ArmaOrders {
  int p = 4;
  int q = 2;
};

// ARMA(p, q) coefficients for one scalar series:
// x_t = c + sum_a phi_a x_{t-a} + sum_b theta_b eps_{t-b} + eps_t.
struct ArmaAxis {
  double c = 0.0;
  Eigen::VectorXd phi;
  Eigen::VectorXd theta;
  int effective_q = 0;  // MA order that survived the rank checks
  bool constant = false;
  bool stationary = true;
  // In-sample one-step residuals at the end of the fit window, newest last.
  std::vector<double> residuals;

  // lags[0] is x_{t-1}; shocks[0] is eps_{t-1}. Missing entries count as 0.
  double one_step(std::span<const double> lags, std::span<const double> shocks) const;
};

// One independent ARMA model per pose axis.
struct ArmaModel {
  ArmaOrders orders;
  double sample_period_ms = 1000.0 / 120.0;
  SimTime fitted_through{0};  // timestamp of the newest sample in the fit window
  std::array<ArmaAxis, 7> axes;

  bool stationary() const;
};

// Two-stage Hannan-Rissanen estimate for a scalar series. A long AR fit
// supplies residual proxies, then c, phi and theta come from one joint least
// squares. When that regression is rank deficient q drops by one and the fit
// is retried, as it is when the MA part comes out non-invertible. At q = 0 the intercept is profiled out through the window mean,
// and a remaining rank deficiency is solved in the minimum-norm sense.
ArmaAxis fit_axis(std::span<const double> series, ArmaOrders orders);

// Throws NotEnoughData unless the window holds at least 10 * (p + q + 1)
// samples.
ArmaModel fit(const HistoryBuffer& history, ArmaOrders orders);

// In-sample one-step residuals of `axis` over `series`, with the shocks before
// the first sample taken as zero. The first p entries are zero.
std::vector<double> one_step_residuals(const ArmaAxis& axis, std::span<const double> series);

// Forecasts `steps` samples past the end of `series` by feeding predictions
// back and setting future shocks to zero. `shocks` holds the most recent
// residuals, newest last.
double forecast_axis(const ArmaAxis& axis, std::span<const double> series,
                     std::span<const double> shocks, int steps);

constexpr double kMaxHorizonMs = 1000.0;

// Recursive forecast horizon_ms ahead of the newest sample in `history`.
// Whole sample periods are exact recursion steps; a fractional remainder
// interpolates between the two neighbouring steps. Horizon 0 returns the
// newest observation unchanged. Throws HorizonOutOfRange outside
// [0, max_horizon_ms].
Pose predict_recursive(const ArmaModel& model, const HistoryBuffer& history, double horizon_ms,
                       double max_horizon_ms = kMaxHorizonMs);

struct DualPrediction {
  Pose control;  // for the real-world arm
  Pose visual;   // for proactive rendering
};

DualPrediction dual_predict(const ArmaModel& model, const HistoryBuffer& history,
                            double control_horizon_ms, double visual_horizon_ms,
                            double max_horizon_ms = kMaxHorizonMs);

// Fits once and forecasts both horizons from that model.
DualPrediction dual_predict(const HistoryBuffer& history, double control_horizon_ms,
                            double visual_horizon_ms, ArmaOrders orders = {},
                            double max_horizon_ms = kMaxHorizonMs);

}  // namespace teleop
