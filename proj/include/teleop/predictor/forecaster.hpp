#pragma once

#include <optional>

#include "teleop/core/pose.hpp"
#include "teleop/core/time.hpp"
#include "teleop/predictor/arma.hpp"
#include "teleop/predictor/history.hpp"

namespace teleop {

// Operator-side pose forecaster. ARMA is the shipped implementation; other
// predictors plug in behind the same interface.
class Forecaster {
 public:
  virtual ~Forecaster() = default;
  virtual void observe(SimTime t, const Pose& pose) = 0;
  virtual Pose predict(double horizon_ms) const = 0;
  virtual DualPrediction predict_pair(double control_horizon_ms, double visual_horizon_ms) const {
    return {predict(control_horizon_ms), predict(visual_horizon_ms)};
  }
  virtual void reset() = 0;
};

class ArmaForecaster : public Forecaster {
 public:
  struct Options {
    ArmaOrders orders;
    SimTime window = from_ms(4000.0);
    SimTime refit_every = from_ms(250.0);
    double max_horizon_ms = kMaxHorizonMs;
  };

  ArmaForecaster() : ArmaForecaster(Options{}) {}
  explicit ArmaForecaster(Options options);

  void observe(SimTime t, const Pose& pose) override;
  // Falls back to the newest pose until enough history exists for a fit.
  Pose predict(double horizon_ms) const override;
  DualPrediction predict_pair(double control_horizon_ms, double visual_horizon_ms) const override;
  void reset() override;

  const std::optional<ArmaModel>& model() const { return model_; }
  const HistoryBuffer& history() const { return history_; }

 private:
  Options options_;
  HistoryBuffer history_;
  std::optional<ArmaModel> model_;
  std::optional<SimTime> last_fit_;
};

}  // namespace teleop
