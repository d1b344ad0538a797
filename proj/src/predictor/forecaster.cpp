#include "teleop/predictor/forecaster.hpp"

#include "teleop/core/errors.hpp"

namespace teleop {

ArmaForecaster::ArmaForecaster(Options options)
    : options_(options), history_(options.window) {}

void ArmaForecaster::observe(SimTime t, const Pose& pose) {
  history_.push(t, pose);
  const std::size_t needed =
      10 * static_cast<std::size_t>(options_.orders.p + options_.orders.q + 1);
  if (history_.size() < needed) return;
  if (last_fit_ && t - *last_fit_ < options_.refit_every) return;
  model_ = fit(history_, options_.orders);
  last_fit_ = t;
}

Pose ArmaForecaster::predict(double horizon_ms) const {
  if (history_.empty()) throw NotEnoughData("no operator pose observed yet");
  if (!model_) {
    if (!(horizon_ms >= 0.0) || horizon_ms > options_.max_horizon_ms) {
      throw HorizonOutOfRange("horizon " + std::to_string(horizon_ms) + " ms out of range");
    }
    return history_.latest();
  }
  return predict_recursive(*model_, history_, horizon_ms, options_.max_horizon_ms);
}

DualPrediction ArmaForecaster::predict_pair(double control_horizon_ms,
                                            double visual_horizon_ms) const {
  if (!model_) return {predict(control_horizon_ms), predict(visual_horizon_ms)};
  return dual_predict(*model_, history_, control_horizon_ms, visual_horizon_ms,
                      options_.max_horizon_ms);
}

void ArmaForecaster::reset() {
  history_.clear();
  model_.reset();
  last_fit_.reset();
}

}  // namespace teleop
