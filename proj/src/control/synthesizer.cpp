#include "teleop/control/synthesizer.hpp"

#include "teleop/core/errors.hpp"

namespace teleop {

ControlSynthesizer::ControlSynthesizer(WorkspaceMap map, double guard_radius_m)
    : map_(std::move(map)), guard_radius_(guard_radius_m) {
  map_.validate();
  if (!(guard_radius_ > 0.0)) throw ConfigError("guard radius must be positive");
}

Vec7 ControlSynthesizer::synthesize(const Pose& predicted, const Vec7& twin,
                                    const std::optional<Vec7>& plant) {
  const Vec7 target = map_workspace(predicted, map_).as_vector();
  if (plant) {
    const double gap = (twin.head<3>() - plant->head<3>()).norm();
    if (!holding_ && gap > guard_radius_) holding_ = true;
    else if (holding_ && gap < 0.5 * guard_radius_) holding_ = false;
  }
  if (holding_ && last_) return *last_;
  last_ = target;
  return target;
}

}  // namespace teleop
