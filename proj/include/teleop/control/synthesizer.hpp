#pragma once

#include <optional>

#include "teleop/core/pose.hpp"
#include "teleop/core/workspace.hpp"

namespace teleop {

// Turns the operator's predicted pose into axis targets for the arm. When the
// reported arm position strays from the twin by more than the guard radius
// the targets freeze until the gap closes to half the radius.
class ControlSynthesizer {
 public:
  ControlSynthesizer(WorkspaceMap map, double guard_radius_m);

  Vec7 synthesize(const Pose& predicted, const Vec7& twin, const std::optional<Vec7>& plant);

  bool holding() const { return holding_; }
  double guard_radius() const { return guard_radius_; }

 private:
  WorkspaceMap map_;
  double guard_radius_;
  bool holding_ = false;
  std::optional<Vec7> last_;
};

}  // namespace teleop
