#pragma once

#include <Eigen/Core>

#include "teleop/core/pose.hpp"

namespace teleop {

// Maps input-device coordinates into the robot workspace:
// position' = diag(scale) * position_rotation * position + translation and
// orientation' = orientation_adjust * R(orientation).
struct WorkspaceMap {
  Eigen::Vector3d scale = Eigen::Vector3d::Ones();
  Eigen::Matrix3d position_rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
  Eigen::Matrix3d orientation_adjust = Eigen::Matrix3d::Identity();

  static WorkspaceMap identity() { return {}; }

  // Throws ConfigError when a rotation is not proper or a scale is not
  // strictly positive.
  void validate() const;
};

Pose map_workspace(const Pose& p, const WorkspaceMap& m);

bool is_rotation(const Eigen::Matrix3d& r, double tol = 1e-9);

}  // namespace teleop
