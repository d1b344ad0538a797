#include "teleop/core/workspace.hpp"

#include <Eigen/Geometry>

#include "teleop/core/errors.hpp"

namespace teleop {

bool is_rotation(const Eigen::Matrix3d& r, double tol) {
  const double orth = (r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  return orth <= tol && std::abs(r.determinant() - 1.0) <= tol;
}

void WorkspaceMap::validate() const {
  if (!is_rotation(position_rotation)) throw ConfigError("position rotation is not a proper rotation");
  if (!is_rotation(orientation_adjust)) throw ConfigError("orientation adjustment is not a proper rotation");
  if (!(scale.array() > 0.0).all()) throw ConfigError("workspace scale must be strictly positive");
  if (!translation.allFinite()) throw ConfigError("workspace translation must be finite");
}

Pose map_workspace(const Pose& p, const WorkspaceMap& m) {
  const Eigen::Vector3d position =
      m.scale.asDiagonal() * (m.position_rotation * p.position()) + m.translation;
  const Eigen::Matrix3d r = m.orientation_adjust * p.orientation().toRotationMatrix();
  return Pose(position, Eigen::Quaterniond(r));
}

}  // namespace teleop
