#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace teleop {

using Vec7 = Eigen::Matrix<double, 7, 1>;

// Returns the unit quaternion with qw >= 0. Throws DegenerateQuaternion when
// the norm is below 1e-12.
Eigen::Quaterniond normalize_quaternion(const Eigen::Quaterniond& q);
Eigen::Vector4d normalize_quaternion(const Eigen::Vector4d& xyzw);

// End-effector pose: Cartesian position in meters and an orientation
// quaternion kept on the qw >= 0 hemisphere.
class Pose {
 public:
  Pose();
  Pose(const Eigen::Vector3d& position, const Eigen::Quaterniond& orientation);

  // Components in the order lx, ly, lz, qx, qy, qz, qw.
  static Pose from_vector(const Vec7& v);

  const Eigen::Vector3d& position() const { return position_; }
  const Eigen::Quaterniond& orientation() const { return orientation_; }
  Vec7 as_vector() const;

  bool is_finite() const;

 private:
  Eigen::Vector3d position_;
  Eigen::Quaterniond orientation_;
};

// Renormalizes the quaternion block (indices 3..6) of a pose-shaped vector in
// place. Used after integrating or extrapolating the seven axes independently.
void renormalize_quaternion_block(Vec7& v);

}  // namespace teleop
