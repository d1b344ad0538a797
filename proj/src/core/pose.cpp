#include "teleop/core/pose.hpp"

#include <cmath>

#include "teleop/core/errors.hpp"

namespace teleop {

namespace {
constexpr double kMinQuaternionNorm = 1e-12;
}

Eigen::Quaterniond normalize_quaternion(const Eigen::Quaterniond& q) {
  const double n = q.norm();
  if (!(n > kMinQuaternionNorm)) {
    throw DegenerateQuaternion("quaternion norm " + std::to_string(n) + " is too small");
  }
  Eigen::Quaterniond out(q.coeffs() / n);
  if (out.w() < 0.0) out.coeffs() = -out.coeffs();
  return out;
}

Eigen::Vector4d normalize_quaternion(const Eigen::Vector4d& xyzw) {
  Eigen::Quaterniond q;
  q.coeffs() = xyzw;
  return normalize_quaternion(q).coeffs();
}

Pose::Pose() : position_(Eigen::Vector3d::Zero()), orientation_(Eigen::Quaterniond::Identity()) {}

Pose::Pose(const Eigen::Vector3d& position, const Eigen::Quaterniond& orientation)
    : position_(position), orientation_(normalize_quaternion(orientation)) {}

Pose Pose::from_vector(const Vec7& v) {
  Eigen::Quaterniond q;
  q.coeffs() = v.tail<4>();
  return Pose(v.head<3>(), q);
}

Vec7 Pose::as_vector() const {
  Vec7 v;
  v.head<3>() = position_;
  v.tail<4>() = orientation_.coeffs();
  return v;
}

bool Pose::is_finite() const {
  return position_.allFinite() && orientation_.coeffs().allFinite();
}

void renormalize_quaternion_block(Vec7& v) {
  v.tail<4>() = normalize_quaternion(Eigen::Vector4d(v.tail<4>()));
}

}  // namespace teleop
