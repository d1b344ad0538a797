#include "teleop/core/normalization.hpp"

#include "teleop/core/errors.hpp"

namespace teleop {

void NormalizationBounds::validate() const {
  if (!(min.array() < max.array()).all()) {
    throw ConfigError("normalization bounds need min < max on every axis");
  }
}

NormalizationBounds NormalizationBounds::around(const Eigen::Vector3d& center, double half_extent) {
  NormalizationBounds b;
  b.min.head<3>() = center.array() - half_extent;
  b.max.head<3>() = center.array() + half_extent;
  b.min.tail<4>().setConstant(-1.0);
  b.max.tail<4>().setConstant(1.0);
  return b;
}

Vec7 minmax_normalize(const Vec7& v, const NormalizationBounds& b) {
  const Vec7 scaled = 2.0 * (v - b.min).cwiseQuotient(b.max - b.min) - Vec7::Ones();
  return scaled.cwiseMax(-1.0).cwiseMin(1.0);
}

Vec7 minmax_normalize(const Pose& p, const NormalizationBounds& b) {
  return minmax_normalize(p.as_vector(), b);
}

Vec7 minmax_denormalize(const Vec7& normalized, const NormalizationBounds& b) {
  return b.min + 0.5 * (normalized + Vec7::Ones()).cwiseProduct(b.max - b.min);
}

}  // namespace teleop
