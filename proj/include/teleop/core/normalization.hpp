#pragma once

#include "teleop/core/pose.hpp"

namespace teleop {

struct NormalizationBounds {
  Vec7 min;
  Vec7 max;

  // Throws ConfigError unless min < max on every axis.
  void validate() const;

  // Bounds for poses inside an axis-aligned box of half-width `half_extent`
  // around `center`, with the full [-1, 1] range on quaternion components.
  static NormalizationBounds around(const Eigen::Vector3d& center, double half_extent);
};

// Affine map of each axis from [min, max] onto [-1, 1], clamped.
Vec7 minmax_normalize(const Pose& p, const NormalizationBounds& b);
Vec7 minmax_normalize(const Vec7& v, const NormalizationBounds& b);

// Inverse of minmax_normalize for in-range inputs.
Vec7 minmax_denormalize(const Vec7& normalized, const NormalizationBounds& b);

}  // namespace teleop
