#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <string>
#include <string_view>
#include <vector>

#include "teleop/core/pose.hpp"

namespace teleop {

enum class ShapeKind { kCircle, kSquare, kPentagram, kTriangle, kFigureEight };

std::string_view to_string(ShapeKind kind);
// Throws ConfigError for unknown names.
ShapeKind parse_shape_kind(std::string_view name);

// The four drawing tasks used for pre-training, in a fixed order.
const std::vector<ShapeKind>& training_shapes();

struct ShapeSpec {
  ShapeKind kind = ShapeKind::kCircle;
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  double radius = 0.1;    // m, circumradius for the polygons
  double period_s = 8.0;  // one full traversal
  Eigen::Quaterniond plane_orientation = Eigen::Quaterniond::Identity();
  double phase = 0.0;     // rad, offset along the curve

  void validate() const;
};

// Pose on the closed curve at time t_ms. Polygons are traced at constant
// speed; orientation is the plane orientation throughout.
Pose generate(const ShapeSpec& shape, double t_ms);

// Total path length of one traversal, in meters.
double path_length(const ShapeSpec& shape);

// Vertices of the polygonal shapes in traversal order (empty for smooth
// curves), in the local drawing plane.
std::vector<Eigen::Vector2d> polygon_vertices(ShapeKind kind, double radius);

// Default task geometry. Every calibration shape is traced at the same tool
// speed so the tasks differ only in their geometry.
ShapeSpec calibration_shape(ShapeKind kind);

constexpr double kCalibrationSpeed = 0.015;  // m/s
inline const Eigen::Vector3d kWorkspaceCenter{0.3, 0.0, 0.25};

}  // namespace teleop
