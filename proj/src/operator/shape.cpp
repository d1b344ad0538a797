#include "teleop/operator/shape.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "teleop/core/errors.hpp"

namespace teleop {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Vertex index step and count for the star/regular polygons.
struct PolygonLayout {
  int vertices;
  int step;
};

PolygonLayout layout(ShapeKind kind) {
  switch (kind) {
    case ShapeKind::kSquare: return {4, 1};
    case ShapeKind::kTriangle: return {3, 1};
    case ShapeKind::kPentagram: return {5, 2};
    default: return {0, 0};
  }
}

bool is_polygon(ShapeKind kind) { return layout(kind).vertices > 0; }

Eigen::Vector2d figure_eight(double radius, double angle) {
  return {radius * std::sin(angle), radius * std::sin(angle) * std::cos(angle)};
}

Eigen::Vector2d polygon_point(const std::vector<Eigen::Vector2d>& vertices, double fraction) {
  const auto n = vertices.size();
  // Regular polygons have equal edges, so constant speed is a uniform split.
  const double s = fraction * static_cast<double>(n);
  auto edge = static_cast<std::size_t>(std::floor(s));
  double u = s - static_cast<double>(edge);
  if (edge >= n) {
    edge = n - 1;
    u = 1.0;
  }
  const auto& a = vertices[edge];
  const auto& b = vertices[(edge + 1) % n];
  return a + u * (b - a);
}

double wrap_unit(double x) {
  double f = x - std::floor(x);
  if (f >= 1.0) f = 0.0;
  return f;
}

}  // namespace

std::string_view to_string(ShapeKind kind) {
  switch (kind) {
    case ShapeKind::kCircle: return "circle";
    case ShapeKind::kSquare: return "square";
    case ShapeKind::kPentagram: return "pentagram";
    case ShapeKind::kTriangle: return "triangle";
    case ShapeKind::kFigureEight: return "figure_eight";
  }
  return "unknown";
}

ShapeKind parse_shape_kind(std::string_view name) {
  for (auto kind : {ShapeKind::kCircle, ShapeKind::kSquare, ShapeKind::kPentagram,
                    ShapeKind::kTriangle, ShapeKind::kFigureEight}) {
    if (to_string(kind) == name) return kind;
  }
  if (name == "star") return ShapeKind::kPentagram;
  throw ConfigError("unknown shape kind '" + std::string(name) + "'");
}

const std::vector<ShapeKind>& training_shapes() {
  static const std::vector<ShapeKind> shapes = {ShapeKind::kCircle, ShapeKind::kSquare,
                                                ShapeKind::kPentagram, ShapeKind::kTriangle};
  return shapes;
}

void ShapeSpec::validate() const {
  if (!(radius > 0.0)) throw ConfigError("shape radius must be positive");
  if (!(period_s > 0.0)) throw ConfigError("shape period must be positive");
  if (!center.allFinite() || !std::isfinite(phase)) throw ConfigError("shape must be finite");
  if (static_cast<int>(kind) < 0 || static_cast<int>(kind) > static_cast<int>(ShapeKind::kFigureEight)) {
    throw ConfigError("unknown shape kind");
  }
}

std::vector<Eigen::Vector2d> polygon_vertices(ShapeKind kind, double radius) {
  const auto [n, step] = layout(kind);
  std::vector<Eigen::Vector2d> out;
  out.reserve(n);
  for (int k = 0; k < n; ++k) {
    const double angle = kTwoPi * static_cast<double>(k * step) / n;
    out.emplace_back(radius * std::cos(angle), radius * std::sin(angle));
  }
  return out;
}

Pose generate(const ShapeSpec& shape, double t_ms) {
  shape.validate();
  const double cycles = t_ms / (shape.period_s * 1000.0);
  Eigen::Vector2d local;
  switch (shape.kind) {
    case ShapeKind::kCircle: {
      const double angle = kTwoPi * cycles + shape.phase;
      local = {shape.radius * std::cos(angle), shape.radius * std::sin(angle)};
      break;
    }
    case ShapeKind::kFigureEight:
      local = figure_eight(shape.radius, kTwoPi * cycles + shape.phase);
      break;
    case ShapeKind::kSquare:
    case ShapeKind::kTriangle:
    case ShapeKind::kPentagram:
      local = polygon_point(polygon_vertices(shape.kind, shape.radius),
                            wrap_unit(cycles + shape.phase / kTwoPi));
      break;
  }
  const Eigen::Vector3d position =
      shape.center + shape.plane_orientation * Eigen::Vector3d(local.x(), local.y(), 0.0);
  return Pose(position, shape.plane_orientation);
}

double path_length(const ShapeSpec& shape) {
  if (shape.kind == ShapeKind::kCircle) return kTwoPi * shape.radius;
  if (is_polygon(shape.kind)) {
    const auto v = polygon_vertices(shape.kind, shape.radius);
    double total = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) total += (v[(i + 1) % v.size()] - v[i]).norm();
    return total;
  }
  constexpr int kSteps = 20000;
  double total = 0.0;
  Eigen::Vector2d prev = figure_eight(shape.radius, 0.0);
  for (int i = 1; i <= kSteps; ++i) {
    const Eigen::Vector2d cur = figure_eight(shape.radius, kTwoPi * i / kSteps);
    total += (cur - prev).norm();
    prev = cur;
  }
  return total;
}

ShapeSpec calibration_shape(ShapeKind kind) {
  ShapeSpec spec;
  spec.kind = kind;
  spec.center = kWorkspaceCenter;
  spec.radius = 0.1;
  spec.period_s = path_length(spec) / kCalibrationSpeed;
  return spec;
}

}  // namespace teleop
