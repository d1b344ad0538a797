#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "teleop/core/clock.hpp"
#include "teleop/core/errors.hpp"
#include "teleop/core/normalization.hpp"
#include "teleop/core/pose.hpp"
#include "teleop/core/workspace.hpp"

using namespace teleop;

namespace {

Eigen::Quaterniond random_quaternion(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
  return normalize_quaternion(q);
}

Eigen::Matrix3d random_rotation(std::mt19937_64& rng) {
  return random_quaternion(rng).toRotationMatrix();
}

}  // namespace

TEST_CASE("normalize_quaternion examples") {
  auto q = normalize_quaternion(Eigen::Vector4d(0, 0, 0, 2));
  CHECK(q.isApprox(Eigen::Vector4d(0, 0, 0, 1)));
  q = normalize_quaternion(Eigen::Vector4d(0, 0, 0, -1));
  CHECK(q.isApprox(Eigen::Vector4d(0, 0, 0, 1)));
  q = normalize_quaternion(Eigen::Vector4d(1, 1, 1, 1));
  CHECK(q.isApprox(Eigen::Vector4d(0.5, 0.5, 0.5, 0.5)));
  CHECK_THROWS_AS(normalize_quaternion(Eigen::Vector4d(0, 0, 1e-13, 0)), DegenerateQuaternion);
}

TEST_CASE("pose keeps unit quaternion on the upper hemisphere") {
  Vec7 v;
  v << 1, 2, 3, 0.1, -0.2, 0.3, -2.0;
  const Pose p = Pose::from_vector(v);
  CHECK(std::abs(p.orientation().norm() - 1.0) < 1e-12);
  CHECK(p.orientation().w() >= 0.0);
  CHECK(p.is_finite());
}

TEST_CASE("map_workspace examples") {
  const Pose p(Eigen::Vector3d(0.2, 0.4, 0.6), Eigen::Quaterniond(0.9, 0.1, 0.2, 0.3).normalized());
  const Pose same = map_workspace(p, WorkspaceMap::identity());
  CHECK((same.as_vector() - p.as_vector()).norm() < 1e-12);

  WorkspaceMap half;
  half.scale = Eigen::Vector3d::Constant(0.5);
  half.translation = Eigen::Vector3d(0.1, 0, 0);
  CHECK((map_workspace(p, half).position() - Eigen::Vector3d(0.2, 0.2, 0.3)).norm() < 1e-12);

  WorkspaceMap rot;
  rot.position_rotation = Eigen::AngleAxisd(std::numbers::pi / 2, Eigen::Vector3d::UnitZ()).matrix();
  const Pose x(Eigen::Vector3d(1, 0, 0), Eigen::Quaterniond::Identity());
  CHECK((map_workspace(x, rot).position() - Eigen::Vector3d(0, 1, 0)).norm() < 1e-9);
}

TEST_CASE("workspace map validation") {
  WorkspaceMap m;
  m.scale = Eigen::Vector3d(1, 0, 1);
  CHECK_THROWS_AS(m.validate(), ConfigError);
  m = WorkspaceMap{};
  m.orientation_adjust = -Eigen::Matrix3d::Identity();
  CHECK_THROWS_AS(m.validate(), ConfigError);
}

TEST_CASE("composition of two maps equals the analytic single map") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.2, 2.0), c(-1.0, 1.0);
  WorkspaceMap m1, m2;
  m1.scale = {u(rng), u(rng), u(rng)};
  m2.scale = {u(rng), u(rng), u(rng)};
  m1.position_rotation = random_rotation(rng);
  m2.position_rotation = random_rotation(rng);
  m1.translation = {c(rng), c(rng), c(rng)};
  m2.translation = {c(rng), c(rng), c(rng)};
  m1.orientation_adjust = random_rotation(rng);
  m2.orientation_adjust = random_rotation(rng);

  // x -> A2 (A1 x + d1) + d2 with A = diag(s) R.
  const Eigen::Matrix3d a1 = m1.scale.asDiagonal() * m1.position_rotation;
  const Eigen::Matrix3d a2 = m2.scale.asDiagonal() * m2.position_rotation;
  for (int i = 0; i < 100; ++i) {
    const Pose p(Eigen::Vector3d(c(rng), c(rng), c(rng)), random_quaternion(rng));
    const Pose twice = map_workspace(map_workspace(p, m1), m2);
    const Eigen::Vector3d pos = a2 * (a1 * p.position() + m1.translation) + m2.translation;
    Eigen::Quaterniond ori(m2.orientation_adjust * m1.orientation_adjust *
                           p.orientation().toRotationMatrix());
    ori = normalize_quaternion(ori);
    CHECK((twice.position() - pos).norm() < 1e-9);
    CHECK((twice.orientation().coeffs() - ori.coeffs()).norm() < 1e-9);
    CHECK(std::abs(twice.orientation().norm() - 1.0) < 1e-12);
  }
}

TEST_CASE("minmax normalization") {
  NormalizationBounds b = NormalizationBounds::around(Eigen::Vector3d(0.3, 0, 0.25), 0.2);
  b.validate();
  const Vec7 mid = (b.min + b.max) / 2;
  CHECK(minmax_normalize(mid, b).norm() < 1e-12);
  CHECK((minmax_normalize(b.max, b) - Vec7::Ones()).norm() < 1e-12);
  Vec7 below = b.min;
  below[0] -= 1e-6;
  CHECK(minmax_normalize(below, b)[0] == -1.0);

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    Vec7 v;
    for (int k = 0; k < 7; ++k) v[k] = b.min[k] + u(rng) * (b.max[k] - b.min[k]);
    CHECK((minmax_denormalize(minmax_normalize(v, b), b) - v).norm() < 1e-9);
  }

  NormalizationBounds bad = b;
  bad.max[2] = bad.min[2];
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("virtual clock is monotone") {
  VirtualClock clock;
  clock.advance_to(from_ms(5));
  clock.advance_to(from_ms(5));
  CHECK(clock.now() == from_ms(5));
  CHECK_THROWS_AS(clock.advance_to(from_ms(4)), InstrumentationError);
}

TEST_CASE("grid times do not drift") {
  CHECK(grid_time(120, 120.0) == from_ms(1000));
  CHECK(grid_time(1, 120.0).count() == 8333);
  CHECK(grid_time(240 * 100, 240.0) == from_ms(100000));
}
