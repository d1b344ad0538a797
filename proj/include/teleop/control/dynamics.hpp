#pragma once

#include <Eigen/Core>
#include <cstdint>

#include "teleop/core/pose.hpp"
#include "teleop/core/time.hpp"

namespace teleop {

// Position, velocity and acceleration of the seven controlled axes (the pose
// components act as the arm's joints).
struct AxisState {
  Vec7 q = Vec7::Zero();
  Vec7 qd = Vec7::Zero();
  Vec7 qdd = Vec7::Zero();

  static AxisState at_rest(const Vec7& q);
};

struct RmpParams {
  double k_p = 10000.0;  // 1/s^2
  double k_d = 200.0;    // 1/s, critically damped
  double cap = 0.5;     // threshold on the error norm

  void validate() const;
};

// Returns u when its norm is below `threshold`, else u rescaled to that norm.
Eigen::VectorXd cap(const Eigen::VectorXd& u, double threshold);

// k_p * cap(target - q) - k_d * qd, with the cap over the whole error vector.
Vec7 rmp_accel(const AxisState& s, const Vec7& target, const RmpParams& p);

// Semi-implicit Euler: qd += qdd * dt, then q += qd * dt. The quaternion
// block of q is renormalized afterwards.
void integrate(AxisState& s, double dt);

// Virtual twin on the edge.
struct TwinState {
  AxisState axes;
  Vec7 target = Vec7::Zero();
  SimTime target_origin{0};  // sampling instant behind the current target
  std::uint64_t frame_id = 0;
  std::uint64_t sim_ticks = 0;
};

struct FrameSnapshot {
  std::uint64_t frame_id;
  SimTime t;
  SimTime origin;
  Vec7 pose;
};

constexpr double kSimRateHz = 240.0;
constexpr double kRenderPeriodMs = 16.0;

// One simulation update: RMP acceleration toward the current target, then
// integration over dt.
void step_sim(TwinState& ts, const RmpParams& p, double dt = 1.0 / kSimRateHz);

// Snapshot of the twin for the frame rendered at `now`.
FrameSnapshot render_tick(TwinState& ts, SimTime now);

}  // namespace teleop
