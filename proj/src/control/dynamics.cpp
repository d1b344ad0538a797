#include "teleop/control/dynamics.hpp"

#include "teleop/core/errors.hpp"

namespace teleop {

AxisState AxisState::at_rest(const Vec7& q) {
  AxisState s;
  s.q = q;
  return s;
}

void RmpParams::validate() const {
  if (!(k_p > 0.0) || !(k_d >= 0.0) || !(cap > 0.0)) {
    throw ConfigError("RMP gains need k_p > 0, k_d >= 0 and a positive cap");
  }
}

Eigen::VectorXd cap(const Eigen::VectorXd& u, double threshold) {
  const double n = u.norm();
  if (n < threshold) return u;
  return threshold * u / n;
}

Vec7 rmp_accel(const AxisState& s, const Vec7& target, const RmpParams& p) {
  const Vec7 error = target - s.q;
  return p.k_p * Vec7(cap(error, p.cap)) - p.k_d * s.qd;
}

void integrate(AxisState& s, double dt) {
  s.qd += s.qdd * dt;
  s.q += s.qd * dt;
  renormalize_quaternion_block(s.q);
}

void step_sim(TwinState& ts, const RmpParams& p, double dt) {
  ts.axes.qdd = rmp_accel(ts.axes, ts.target, p);
  integrate(ts.axes, dt);
  ++ts.sim_ticks;
}

FrameSnapshot render_tick(TwinState& ts, SimTime now) {
  return {++ts.frame_id, now, ts.target_origin, ts.axes.q};
}

}  // namespace teleop
