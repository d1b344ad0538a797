#include "teleop/control/pid.hpp"

#include <algorithm>

#include "teleop/core/errors.hpp"

namespace teleop {

void PidGains::validate() const {
  if (!(k_p >= 0.0) || !(k_i >= 0.0) || !(k_d >= 0.0) || !(integral_limit >= 0.0)) {
    throw ConfigError("PID gains must be non-negative");
  }
}

PidOutput pid_step(const PidGains& g, double error, double integral, double prev_error,
                   double dt) {
  double next = integral + 0.5 * dt * (error + prev_error);
  next = std::clamp(next, -g.integral_limit, g.integral_limit);
  const double u = g.k_p * error + g.k_i * next + g.k_d * (error - prev_error) / dt;
  return {u, next};
}

void plant_step(PlantState& ps, const Vec7& command, const PidGains& g, double dt) {
  const Vec7 error = command - ps.axes.q;
  if (!ps.primed) {
    ps.prev_error = error;
    ps.primed = true;
  }
  for (int i = 0; i < 7; ++i) {
    const auto out = pid_step(g, error[i], ps.integral[i], ps.prev_error[i], dt);
    ps.axes.qdd[i] = out.u;
    ps.integral[i] = out.integral;
  }
  ps.prev_error = error;
  integrate(ps.axes, dt);
  ++ps.steps;
}

}  // namespace teleop
