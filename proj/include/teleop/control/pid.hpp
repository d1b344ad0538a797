#pragma once

#include "teleop/control/dynamics.hpp"

namespace teleop {

struct PidGains {
  // Triple closed-loop pole at s = -30 on a unit-mass axis.
  double k_p = 2700.0;
  double k_i = 27000.0;
  double k_d = 90.0;
  double integral_limit = 0.01;  // |integral| bound

  void validate() const;
};

struct PidOutput {
  double u;
  double integral;
};

// u = K_p e + K_i I + K_d (e - e_prev) / dt with the trapezoidal integral
// I' = clamp(I + dt (e + e_prev) / 2).
PidOutput pid_step(const PidGains& g, double error, double integral, double prev_error,
                   double dt);

constexpr double kPlantRateHz = 1000.0;

struct PlantState {
  AxisState axes;
  Vec7 integral = Vec7::Zero();
  Vec7 prev_error = Vec7::Zero();
  bool primed = false;
  std::uint64_t steps = 0;
};

// One plant control cycle: per-axis PID on command - q drives the axis
// acceleration, integrated like the twin.
void plant_step(PlantState& ps, const Vec7& command, const PidGains& g,
                double dt = 1.0 / kPlantRateHz);

}  // namespace teleop
