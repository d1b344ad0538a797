#pragma once

#include <optional>

#include "teleop/core/pose.hpp"
#include "teleop/core/time.hpp"

namespace teleop {

constexpr double kCommandPeriodMs = 1000.0 / 240.0;

// Linear-interpolation smoother for outgoing commands. Each new command
// restarts the blend at alpha0; within the blend window the output moves
// toward it by (1 - alpha), with alpha squared after every emission. Outside
// the window the previous output is held.
struct SmootherState {
  double alpha0 = 0.9;
  double alpha = 0.9;
  double period_ms = kCommandPeriodMs;       // T_co
  double blend_window_ms = 2.0 * kCommandPeriodMs;
  std::optional<Vec7> previous;
  Vec7 incoming = Vec7::Zero();
  std::optional<SimTime> incoming_at;

  void validate() const;
};

// Registers a new command arriving at `now` and resets alpha.
void smoother_receive(SmootherState& st, const Vec7& command, SimTime now);

// Emits the next command at `now`. The very first command passes through.
Vec7 smooth_command(SmootherState& st, SimTime now);

}  // namespace teleop
