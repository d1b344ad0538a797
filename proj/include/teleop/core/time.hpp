#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>

namespace teleop {

// Simulation time is an integer count of microseconds since the start of a
// run. Integer ticks keep the virtual clock exactly reproducible.
using SimTime = std::chrono::microseconds;

inline SimTime from_ms(double ms) {
  return SimTime{static_cast<std::int64_t>(std::llround(ms * 1000.0))};
}

constexpr double to_ms(SimTime t) { return static_cast<double>(t.count()) / 1000.0; }

constexpr double to_seconds(SimTime t) { return static_cast<double>(t.count()) * 1e-6; }

// Start of the k-th slot of a periodic process running at rate_hz. Slot starts
// are floored to the microsecond so the grid never drifts.
inline SimTime grid_time(std::int64_t k, double rate_hz) {
  return SimTime{static_cast<std::int64_t>(
      std::floor(static_cast<double>(k) * 1e6 / rate_hz + 1e-9))};
}

}  // namespace teleop
