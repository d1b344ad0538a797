#pragma once

#include "teleop/core/time.hpp"

namespace teleop {

enum class ClockMode { kVirtual, kRealtime };

// Monotone clock owned by the scheduler. In virtual mode time jumps from event
// to event; in realtime mode the owner advances it as wall time (or the live
// input stream) progresses.
class VirtualClock {
 public:
  explicit VirtualClock(ClockMode mode = ClockMode::kVirtual) : mode_(mode) {}

  SimTime now() const { return now_; }
  ClockMode mode() const { return mode_; }

  // Throws InstrumentationError if `t` would move the clock backwards.
  void advance_to(SimTime t);

 private:
  SimTime now_{0};
  ClockMode mode_;
};

}  // namespace teleop
