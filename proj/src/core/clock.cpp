#include "teleop/core/clock.hpp"

#include <string>

#include "teleop/core/errors.hpp"

namespace teleop {

void VirtualClock::advance_to(SimTime t) {
  if (t < now_) {
    throw InstrumentationError("clock moved backwards from " + std::to_string(now_.count()) +
                               "us to " + std::to_string(t.count()) + "us");
  }
  now_ = t;
}

}  // namespace teleop
