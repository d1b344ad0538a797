#include "teleop/control/smoother.hpp"

#include "teleop/core/errors.hpp"

namespace teleop {

void SmootherState::validate() const {
  if (!(alpha0 > 0.0 && alpha0 <= 1.0) || !(alpha > 0.0 && alpha <= 1.0)) {
    throw ConfigError("smoothing factor must lie in (0, 1]");
  }
  if (!(period_ms > 0.0) || !(blend_window_ms >= 0.0)) {
    throw ConfigError("smoother period must be positive");
  }
}

void smoother_receive(SmootherState& st, const Vec7& command, SimTime now) {
  st.incoming = command;
  st.incoming_at = now;
  st.alpha = st.alpha0;
  if (!st.previous) st.previous = command;
}

Vec7 smooth_command(SmootherState& st, SimTime now) {
  if (!st.previous) throw InstrumentationError("smoother has not received a command");
  if (st.incoming_at && to_ms(now - *st.incoming_at) < st.blend_window_ms) {
    const Vec7 out = st.alpha * *st.previous + (1.0 - st.alpha) * st.incoming;
    st.alpha *= st.alpha;
    st.previous = out;
  }
  return *st.previous;
}

}  // namespace teleop
