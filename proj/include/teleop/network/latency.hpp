#pragma once

#include <optional>

#include "teleop/network/packet.hpp"

namespace teleop {

constexpr double kLatencyEwmaAlpha = 0.1;

// Smoothed end-to-end delays of the two loops, in ms. The first sample of a
// loop initialises its average.
struct LatencyMeasurement {
  double control_ms = 0.0;  // T_r
  double visual_ms = 0.0;   // T_v
  bool has_control = false;
  bool has_visual = false;
  double alpha = kLatencyEwmaAlpha;

  void update_control(double sample_ms);
  void update_visual(double sample_ms);
};

// t9 - t1 for a packet whose plant execution completed.
double control_delay_ms(const TimedPacket& pkt);
// t10 - t1 for a displayed frame.
double visual_delay_ms(const TimedPacket& pkt);

// Folds the completed packet into `m`: the control loop when it carries t9,
// the visual loop when it carries t10. Throws InstrumentationError when t1 or
// both completion stamps are missing.
void measure_e2e(LatencyMeasurement& m, const TimedPacket& pkt);

}  // namespace teleop
