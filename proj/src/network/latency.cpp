#include "teleop/network/latency.hpp"

#include "teleop/core/errors.hpp"

namespace teleop {

namespace {

double ewma(double current, double sample, double alpha) {
  return current + alpha * (sample - current);
}

double elapsed_ms(const TimedPacket& pkt, Stage done) {
  const auto start = pkt.stamp_of(Stage::kSampled);
  const auto end = pkt.stamp_of(done);
  if (!start) throw InstrumentationError("packet has no sampling stamp");
  if (!end) throw InstrumentationError("packet has no " + std::string(to_string(done)) + " stamp");
  return to_ms(*end - *start);
}

}  // namespace

void LatencyMeasurement::update_control(double sample_ms) {
  control_ms = has_control ? ewma(control_ms, sample_ms, alpha) : sample_ms;
  has_control = true;
}

void LatencyMeasurement::update_visual(double sample_ms) {
  visual_ms = has_visual ? ewma(visual_ms, sample_ms, alpha) : sample_ms;
  has_visual = true;
}

double control_delay_ms(const TimedPacket& pkt) { return elapsed_ms(pkt, Stage::kPlantExecuted); }

double visual_delay_ms(const TimedPacket& pkt) { return elapsed_ms(pkt, Stage::kDisplayed); }

void measure_e2e(LatencyMeasurement& m, const TimedPacket& pkt) {
  const bool control = pkt.stamp_of(Stage::kPlantExecuted).has_value();
  const bool visual = pkt.stamp_of(Stage::kDisplayed).has_value();
  if (!control && !visual) throw InstrumentationError("packet has no completion stamp");
  if (control) m.update_control(control_delay_ms(pkt));
  if (visual) m.update_visual(visual_delay_ms(pkt));
}

}  // namespace teleop
