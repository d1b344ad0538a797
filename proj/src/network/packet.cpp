#include "teleop/network/packet.hpp"

#include <string>

#include "teleop/core/errors.hpp"

namespace teleop {

std::string_view to_string(Stage stage) {
  switch (stage) {
    case Stage::kSampled: return "sampled";
    case Stage::kEdgeReceived: return "edge_received";
    case Stage::kCommandIssued: return "command_issued";
    case Stage::kVisualProcessed: return "visual_processed";
    case Stage::kSimulated: return "simulated";
    case Stage::kRendered: return "rendered";
    case Stage::kFrameSent: return "frame_sent";
    case Stage::kPlantReceived: return "plant_received";
    case Stage::kPlantExecuted: return "plant_executed";
    case Stage::kDisplayed: return "displayed";
  }
  return "unknown";
}

namespace {
std::size_t slot(Stage stage) { return static_cast<std::size_t>(stage) - 1; }
}  // namespace

void TimedPacket::stamp(Stage stage, SimTime t) {
  const SimTime latest = latest_stamp();
  if (t < latest) {
    throw InstrumentationError("stamp " + std::string(to_string(stage)) + " at " +
                               std::to_string(t.count()) + "us precedes " +
                               std::to_string(latest.count()) + "us");
  }
  stamps[slot(stage)] = t;
}

std::optional<SimTime> TimedPacket::stamp_of(Stage stage) const { return stamps[slot(stage)]; }

SimTime TimedPacket::latest_stamp() const {
  SimTime latest = t_origin;
  for (const auto& s : stamps) {
    if (s && *s > latest) latest = *s;
  }
  return latest;
}

TimedPacket make_packet(Payload payload, SimTime t_origin, std::uint64_t seq) {
  TimedPacket pkt{std::move(payload), t_origin, seq, {}};
  pkt.stamp(Stage::kSampled, t_origin);
  return pkt;
}

}  // namespace teleop
