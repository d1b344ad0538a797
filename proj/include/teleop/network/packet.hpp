#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>
#include <variant>

#include "teleop/core/pose.hpp"
#include "teleop/core/time.hpp"

namespace teleop {

// Pipeline slots of one operator sample, in order. The control flow ends at
// kPlantExecuted (t9), the visual flow at kDisplayed (t10).
enum class Stage : std::uint8_t {
  kSampled = 1,         // t1: pose sampled, horizons chosen, prediction made
  kEdgeReceived,        // t2: predicted poses arrive at the edge
  kCommandIssued,       // t3: smoothed command leaves the edge
  kVisualProcessed,     // t4: visual target applied to the twin
  kSimulated,           // t5: twin state advanced
  kRendered,            // t6: frame rendered
  kFrameSent,           // t7: frame streamed back
  kPlantReceived,       // t8: command arrives at the plant
  kPlantExecuted,       // t9: plant control cycle done
  kDisplayed,           // t10: frame shown to the operator
};

constexpr std::size_t kStageCount = 10;

std::string_view to_string(Stage stage);

struct PredictedPoses {
  Pose control;
  Pose visual;
  int control_horizon_ms = 0;
  int visual_horizon_ms = 0;
};

struct AxisCommand {
  Vec7 target = Vec7::Zero();
};

struct FrameState {
  std::uint64_t frame_id = 0;
  Vec7 twin = Vec7::Zero();
  // Newest completed control-loop delay known to the edge, piggybacked for
  // the operator side.
  std::optional<double> control_delay_ms;
  // Newest plant feedback known to the edge when the frame was rendered.
  std::optional<Vec7> plant;
};

struct PlantFeedback {
  Vec7 position = Vec7::Zero();
  Vec7 velocity = Vec7::Zero();
  double control_delay_ms = 0.0;  // T_r of the command just executed
};

using Payload = std::variant<PredictedPoses, AxisCommand, FrameState, PlantFeedback>;

// Payload plus the sampling instant of the operator pose it derives from and
// the slot stamps it has collected on the way.
struct TimedPacket {
  Payload payload;
  SimTime t_origin{0};
  std::uint64_t seq = 0;
  std::array<std::optional<SimTime>, kStageCount> stamps{};

  // Throws InstrumentationError when `t` precedes a stamp already taken.
  void stamp(Stage stage, SimTime t);
  std::optional<SimTime> stamp_of(Stage stage) const;
  SimTime latest_stamp() const;
};

TimedPacket make_packet(Payload payload, SimTime t_origin, std::uint64_t seq);

}  // namespace teleop
