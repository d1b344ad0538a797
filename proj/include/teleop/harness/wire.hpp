#pragma once

#include <cstdint>
#include <json.hpp>
#include <optional>
#include <string>
#include <string_view>

#include "teleop/core/pose.hpp"

namespace teleop {

enum class WireKind {
  kPoseInput,
  kFrameState,
  kLatencyUpdate,
  kMetricsUpdate,
  kTrainingCommand,
  kTrainingStatus,
  kSessionConfig,
};

std::string_view to_string(WireKind kind);
// Throws ParseError for unknown kinds.
WireKind parse_wire_kind(std::string_view name);

// One JSON message on the /session socket. seq increases strictly per
// direction; client messages carry t_client, server messages t_server.
struct WireMessage {
  WireKind kind = WireKind::kSessionConfig;
  std::uint64_t seq = 0;
  std::optional<double> t_client;
  std::optional<double> t_server;
  nlohmann::json payload = nlohmann::json::object();
};

std::string encode(const WireMessage& m);
// Throws ParseError on malformed JSON, a missing kind or seq, or a
// pose_input without t_client.
WireMessage decode(std::string_view text);

// Pose payloads: {"position": [x, y, z], "orientation": [x, y, z, w]}.
nlohmann::json pose_json(const Vec7& v);
// Throws ParseError on a malformed pose payload or a zero quaternion.
Pose pose_from_json(const nlohmann::json& j);

}  // namespace teleop
