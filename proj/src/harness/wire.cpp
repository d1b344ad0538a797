#include "teleop/harness/wire.hpp"

#include "teleop/core/errors.hpp"

namespace teleop {

namespace {

using nlohmann::json;

constexpr WireKind kAllKinds[] = {
    WireKind::kPoseInput,       WireKind::kFrameState,      WireKind::kLatencyUpdate,
    WireKind::kMetricsUpdate,   WireKind::kTrainingCommand, WireKind::kTrainingStatus,
    WireKind::kSessionConfig,
};

}  // namespace

std::string_view to_string(WireKind kind) {
  switch (kind) {
    case WireKind::kPoseInput: return "pose_input";
    case WireKind::kFrameState: return "frame_state";
    case WireKind::kLatencyUpdate: return "latency_update";
    case WireKind::kMetricsUpdate: return "metrics_update";
    case WireKind::kTrainingCommand: return "training_command";
    case WireKind::kTrainingStatus: return "training_status";
    case WireKind::kSessionConfig: return "session_config";
  }
  return "?";
}

WireKind parse_wire_kind(std::string_view name) {
  for (auto k : kAllKinds) {
    if (to_string(k) == name) return k;
  }
  throw ParseError("unknown message kind '" + std::string(name) + "'", 0);
}

std::string encode(const WireMessage& m) {
  json j;
  j["kind"] = to_string(m.kind);
  j["seq"] = m.seq;
  if (m.t_client) j["t_client"] = *m.t_client;
  if (m.t_server) j["t_server"] = *m.t_server;
  j["payload"] = m.payload;
  return j.dump();
}

WireMessage decode(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("message: ") + e.what(), 0);
  }
  if (!j.is_object() || !j.contains("kind") || !j.contains("seq")) {
    throw ParseError("message needs kind and seq", 0);
  }
  WireMessage m;
  try {
    m.kind = parse_wire_kind(j.at("kind").get<std::string>());
    m.seq = j.at("seq").get<std::uint64_t>();
    if (j.contains("t_client")) m.t_client = j.at("t_client").get<double>();
    if (j.contains("t_server")) m.t_server = j.at("t_server").get<double>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("message: ") + e.what(), 0);
  }
  if (j.contains("payload")) m.payload = j.at("payload");
  if (m.kind == WireKind::kPoseInput && !m.t_client) {
    throw ParseError("pose_input without t_client", 0);
  }
  return m;
}

json pose_json(const Vec7& v) {
  return {{"position", {v(0), v(1), v(2)}}, {"orientation", {v(3), v(4), v(5), v(6)}}};
}

Pose pose_from_json(const json& j) {
  try {
    const auto p = j.at("position").get<std::vector<double>>();
    const auto q = j.at("orientation").get<std::vector<double>>();
    if (p.size() != 3 || q.size() != 4) throw ParseError("pose needs 3 + 4 components", 0);
    Vec7 v;
    v << p[0], p[1], p[2], q[0], q[1], q[2], q[3];
    return Pose::from_vector(v);
  } catch (const json::exception& e) {
    throw ParseError(std::string("pose: ") + e.what(), 0);
  } catch (const DegenerateQuaternion& e) {
    throw ParseError(std::string("pose: ") + e.what(), 0);
  }
}

}  // namespace teleop
