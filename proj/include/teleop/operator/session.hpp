#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "teleop/core/pose.hpp"
#include "teleop/operator/shape.hpp"

namespace teleop {

struct SessionSample {
  double t_ms = 0.0;
  Pose target;
  std::optional<Pose> actual;
};

// A recorded operator stream: target poses from the input device and,
// optionally, the measured end-effector pose.
struct Session {
  double rate_hz = 120.0;
  std::vector<SessionSample> samples;

  // Throws ParseError (line 0) when timestamps are not strictly increasing.
  void validate() const;
};

// Samples `shape` on the exact grid k * 1000 / rate_hz for
// floor(duration_ms * rate_hz / 1000) samples.
Session sample_stream(const ShapeSpec& shape, double rate_hz, double duration_ms);

// CSV with header t_ms,tx,ty,tz,tqx,tqy,tqz,tqw[,ax,ay,az,aqx,aqy,aqz,aqw].
void record(const Session& session, const std::filesystem::path& path);
Session load(const std::filesystem::path& path);

std::string session_to_csv(const Session& session);
Session session_from_csv(const std::string& text);

// Writes corpus/<shape>/<run_id>.csv for every shape and repetition using
// the scripted operator model. Returns the written paths in order.
std::vector<std::filesystem::path> write_corpus(const std::filesystem::path& root,
                                                const std::vector<ShapeKind>& shapes,
                                                int repetitions, double duration_ms,
                                                unsigned long long seed);

struct CorpusEntry {
  ShapeKind shape;
  std::string run_id;
  std::filesystem::path path;
};

// Lists a corpus directory, sorted by shape then run id.
std::vector<CorpusEntry> list_corpus(const std::filesystem::path& root);

}  // namespace teleop
