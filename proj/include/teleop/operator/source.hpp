#pragma once

#include <chrono>
#include <condition_variable>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <random>

#include "teleop/core/pose.hpp"
#include "teleop/core/time.hpp"
#include "teleop/operator/session.hpp"
#include "teleop/operator/shape.hpp"

namespace teleop {

// Supplies operator poses on the input sampling grid. Calls arrive with
// increasing t.
class PoseSource {
 public:
  virtual ~PoseSource() = default;

  // nullopt means no sample is available yet (only live sources starve).
  virtual std::optional<Pose> sample(SimTime t) = 0;
};

// Scripted operator: the shape traced from a seeded random starting phase
// with Gaussian position noise at the input device's resolution.
class ScriptedOperator : public PoseSource {
 public:
  struct Options {
    double noise_std_m = 5e-5;
    bool random_phase = true;
  };

  ScriptedOperator(ShapeSpec shape, unsigned long long seed);
  ScriptedOperator(ShapeSpec shape, unsigned long long seed, Options options);

  std::optional<Pose> sample(SimTime t) override;

  const ShapeSpec& shape() const { return shape_; }

 private:
  ShapeSpec shape_;
  Options options_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> noise_;
};

// Replays a recorded session, linearly interpolating between samples and
// holding the last sample past the end.
class SessionSource : public PoseSource {
 public:
  explicit SessionSource(Session session);
  std::optional<Pose> sample(SimTime t) override;

 private:
  Session session_;
  std::size_t cursor_ = 0;
};

// Single-producer queue fed by the network bridge with timestamped poses.
class LiveInput {
 public:
  struct Item {
    double t_ms;
    Pose pose;
  };

  void push(double t_ms, const Pose& pose);
  void close();
  bool closed() const;

  // Latest pose with timestamp <= t_ms, consuming older items. Blocks up to
  // `wait` for an item at or past t_ms to arrive. nullopt when nothing has
  // arrived by then.
  std::optional<Pose> pose_at(double t_ms, std::chrono::milliseconds wait);

  // Timestamp of the newest queued item, if any.
  std::optional<double> newest_time() const;

 private:
  mutable std::mutex mutex_;
  std::condition_variable cv_;
  std::deque<Item> items_;
  std::optional<Pose> last_;
  bool closed_ = false;
};

class LiveSource : public PoseSource {
 public:
  LiveSource(std::shared_ptr<LiveInput> input, std::chrono::milliseconds wait)
      : input_(std::move(input)), wait_(wait) {}

  std::optional<Pose> sample(SimTime t) override;

 private:
  std::shared_ptr<LiveInput> input_;
  std::chrono::milliseconds wait_;
};

}  // namespace teleop
