#pragma once

#include <cstdint>
#include <filesystem>
#include <queue>
#include <random>
#include <vector>

#include "teleop/core/time.hpp"
#include "teleop/network/packet.hpp"

namespace teleop {

struct DelayTracePoint {
  double send_ms;
  double delay_ms;
};

struct DelaySpec {
  enum class Kind { kConstant, kNormal, kTrace };

  Kind kind = Kind::kNormal;
  double mean_ms = 50.0;
  double std_ms = 10.0;
  std::vector<DelayTracePoint> trace;

  static DelaySpec constant(double ms);
  static DelaySpec normal(double mean_ms, double std_ms);
  static DelaySpec from_trace(std::vector<DelayTracePoint> trace);

  // Throws ConfigError on negative parameters or an unordered trace.
  void validate() const;
};

// CSV with header send_ms,delay_ms.
std::vector<DelayTracePoint> load_delay_trace(const std::filesystem::path& path);

// One-way transport between two stages. Every packet gets its own delay, so
// packets may overtake each other; staleness is left to the receiver.
class DelayChannel {
 public:
  DelayChannel(DelaySpec spec, std::uint64_t seed);

  // Draws a delay, truncated at zero for the normal law. A normal law with
  // zero mean and spread is a zero delay.
  double sample_delay_ms(SimTime now);

  // Schedules delivery at now + delay and returns that instant.
  SimTime send(TimedPacket packet, SimTime now);

  bool idle() const { return in_flight_.empty(); }
  std::optional<SimTime> next_delivery() const;

  // Packets due at or before `now`, in delivery order (ties in send order).
  std::vector<TimedPacket> deliver_until(SimTime now);

  const DelaySpec& spec() const { return spec_; }
  std::uint64_t sent() const { return sent_; }

 private:
  struct InFlight {
    SimTime due;
    std::uint64_t order;
    TimedPacket packet;
  };
  struct Later {
    bool operator()(const InFlight& a, const InFlight& b) const {
      return a.due != b.due ? a.due > b.due : a.order > b.order;
    }
  };

  DelaySpec spec_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_;
  std::priority_queue<InFlight, std::vector<InFlight>, Later> in_flight_;
  std::uint64_t sent_ = 0;
};

}  // namespace teleop
