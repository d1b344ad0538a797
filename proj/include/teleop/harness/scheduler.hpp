#pragma once

#include <cstdint>
#include <functional>
#include <queue>
#include <vector>

#include "teleop/core/clock.hpp"
#include "teleop/core/time.hpp"

namespace teleop {

// Deterministic discrete-event loop. Events at equal times run by priority,
// then in scheduling order.
class EventScheduler {
 public:
  using Action = std::function<void()>;

  explicit EventScheduler(ClockMode mode = ClockMode::kVirtual) : clock_(mode) {}

  // Throws InstrumentationError for events in the past.
  void schedule(SimTime t, int priority, Action action);

  // Runs every event with time <= end; the clock finishes at `end`.
  void run_until(SimTime end);

  SimTime now() const { return clock_.now(); }
  std::size_t pending() const { return queue_.size(); }
  std::uint64_t executed() const { return executed_; }

 private:
  struct Event {
    SimTime t;
    int priority;
    std::uint64_t seq;
    Action action;
  };
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      if (a.t != b.t) return a.t > b.t;
      if (a.priority != b.priority) return a.priority > b.priority;
      return a.seq > b.seq;
    }
  };

  VirtualClock clock_;
  std::priority_queue<Event, std::vector<Event>, Later> queue_;
  std::uint64_t seq_ = 0;
  std::uint64_t executed_ = 0;
};

}  // namespace teleop
