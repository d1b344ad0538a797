#include "teleop/harness/scheduler.hpp"

#include <string>

#include "teleop/core/errors.hpp"

namespace teleop {

void EventScheduler::schedule(SimTime t, int priority, Action action) {
  if (t < clock_.now()) {
    throw InstrumentationError("event scheduled at " + std::to_string(t.count()) +
                               "us before now " + std::to_string(clock_.now().count()) + "us");
  }
  queue_.push({t, priority, seq_++, std::move(action)});
}

void EventScheduler::run_until(SimTime end) {
  while (!queue_.empty() && queue_.top().t <= end) {
    Event ev = queue_.top();
    queue_.pop();
    clock_.advance_to(ev.t);
    ev.action();
    ++executed_;
  }
  if (clock_.now() < end) clock_.advance_to(end);
}

}  // namespace teleop
