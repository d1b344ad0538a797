#include "teleop/predictor/history.hpp"

#include "teleop/core/errors.hpp"

namespace teleop {

void HistoryBuffer::push(SimTime t, const Pose& pose) {
  if (!entries_.empty() && t <= entries_.back().t) {
    throw InstrumentationError("history timestamps must increase: " + std::to_string(t.count()) +
                               "us after " + std::to_string(entries_.back().t.count()) + "us");
  }
  entries_.push_back({t, pose.as_vector()});
  while (entries_.back().t - entries_.front().t > window_) entries_.pop_front();
}

SimTime HistoryBuffer::span() const {
  if (entries_.size() < 2) return SimTime{0};
  return entries_.back().t - entries_.front().t;
}

std::vector<double> HistoryBuffer::axis(int index) const {
  std::vector<double> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.value[index]);
  return out;
}

}  // namespace teleop
