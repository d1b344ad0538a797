#pragma once

#include <deque>
#include <vector>

#include "teleop/core/pose.hpp"
#include "teleop/core/time.hpp"

namespace teleop {

// Sliding window of the most recent operator poses. Entries older than
// `window` relative to the newest one are evicted on push.
class HistoryBuffer {
 public:
  struct Entry {
    SimTime t;
    Vec7 value;
  };

  explicit HistoryBuffer(SimTime window = from_ms(4000.0)) : window_(window) {}

  // Throws InstrumentationError unless t is strictly after the newest entry.
  void push(SimTime t, const Pose& pose);
  void clear() { entries_.clear(); }

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  SimTime window() const { return window_; }
  SimTime span() const;

  const Entry& back() const { return entries_.back(); }
  const Entry& operator[](std::size_t i) const { return entries_[i]; }
  Pose latest() const { return Pose::from_vector(entries_.back().value); }

  // One axis of the window, oldest first.
  std::vector<double> axis(int index) const;

 private:
  SimTime window_;
  std::deque<Entry> entries_;
};

}  // namespace teleop
