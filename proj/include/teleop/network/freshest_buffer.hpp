#pragma once

#include <optional>
#include <utility>

namespace teleop {

struct OfferResult {
  bool accepted = false;        // the arriving packet is in service or waiting
  bool replaced_stale = false;  // a waiting packet was discarded for it
  bool started_service = false;
};

struct ByOrigin {
  template <typename Packet>
  auto operator()(const Packet& p) const {
    return p.t_origin;
  }
};

struct BySeq {
  template <typename Packet>
  auto operator()(const Packet& p) const {
    return p.seq;
  }
};

// Single server with one waiting slot that always holds the freshest packet
// seen while the server was busy. Freshness is t_origin unless another key
// is given; ties keep the packet already waiting.
template <typename Packet, typename Freshness = ByOrigin>
class FreshestBuffer {
 public:
  OfferResult offer(Packet packet) {
    if (!in_service_) {
      in_service_ = std::move(packet);
      return {true, false, true};
    }
    if (!waiting_) {
      waiting_ = std::move(packet);
      return {true, false, false};
    }
    if (Freshness{}(*waiting_) < Freshness{}(packet)) {
      waiting_ = std::move(packet);
      return {true, true, false};
    }
    return {false, false, false};
  }

  // Ends the current service. The waiting packet, if any, enters service and
  // is returned.
  std::optional<Packet> complete() {
    in_service_.reset();
    if (waiting_) {
      in_service_ = std::move(waiting_);
      waiting_.reset();
    }
    return in_service_;
  }

  bool busy() const { return in_service_.has_value(); }
  const std::optional<Packet>& in_service() const { return in_service_; }
  const std::optional<Packet>& waiting() const { return waiting_; }
  int waiting_count() const { return waiting_ ? 1 : 0; }

 private:
  std::optional<Packet> in_service_;
  std::optional<Packet> waiting_;
};

}  // namespace teleop
