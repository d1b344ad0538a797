#include "teleop/network/channel.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "teleop/core/errors.hpp"

namespace teleop {

DelaySpec DelaySpec::constant(double ms) {
  DelaySpec s;
  s.kind = Kind::kConstant;
  s.mean_ms = ms;
  s.std_ms = 0.0;
  return s;
}

DelaySpec DelaySpec::normal(double mean_ms, double std_ms) {
  DelaySpec s;
  s.kind = Kind::kNormal;
  s.mean_ms = mean_ms;
  s.std_ms = std_ms;
  return s;
}

DelaySpec DelaySpec::from_trace(std::vector<DelayTracePoint> trace) {
  DelaySpec s;
  s.kind = Kind::kTrace;
  s.trace = std::move(trace);
  return s;
}

void DelaySpec::validate() const {
  switch (kind) {
    case Kind::kConstant:
    case Kind::kNormal:
      if (!(mean_ms >= 0.0) || !(std_ms >= 0.0)) {
        throw ConfigError("delay mean and std must be non-negative");
      }
      break;
    case Kind::kTrace:
      if (trace.empty()) throw ConfigError("delay trace is empty");
      for (std::size_t i = 0; i < trace.size(); ++i) {
        if (!(trace[i].delay_ms >= 0.0)) throw ConfigError("negative delay in trace");
        if (i > 0 && !(trace[i].send_ms > trace[i - 1].send_ms)) {
          throw ConfigError("delay trace send times must increase");
        }
      }
      break;
  }
}

std::vector<DelayTracePoint> load_delay_trace(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open delay trace " + path.string(), 0);
  std::vector<DelayTracePoint> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1) {
      if (line.rfind("send_ms,delay_ms", 0) != 0) {
        throw ParseError("delay trace header must be send_ms,delay_ms", line_no);
      }
      continue;
    }
    if (line.empty()) continue;
    std::istringstream fields(line);
    DelayTracePoint p{};
    char comma = 0;
    if (!(fields >> p.send_ms >> comma >> p.delay_ms) || comma != ',') {
      throw ParseError("malformed delay trace row", line_no);
    }
    out.push_back(p);
  }
  return out;
}

DelayChannel::DelayChannel(DelaySpec spec, std::uint64_t seed)
    : spec_(std::move(spec)), rng_(seed), normal_(0.0, 1.0) {
  spec_.validate();
}

double DelayChannel::sample_delay_ms(SimTime now) {
  switch (spec_.kind) {
    case DelaySpec::Kind::kConstant:
      return spec_.mean_ms;
    case DelaySpec::Kind::kNormal: {
      if (spec_.std_ms == 0.0) return spec_.mean_ms;
      if (spec_.mean_ms == 0.0) return 0.0;
      for (;;) {
        const double d = spec_.mean_ms + spec_.std_ms * normal_(rng_);
        if (d >= 0.0) return d;
      }
    }
    case DelaySpec::Kind::kTrace: {
      const double ms = to_ms(now);
      auto it = std::upper_bound(spec_.trace.begin(), spec_.trace.end(), ms,
                                 [](double v, const DelayTracePoint& p) { return v < p.send_ms; });
      if (it == spec_.trace.begin()) return spec_.trace.front().delay_ms;
      return std::prev(it)->delay_ms;
    }
  }
  return 0.0;
}

SimTime DelayChannel::send(TimedPacket packet, SimTime now) {
  if (now < packet.latest_stamp()) {
    throw InstrumentationError("packet sent before its latest stamp");
  }
  const SimTime due = now + from_ms(sample_delay_ms(now));
  in_flight_.push({due, sent_++, std::move(packet)});
  return due;
}

std::optional<SimTime> DelayChannel::next_delivery() const {
  if (in_flight_.empty()) return std::nullopt;
  return in_flight_.top().due;
}

std::vector<TimedPacket> DelayChannel::deliver_until(SimTime now) {
  std::vector<TimedPacket> out;
  while (!in_flight_.empty() && in_flight_.top().due <= now) {
    out.push_back(in_flight_.top().packet);
    in_flight_.pop();
  }
  return out;
}

}  // namespace teleop
