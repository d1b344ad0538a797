#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "teleop/core/errors.hpp"
#include "teleop/network/channel.hpp"
#include "teleop/network/freshest_buffer.hpp"
#include "teleop/network/latency.hpp"
#include "teleop/network/packet.hpp"
#include "support/queue_oracle.hpp"

using namespace teleop;
using namespace teleop::testing;

namespace {

TimedPacket packet_at(double origin_ms) { return make_packet(AxisCommand{}, from_ms(origin_ms), 0); }

}  // namespace

TEST_CASE("busy server replaces a staler waiting packet") {
  FreshestBuffer<Pkt> buf;
  CHECK(buf.offer({0, 5}).started_service);
  CHECK(buf.offer({1, 10}).accepted);
  const OfferResult r = buf.offer({2, 20});
  CHECK(r.accepted);
  CHECK(r.replaced_stale);
  CHECK(buf.waiting()->id == 2);
}

TEST_CASE("late stale arrival is discarded") {
  FreshestBuffer<Pkt> buf;
  buf.offer({0, 5});
  buf.offer({1, 20});
  const OfferResult r = buf.offer({2, 10});
  CHECK_FALSE(r.accepted);
  CHECK(buf.waiting()->id == 1);
}

TEST_CASE("completion promotes the waiting packet") {
  FreshestBuffer<Pkt> buf;
  buf.offer({0, 5});
  buf.offer({1, 20});
  const auto next = buf.complete();
  REQUIRE(next);
  CHECK(next->id == 1);
  CHECK(buf.waiting_count() == 0);
  CHECK_FALSE(buf.complete());
  CHECK_FALSE(buf.busy());
}

TEST_CASE("exhaustive orderings of up to four packets match the reference model") {
  const int sequences = for_each_ordering(
      4, [](const auto& events, const auto& origins) { CHECK(agrees(events, origins)); });
  CHECK(sequences > 10000);
}

TEST_CASE("random event sequences keep one freshest waiting packet") {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> len(1, 40), origin(0, 1000), coin(0, 2);
  for (int s = 0; s < 100000; ++s) {
    const int n = len(rng);
    std::vector<bool> events;
    std::vector<int> origins;
    for (int i = 0; i < n; ++i) {
      const bool arrival = coin(rng) != 0;
      events.push_back(arrival);
      if (arrival) origins.push_back(origin(rng));
    }
    if (!agrees(events, origins)) {
      FAIL("disagreement at sequence " << s);
    }
  }
}

TEST_CASE("normal channel delay statistics") {
  DelayChannel ch(DelaySpec::normal(50.0, 10.0), 99);
  const int n = 100000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double d = ch.sample_delay_ms(SimTime{0});
    CHECK(d >= 0.0);
    sum += d;
    sq += d * d;
  }
  const double mean = sum / n;
  const double sd = std::sqrt(sq / n - mean * mean);
  CHECK(mean >= 48.5);
  CHECK(mean <= 51.5);
  CHECK(sd >= 8.5);
  CHECK(sd <= 11.5);
}

TEST_CASE("normal delays are never negative near zero mean") {
  DelayChannel ch(DelaySpec::normal(5.0, 10.0), 3);
  for (int i = 0; i < 10000; ++i) CHECK(ch.sample_delay_ms(SimTime{0}) >= 0.0);
}

TEST_CASE("zero mean law delivers immediately") {
  DelayChannel ch(DelaySpec::normal(0.0, 10.0), 3);
  CHECK(ch.sample_delay_ms(SimTime{0}) == 0.0);
  DelayChannel flat(DelaySpec::normal(30.0, 0.0), 3);
  CHECK(flat.sample_delay_ms(SimTime{0}) == 30.0);
}

TEST_CASE("trace delay follows the send time") {
  DelayChannel ch(DelaySpec::from_trace({{0.0, 10.0}, {100.0, 40.0}}), 1);
  CHECK(ch.sample_delay_ms(from_ms(50.0)) == 10.0);
  CHECK(ch.sample_delay_ms(from_ms(100.0)) == 40.0);
  CHECK(ch.sample_delay_ms(from_ms(500.0)) == 40.0);
}

TEST_CASE("invalid delay laws are rejected") {
  CHECK_THROWS_AS(DelaySpec::normal(-1.0, 1.0).validate(), ConfigError);
  CHECK_THROWS_AS(DelaySpec::from_trace({{10.0, 1.0}, {5.0, 1.0}}).validate(), ConfigError);
  CHECK_THROWS_AS(DelaySpec::from_trace({}).validate(), ConfigError);
}

TEST_CASE("packets may overtake and deliver in due order") {
  DelayChannel ch(DelaySpec::from_trace({{0.0, 30.0}, {10.0, 5.0}}), 1);
  ch.send(packet_at(0.0), from_ms(0.0));
  ch.send(packet_at(10.0), from_ms(10.0));
  CHECK(ch.next_delivery() == from_ms(15.0));
  auto first = ch.deliver_until(from_ms(20.0));
  REQUIRE(first.size() == 1);
  CHECK(first[0].t_origin == from_ms(10.0));
  auto second = ch.deliver_until(from_ms(30.0));
  REQUIRE(second.size() == 1);
  CHECK(second[0].t_origin == from_ms(0.0));
  CHECK(ch.idle());
}

TEST_CASE("equal due times deliver in send order") {
  DelayChannel ch(DelaySpec::constant(10.0), 1);
  ch.send(make_packet(AxisCommand{}, from_ms(0.0), 1), from_ms(0.0));
  ch.send(make_packet(AxisCommand{}, from_ms(0.0), 2), from_ms(0.0));
  const auto out = ch.deliver_until(from_ms(10.0));
  REQUIRE(out.size() == 2);
  CHECK(out[0].seq == 1);
  CHECK(out[1].seq == 2);
}

TEST_CASE("stamps must not go back in time") {
  TimedPacket p = packet_at(0.0);
  p.stamp(Stage::kSampled, from_ms(0.0));
  p.stamp(Stage::kEdgeReceived, from_ms(20.0));
  CHECK_THROWS_AS(p.stamp(Stage::kCommandIssued, from_ms(10.0)), InstrumentationError);
  DelayChannel ch(DelaySpec::constant(1.0), 1);
  CHECK_THROWS_AS(ch.send(p, from_ms(5.0)), InstrumentationError);
}

TEST_CASE("end-to-end delays come from the packet stamps") {
  TimedPacket p = packet_at(0.0);
  p.stamp(Stage::kSampled, from_ms(0.0));
  p.stamp(Stage::kPlantExecuted, from_ms(127.0));
  CHECK(control_delay_ms(p) == doctest::Approx(127.0));
  LatencyMeasurement m;
  measure_e2e(m, p);
  CHECK(m.has_control);
  CHECK(m.control_ms == doctest::Approx(127.0));
  TimedPacket bare = packet_at(0.0);
  CHECK_THROWS_AS(measure_e2e(m, bare), InstrumentationError);
}

TEST_CASE("latency average starts at the first sample then smooths") {
  LatencyMeasurement m;
  m.update_visual(100.0);
  CHECK(m.visual_ms == 100.0);
  m.update_visual(200.0);
  CHECK(m.visual_ms == doctest::Approx(0.9 * 100.0 + 0.1 * 200.0));
}
