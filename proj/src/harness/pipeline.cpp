#include "teleop/harness/pipeline.hpp"

#include <cmath>
#include <optional>
#include <random>

#include "teleop/control/synthesizer.hpp"
#include "teleop/core/errors.hpp"
#include "teleop/harness/scheduler.hpp"
#include "teleop/network/freshest_buffer.hpp"

namespace teleop {

ChannelDelays ChannelDelays::all(const DelaySpec& spec) { return {spec, spec, spec, spec}; }

void ChannelDelays::validate() const {
  uplink.validate();
  downlink.validate();
  edge_to_plant.validate();
  plant_to_edge.validate();
}

void ProcessingBudget::validate() const {
  if (!(edge_service_ms >= 0) || !(render_ms >= 0) || !(display_ms >= 0) ||
      !(plant_api_ms >= 0) || !(feedback_period_ms > 0)) {
    throw ConfigError("processing times must be non-negative");
  }
}

int PipelineConfig::decision_stride() const {
  return std::max(1, static_cast<int>(std::lround(input_rate_hz / decision_rate_hz)));
}

void PipelineConfig::validate() const {
  if (!(input_rate_hz > 0) || !(decision_rate_hz > 0) || decision_rate_hz > input_rate_hz) {
    throw ConfigError("decision rate must be positive and at most the input rate");
  }
  if (!(warmup_ms >= 0) || !(length_ms > 0)) throw ConfigError("episode length must be positive");
  delays.validate();
  processing.validate();
  rmp.validate();
  smoother.validate();
  pid.validate();
  map.validate();
  bounds.validate();
  bins.validate();
  if (!(guard_radius_m > 0)) throw ConfigError("guard radius must be positive");
  if (!(latency_alpha > 0 && latency_alpha <= 1)) throw ConfigError("latency alpha in (0, 1]");
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), 0x7e1e0u};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

namespace {

enum Priority : int {
  kDeliver = 0,
  kService = 1,
  kPlantTick = 2,
  kOperatorTick = 3,
  kEdgeTick = 4,
  kRenderTick = 5,
  kFeedbackTick = 6,
};

struct LatestDelay {
  double value_ms = 0.0;
  std::uint64_t count = 0;
};

class Episode {
 public:
  Episode(const PipelineConfig& cfg, PoseSource& source, HorizonPolicy& policy, std::uint64_t seed,
          const EpisodeObserver& observer)
      : cfg_(cfg),
        source_(source),
        policy_(policy),
        observer_(observer),
        forecaster_(cfg.predictor),
        uplink_(cfg.delays.uplink, derive_seed(seed, 1)),
        downlink_(cfg.delays.downlink, derive_seed(seed, 2)),
        to_plant_(cfg.delays.edge_to_plant, derive_seed(seed, 3)),
        to_edge_(cfg.delays.plant_to_edge, derive_seed(seed, 4)),
        synthesizer_(cfg.map, cfg.guard_radius_m),
        smoother_(cfg.smoother) {
    latency_.alpha = cfg.latency_alpha;
    record_start_ = from_ms(cfg.warmup_ms);
    record_end_ = from_ms(cfg.warmup_ms + cfg.length_ms);
  }

  EpisodeRecord run() {
    const auto first = source_.sample(SimTime{0});
    if (!first) throw Stage2Timeout("operator produced no pose at the start of the episode");
    const Vec7 start = map_workspace(*first, cfg_.map).as_vector();
    twin_.axes = AxisState::at_rest(start);
    twin_.target = start;
    plant_.axes = AxisState::at_rest(start);
    plant_command_ = start;
    displayed_.push_back({0.0, start});
    sigma_r_ = start;

    schedule_operator(0);
    schedule_edge(0);
    schedule_render(0);
    schedule_plant(0);
    schedule_feedback(0);
    sched_.run_until(record_end_);
    return finish();
  }

 private:
  // Operator side ----------------------------------------------------------

  void schedule_operator(std::int64_t k) {
    const SimTime t = grid_time(k, cfg_.input_rate_hz);
    if (t >= record_end_) return;
    sched_.schedule(t, kOperatorTick, [this, k, t] {
      operator_tick(k, t);
      schedule_operator(k + 1);
    });
  }

  void operator_tick(std::int64_t k, SimTime t) {
    const auto raw = source_.sample(t);
    if (!raw) throw Stage2Timeout("operator input starved at " + std::to_string(to_ms(t)) + " ms");
    const Pose mapped = map_workspace(*raw, cfg_.map);
    latest_reference_ = mapped.as_vector();
    forecaster_.observe(t, *raw);
    const bool recording = t >= record_start_;

    if (k % cfg_.decision_stride() == 0) {
      AgentState state;
      state.pose = minmax_normalize(mapped, cfg_.bounds);
      state.control_delay_ms = static_cast<int>(std::lround(latency_.control_ms));
      state.visual_delay_ms = static_cast<int>(std::lround(latency_.visual_ms));
      if (recording) {
        action_ = policy_.decide(state);
        action_.control_ms = std::clamp(action_.control_ms, 0, cfg_.bins.max_ms);
        action_.visual_ms = std::clamp(action_.visual_ms, 0, cfg_.bins.max_ms);
        rec_.decisions.push_back({to_ms(t), action_.control_ms, action_.visual_ms});
        if (observer_.on_decision) observer_.on_decision(state, action_, to_ms(t));
      } else {
        action_ = {};
      }
    }

    const auto pred = forecaster_.predict_pair(action_.control_ms, action_.visual_ms);
    PredictedPoses poses{pred.control, pred.visual, action_.control_ms, action_.visual_ms};
    TimedPacket pkt = make_packet(poses, t, next_seq_++);
    send(uplink_, std::move(pkt), t, [this](TimedPacket p) { edge_receive(std::move(p)); });

    if (recording) {
      rec_.t_ms.push_back(to_ms(t));
      rec_.reference.push_back(mapped.as_vector());
      rec_.control_delay_ms.push_back(latency_.control_ms);
      rec_.visual_delay_ms.push_back(latency_.visual_ms);
    }
  }

  void display(TimedPacket pkt) {
    const auto& frame = std::get<FrameState>(pkt.payload);
    if (frame.frame_id <= last_displayed_frame_) return;
    last_displayed_frame_ = frame.frame_id;
    const SimTime now = sched_.now();
    pkt.stamp(Stage::kDisplayed, now);
    const double t_v = visual_delay_ms(pkt);
    latency_.update_visual(t_v);
    if (frame.control_delay_ms && frame_control_count_ > last_control_count_) {
      last_control_count_ = frame_control_count_;
      latency_.update_control(*frame.control_delay_ms);
    }
    if (now >= record_start_) rec_.visual_delay_samples_ms.push_back(t_v);
    displayed_.push_back({to_ms(now), frame.twin});
    displayed_origin_.push_back({to_ms(now), to_ms(pkt.t_origin)});
    if (observer_.on_display) {
      DisplayEvent e;
      e.t_ms = to_ms(now);
      e.frame_id = frame.frame_id;
      e.reference = latest_reference_;
      e.twin = frame.twin;
      e.plant = frame.plant;
      e.visual_delay_ms = latency_.visual_ms;
      e.control_delay_ms = latency_.control_ms;
      e.action = action_;
      e.recording = now >= record_start_;
      observer_.on_display(e);
    }
  }

  // Edge --------------------------------------------------------------------

  void edge_receive(TimedPacket pkt) {
    pkt.stamp(Stage::kEdgeReceived, sched_.now());
    const auto res = edge_buffer_.offer(std::move(pkt));
    if (res.started_service) start_edge_service();
  }

  void start_edge_service() {
    sched_.schedule(sched_.now() + from_ms(cfg_.processing.edge_service_ms), kService, [this] {
      TimedPacket done = *edge_buffer_.in_service();
      edge_apply(done);
      if (edge_buffer_.complete()) start_edge_service();
    });
  }

  void edge_apply(TimedPacket& pkt) {
    if (pkt.t_origin <= last_applied_origin_ && applied_any_) return;
    applied_any_ = true;
    last_applied_origin_ = pkt.t_origin;
    const SimTime now = sched_.now();
    const auto& poses = std::get<PredictedPoses>(pkt.payload);
    twin_.target = map_workspace(poses.visual, cfg_.map).as_vector();
    twin_.target_origin = pkt.t_origin;
    pkt.stamp(Stage::kVisualProcessed, now);
    const Vec7 command = synthesizer_.synthesize(poses.control, twin_.axes.q, sigma_r_);
    smoother_receive(smoother_, command, now);
    command_origin_ = pkt.t_origin;
  }

  void schedule_edge(std::int64_t k) {
    const SimTime t = grid_time(k, kSimRateHz);
    if (t >= record_end_) return;
    sched_.schedule(t, kEdgeTick, [this, k, t] {
      step_sim(twin_, cfg_.rmp, 1.0 / kSimRateHz);
      if (smoother_.previous) {
        const Vec7 cmd = smooth_command(smoother_, t);
        TimedPacket pkt = make_packet(AxisCommand{cmd}, command_origin_, next_seq_++);
        pkt.stamp(Stage::kCommandIssued, t);
        send(to_plant_, std::move(pkt), t, [this](TimedPacket p) { plant_receive(std::move(p)); });
      }
      schedule_edge(k + 1);
    });
  }

  void schedule_render(std::int64_t k) {
    const SimTime t = grid_time(k, 1000.0 / kRenderPeriodMs);
    if (t >= record_end_) return;
    sched_.schedule(t, kRenderTick, [this, k, t] {
      const FrameSnapshot snap = render_tick(twin_, t);
      FrameState frame{snap.frame_id, snap.pose, std::nullopt, sigma_r_};
      if (edge_control_delay_.count > 0) frame.control_delay_ms = edge_control_delay_.value_ms;
      const std::uint64_t control_count = edge_control_delay_.count;
      TimedPacket pkt = make_packet(frame, snap.origin, next_seq_++);
      pkt.stamp(Stage::kSimulated, t);
      const SimTime rendered = t + from_ms(cfg_.processing.render_ms);
      sched_.schedule(rendered, kRenderTick, [this, pkt, rendered, control_count]() mutable {
        pkt.stamp(Stage::kRendered, rendered);
        pkt.stamp(Stage::kFrameSent, rendered);
        send(downlink_, std::move(pkt), rendered, [this, control_count](TimedPacket p) {
          const SimTime shown = sched_.now() + from_ms(cfg_.processing.display_ms);
          sched_.schedule(shown, kService, [this, p = std::move(p), control_count]() mutable {
            frame_control_count_ = control_count;
            display(std::move(p));
          });
        });
      });
      schedule_render(k + 1);
    });
  }

  void edge_feedback(TimedPacket pkt) {
    if (pkt.seq <= last_feedback_seq_) return;
    last_feedback_seq_ = pkt.seq;
    const auto& fb = std::get<PlantFeedback>(pkt.payload);
    sigma_r_ = fb.position;
    if (fb.control_delay_ms >= 0.0 && feedback_delay_count_ > edge_control_delay_.count) {
      edge_control_delay_ = {fb.control_delay_ms, feedback_delay_count_};
    }
  }

  // Plant -------------------------------------------------------------------

  void plant_receive(TimedPacket pkt) {
    pkt.stamp(Stage::kPlantReceived, sched_.now());
    const auto res = plant_buffer_.offer(std::move(pkt));
    if (res.started_service) start_plant_service();
  }

  void start_plant_service() {
    sched_.schedule(sched_.now() + from_ms(cfg_.processing.plant_api_ms), kService, [this] {
      TimedPacket done = *plant_buffer_.in_service();
      if (done.seq > last_executed_seq_) {
        last_executed_seq_ = done.seq;
        pending_execution_ = std::move(done);
      }
      if (plant_buffer_.complete()) start_plant_service();
    });
  }

  void schedule_plant(std::int64_t k) {
    const SimTime t = grid_time(k, kPlantRateHz);
    if (t >= record_end_) return;
    sched_.schedule(t, kPlantTick, [this, k, t] {
      if (pending_execution_) {
        TimedPacket pkt = std::move(*pending_execution_);
        pending_execution_.reset();
        plant_command_ = std::get<AxisCommand>(pkt.payload).target;
        pkt.stamp(Stage::kPlantExecuted, t);
        const double t_r = control_delay_ms(pkt);
        plant_delay_ = {t_r, plant_delay_.count + 1};
        executing_origin_ = to_ms(pkt.t_origin);
        if (t >= record_start_) rec_.control_delay_samples_ms.push_back(t_r);
      }
      plant_step(plant_, plant_command_, cfg_.pid, 1.0 / kPlantRateHz);
      if (t + from_ms(20) >= record_start_) {
        // Pose after this cycle, i.e. at the next tick instant.
        const double after = to_ms(t) + 1000.0 / kPlantRateHz;
        plant_trace_.push_back({after, plant_.axes.q});
        plant_origin_.push_back({after, executing_origin_});
      }
      schedule_plant(k + 1);
    });
  }

  void schedule_feedback(std::int64_t k) {
    const SimTime t = grid_time(k, 1000.0 / cfg_.processing.feedback_period_ms);
    if (t >= record_end_) return;
    sched_.schedule(t, kFeedbackTick, [this, k, t] {
      PlantFeedback fb{plant_.axes.q, plant_.axes.qd,
                       plant_delay_.count > 0 ? plant_delay_.value_ms : -1.0};
      const std::uint64_t count = plant_delay_.count;
      TimedPacket pkt = make_packet(fb, t, next_seq_++);
      send(to_edge_, std::move(pkt), t, [this, count](TimedPacket p) {
        feedback_delay_count_ = count;
        edge_feedback(std::move(p));
      });
      schedule_feedback(k + 1);
    });
  }

  // Plumbing ------------------------------------------------------------------

  template <typename Handler>
  void send(DelayChannel& ch, TimedPacket pkt, SimTime now, Handler on_arrival) {
    const SimTime due = ch.send(std::move(pkt), now);
    sched_.schedule(due, kDeliver, [this, &ch, due, on_arrival] {
      for (auto& p : ch.deliver_until(due)) on_arrival(std::move(p));
    });
  }

  EpisodeRecord finish() {
    rec_.rate_hz = cfg_.input_rate_hz;
    rec_.visual = resample(displayed_, rec_.t_ms);
    rec_.real = resample(plant_trace_, rec_.t_ms);
    rec_.visual_origin_ms = hold_values(displayed_origin_, rec_.t_ms);
    rec_.control_origin_ms = hold_values(plant_origin_, rec_.t_ms);
    rec_.validate();
    return std::move(rec_);
  }

  // Value of the newest sample at or before each grid time, -1 before any.
  static std::vector<double> hold_values(const std::vector<std::pair<double, double>>& samples,
                                         const std::vector<double>& grid) {
    std::vector<double> out;
    out.reserve(grid.size());
    std::size_t j = 0;
    double current = -1.0;
    for (double t : grid) {
      while (j < samples.size() && samples[j].first <= t) current = samples[j++].second;
      out.push_back(current);
    }
    return out;
  }

  const PipelineConfig& cfg_;
  PoseSource& source_;
  HorizonPolicy& policy_;
  const EpisodeObserver& observer_;
  EventScheduler sched_;
  ArmaForecaster forecaster_;
  DelayChannel uplink_, downlink_, to_plant_, to_edge_;
  ControlSynthesizer synthesizer_;
  SmootherState smoother_;
  FreshestBuffer<TimedPacket> edge_buffer_;
  FreshestBuffer<TimedPacket, BySeq> plant_buffer_;
  TwinState twin_;
  PlantState plant_;
  Vec7 plant_command_ = Vec7::Zero();
  std::optional<Vec7> sigma_r_;
  Vec7 latest_reference_ = Vec7::Zero();
  std::optional<TimedPacket> pending_execution_;
  LatencyMeasurement latency_;
  HorizonAction action_;
  SimTime record_start_{0}, record_end_{0};
  SimTime last_applied_origin_{0};
  SimTime command_origin_{0};
  bool applied_any_ = false;
  std::uint64_t next_seq_ = 1;
  std::uint64_t last_executed_seq_ = 0;
  std::uint64_t last_feedback_seq_ = 0;
  std::uint64_t last_displayed_frame_ = 0;
  std::uint64_t feedback_delay_count_ = 0;
  std::uint64_t frame_control_count_ = 0;
  std::uint64_t last_control_count_ = 0;
  LatestDelay plant_delay_;
  LatestDelay edge_control_delay_;
  double executing_origin_ = -1.0;
  std::vector<TimedVec7> displayed_;
  std::vector<std::pair<double, double>> displayed_origin_;
  std::vector<TimedVec7> plant_trace_;
  std::vector<std::pair<double, double>> plant_origin_;
  EpisodeRecord rec_;
};

}  // namespace

EpisodeRecord run_episode(const PipelineConfig& cfg, PoseSource& source, HorizonPolicy& policy,
                          std::uint64_t seed, const EpisodeObserver& observer) {
  cfg.validate();
  Episode episode(cfg, source, policy, seed, observer);
  return episode.run();
}

}  // namespace teleop
