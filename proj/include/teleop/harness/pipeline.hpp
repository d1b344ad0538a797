#pragma once

#include <cstdint>
#include <functional>

#include "teleop/agent/types.hpp"
#include "teleop/control/dynamics.hpp"
#include "teleop/control/pid.hpp"
#include "teleop/control/smoother.hpp"
#include "teleop/core/normalization.hpp"
#include "teleop/core/workspace.hpp"
#include "teleop/metrics/record.hpp"
#include "teleop/metrics/rmse.hpp"
#include "teleop/network/channel.hpp"
#include "teleop/network/latency.hpp"
#include "teleop/operator/source.hpp"
#include "teleop/predictor/forecaster.hpp"

namespace teleop {

struct ChannelDelays {
  DelaySpec uplink = DelaySpec::normal(50, 10);         // operator -> edge
  DelaySpec downlink = DelaySpec::normal(50, 10);       // edge -> operator
  DelaySpec edge_to_plant = DelaySpec::normal(50, 10);
  DelaySpec plant_to_edge = DelaySpec::normal(50, 10);

  static ChannelDelays all(const DelaySpec& spec);
  void validate() const;
};

// Processing times of the stages; transport delay lives in the channels.
struct ProcessingBudget {
  double edge_service_ms = 5.0;   // applying a predicted pose pair at the edge
  double render_ms = 8.0;         // rendering one frame
  double display_ms = 8.0;        // decoding and showing a frame
  double plant_api_ms = 8.0;      // turning a command into low-level control
  double feedback_period_ms = 10.0;

  void validate() const;
};

struct PipelineConfig {
  double input_rate_hz = 120.0;
  double decision_rate_hz = 30.0;
  double warmup_ms = 4000.0;
  double length_ms = 20000.0;
  ChannelDelays delays;
  ProcessingBudget processing;
  ArmaForecaster::Options predictor;
  RmpParams rmp;
  SmootherState smoother;
  PidGains pid;
  double guard_radius_m = 0.05;
  WorkspaceMap map;
  NormalizationBounds bounds = NormalizationBounds::around(kWorkspaceCenter, 0.2);
  HorizonBins bins;
  double latency_alpha = kLatencyEwmaAlpha;

  // Operator samples between two agent decisions.
  int decision_stride() const;
  void validate() const;
};

// Observer for each decision: state seen, action taken, time of the slot.
using DecisionHook = std::function<void(const AgentState&, const HorizonAction&, double t_ms)>;

// A frame reaching the operator's display.
struct DisplayEvent {
  double t_ms = 0.0;
  std::uint64_t frame_id = 0;
  Vec7 reference = Vec7::Zero();  // newest operator pose, workspace coordinates
  Vec7 twin = Vec7::Zero();       // pose shown in the frame
  std::optional<Vec7> plant;      // plant pose carried by the frame
  double visual_delay_ms = 0.0;   // smoothed T_v after this frame
  double control_delay_ms = 0.0;  // smoothed T_r
  HorizonAction action;           // horizons in force
  bool recording = false;         // past the warmup
};

struct EpisodeObserver {
  DecisionHook on_decision;
  std::function<void(const DisplayEvent&)> on_display;
};

// Runs one task: operator -> predictor -> uplink -> edge twin and command
// smoother -> edge/plant channels -> PID plant, with frames returning over
// the downlink, all on the virtual clock. The warmup fills the predictor
// window under zero horizons and is not recorded.
EpisodeRecord run_episode(const PipelineConfig& cfg, PoseSource& source, HorizonPolicy& policy,
                          std::uint64_t seed, const EpisodeObserver& observer = {});

// Seeds for the four channels and other episode randomness, derived from one
// episode seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace teleop
