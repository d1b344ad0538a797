#pragma once

#include <string>
#include <vector>

#include "teleop/core/pose.hpp"

namespace teleop {

struct TimedVec7 {
  double t_ms;
  Vec7 value;
};

struct DecisionRecord {
  double t_ms;
  int control_horizon_ms;
  int visual_horizon_ms;
};

// Aligned trajectories of one task execution on the operator sampling grid,
// plus the latency bookkeeping that produced them.
struct EpisodeRecord {
  double rate_hz = 120.0;
  std::vector<double> t_ms;
  std::vector<Vec7> reference;  // operator pose in workspace coordinates
  std::vector<Vec7> visual;     // twin pose on the operator's display
  std::vector<Vec7> real;       // plant pose
  // Sampling instant of the operator pose behind the displayed frame and
  // behind the command the plant is executing, per grid sample (-1 if none).
  std::vector<double> visual_origin_ms;
  std::vector<double> control_origin_ms;
  // Smoothed delays available to the operator side at each grid sample.
  std::vector<double> control_delay_ms;
  std::vector<double> visual_delay_ms;
  // Raw end-to-end delay of every completed packet.
  std::vector<double> control_delay_samples_ms;
  std::vector<double> visual_delay_samples_ms;
  std::vector<DecisionRecord> decisions;

  std::size_t size() const { return t_ms.size(); }
  // Throws EmptyEpisode when there are no samples; InstrumentationError when
  // the series disagree in length or the grid has gaps over 3 periods.
  void validate() const;
};

// Linear interpolation of (t, value) samples onto `grid`; values are held
// before the first and after the last sample. The quaternion block is
// renormalized.
std::vector<Vec7> resample(const std::vector<TimedVec7>& samples, const std::vector<double>& grid);

// Deterministic CSV dump of the aligned series and decisions, used for
// byte-level reproducibility checks.
std::string record_to_csv(const EpisodeRecord& rec);

}  // namespace teleop
