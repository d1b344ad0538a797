#pragma once

#include <optional>
#include <string>
#include <vector>

#include "teleop/core/pose.hpp"
#include "teleop/metrics/record.hpp"

namespace teleop {

// Magnitudes of the position and orientation weights of both loops; the sign
// of the reward is applied separately.
struct MetricWeights {
  double w1 = 1.0;  // visual position
  double w2 = 1.0;  // visual orientation
  double w3 = 1.0;  // real position
  double w4 = 1.0;  // real orientation
};

// sqrt(mean ||a_k - b_k||^2) over the position block.
double rmse_position(const std::vector<Vec7>& a, const std::vector<Vec7>& b);
// Same over the quaternion block after hemisphere canonicalization.
double rmse_orientation(const std::vector<Vec7>& a, const std::vector<Vec7>& b);

struct LoopError {
  double position = 0.0;
  double orientation = 0.0;
};

struct EpisodeErrors {
  LoopError visual;
  LoopError real;
  double e_v = 0.0;
  double e_r = 0.0;
  // Mean of the four weighted components.
  double combined = 0.0;
};

double weighted_rmse_visual(const EpisodeRecord& rec, const MetricWeights& w = {});
double weighted_rmse_control(const EpisodeRecord& rec, const MetricWeights& w = {});
EpisodeErrors episode_errors(const EpisodeRecord& rec, const MetricWeights& w = {});

// First index i at which the mean of the next `window` values improves on
// the mean of the previous `window` values by less than epsilon, and keeps
// doing so for `window` indices (or up to the last index where both windows
// fit). Requires at least 2 * window values.
std::optional<std::size_t> detect_convergence(const std::vector<double>& rewards,
                                              std::size_t window = 50, double epsilon = 1e-3);

// Trailing moving average with the given window (shorter at the start).
std::vector<double> moving_average(const std::vector<double>& values, std::size_t window);

}  // namespace teleop
