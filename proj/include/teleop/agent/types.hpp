#pragma once

#include <Eigen/Core>
#include <random>

#include "teleop/core/pose.hpp"
#include "teleop/core/time.hpp"

namespace teleop {

// Prediction horizons for the control loop (H_r) and the visual loop (H_v),
// in ms.
struct HorizonAction {
  int control_ms = 0;
  int visual_ms = 0;

  bool operator==(const HorizonAction&) const = default;
};

// What the operator side knows at a decision slot.
struct AgentState {
  Vec7 pose = Vec7::Zero();  // min-max normalized, in [-1, 1]
  int control_delay_ms = 0;  // smoothed T_r
  int visual_delay_ms = 0;   // smoothed T_v
};

// Discretization of [0, max_ms] into bins step_ms apart.
struct HorizonBins {
  int max_ms = 1000;
  int step_ms = 100;

  int count() const { return max_ms / step_ms + 1; }
  int to_ms(int bin) const { return bin * step_ms; }
  int nearest_bin(double ms) const;

  // Throws ConfigError unless step_ms divides max_ms.
  void validate() const;
};

constexpr int kStateSize = 9;

// Network input: the normalized pose followed by both delays over max_ms.
Eigen::VectorXd state_features(const AgentState& s, const HorizonBins& bins);

class HorizonPolicy {
 public:
  virtual ~HorizonPolicy() = default;
  virtual HorizonAction decide(const AgentState& state) = 0;
};

// Without prediction: both horizons zero.
class WithoutPrediction : public HorizonPolicy {
 public:
  HorizonAction decide(const AgentState&) override { return {}; }
};

// Horizons drawn uniformly from the integers in [0, max_ms] per head.
class RandomHorizons : public HorizonPolicy {
 public:
  RandomHorizons(int max_ms, std::uint64_t seed) : dist_(0, max_ms), rng_(seed) {}
  HorizonAction decide(const AgentState&) override;

 private:
  std::uniform_int_distribution<int> dist_;
  std::mt19937_64 rng_;
};

// Horizons equal to the measured end-to-end delays, clamped to [0, max_ms].
class DelayMatched : public HorizonPolicy {
 public:
  explicit DelayMatched(int max_ms) : max_ms_(max_ms) {}
  HorizonAction decide(const AgentState& state) override;

 private:
  int max_ms_;
};

// A fixed pair, used for calibration sweeps.
class FixedHorizons : public HorizonPolicy {
 public:
  explicit FixedHorizons(HorizonAction action) : action_(action) {}
  HorizonAction decide(const AgentState&) override { return action_; }

 private:
  HorizonAction action_;
};

enum class BaselineKind { kWP, kRS, kOD };

// Stateless baseline evaluation; RS draws from `rng`.
HorizonAction baseline(BaselineKind kind, const AgentState& state, int max_ms, std::mt19937_64& rng);

}  // namespace teleop
