#include "teleop/agent/types.hpp"

#include <algorithm>
#include <cmath>

#include "teleop/core/errors.hpp"

namespace teleop {

int HorizonBins::nearest_bin(double ms) const {
  const int bin = static_cast<int>(std::lround(ms / step_ms));
  return std::clamp(bin, 0, count() - 1);
}

void HorizonBins::validate() const {
  if (step_ms <= 0 || max_ms <= 0 || max_ms % step_ms != 0) {
    throw ConfigError("horizon bin width must divide the maximum horizon");
  }
}

Eigen::VectorXd state_features(const AgentState& s, const HorizonBins& bins) {
  Eigen::VectorXd x(kStateSize);
  x.head<7>() = s.pose;
  x[7] = static_cast<double>(s.control_delay_ms) / bins.max_ms;
  x[8] = static_cast<double>(s.visual_delay_ms) / bins.max_ms;
  return x;
}

HorizonAction RandomHorizons::decide(const AgentState&) {
  const int r = dist_(rng_);
  const int v = dist_(rng_);
  return {r, v};
}

HorizonAction DelayMatched::decide(const AgentState& state) {
  return {std::clamp(state.control_delay_ms, 0, max_ms_),
          std::clamp(state.visual_delay_ms, 0, max_ms_)};
}

HorizonAction baseline(BaselineKind kind, const AgentState& state, int max_ms,
                       std::mt19937_64& rng) {
  switch (kind) {
    case BaselineKind::kWP: return {};
    case BaselineKind::kRS: {
      std::uniform_int_distribution<int> d(0, max_ms);
      const int r = d(rng);
      const int v = d(rng);
      return {r, v};
    }
    case BaselineKind::kOD:
      return {std::clamp(state.control_delay_ms, 0, max_ms),
              std::clamp(state.visual_delay_ms, 0, max_ms)};
  }
  return {};
}

}  // namespace teleop
