#include "teleop/metrics/rmse.hpp"

#include <algorithm>
#include <cmath>

#include "teleop/core/errors.hpp"

namespace teleop {

namespace {

void check_pair(const std::vector<Vec7>& a, const std::vector<Vec7>& b) {
  if (a.empty()) throw EmptyEpisode("cannot compute RMSE of an empty trajectory");
  if (a.size() != b.size()) throw InstrumentationError("trajectories differ in length");
}

Eigen::Vector4d canonical(const Vec7& v) {
  Eigen::Vector4d q = v.tail<4>();
  return q[3] < 0.0 ? Eigen::Vector4d(-q) : q;
}

}  // namespace

double rmse_position(const std::vector<Vec7>& a, const std::vector<Vec7>& b) {
  check_pair(a, b);
  double sum = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) sum += (a[k].head<3>() - b[k].head<3>()).squaredNorm();
  return std::sqrt(sum / static_cast<double>(a.size()));
}

double rmse_orientation(const std::vector<Vec7>& a, const std::vector<Vec7>& b) {
  check_pair(a, b);
  double sum = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) sum += (canonical(a[k]) - canonical(b[k])).squaredNorm();
  return std::sqrt(sum / static_cast<double>(a.size()));
}

double weighted_rmse_visual(const EpisodeRecord& rec, const MetricWeights& w) {
  return w.w1 * rmse_position(rec.reference, rec.visual) +
         w.w2 * rmse_orientation(rec.reference, rec.visual);
}

double weighted_rmse_control(const EpisodeRecord& rec, const MetricWeights& w) {
  return w.w3 * rmse_position(rec.reference, rec.real) +
         w.w4 * rmse_orientation(rec.reference, rec.real);
}

EpisodeErrors episode_errors(const EpisodeRecord& rec, const MetricWeights& w) {
  EpisodeErrors e;
  e.visual = {rmse_position(rec.reference, rec.visual), rmse_orientation(rec.reference, rec.visual)};
  e.real = {rmse_position(rec.reference, rec.real), rmse_orientation(rec.reference, rec.real)};
  e.e_v = w.w1 * e.visual.position + w.w2 * e.visual.orientation;
  e.e_r = w.w3 * e.real.position + w.w4 * e.real.orientation;
  e.combined = (e.e_v + e.e_r) / 4.0;
  return e;
}

std::optional<std::size_t> detect_convergence(const std::vector<double>& rewards,
                                              std::size_t window, double epsilon) {
  const std::size_t n = rewards.size();
  if (window == 0 || n < 2 * window) return std::nullopt;
  std::vector<double> prefix(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + rewards[i];
  const double w = static_cast<double>(window);
  auto improvement = [&](std::size_t i) {
    return (prefix[i + window] - prefix[i]) / w - (prefix[i] - prefix[i - window]) / w;
  };
  // Evaluable indices are window..n - window. The run must last a full
  // window, or reach the end of the evaluable range.
  const std::size_t last = n - window;
  for (std::size_t i = window; i <= last; ++i) {
    const std::size_t end = std::min(i + window, last + 1);
    bool below = true;
    for (std::size_t j = i; j < end && below; ++j) below = improvement(j) < epsilon;
    if (below) return i;
  }
  return std::nullopt;
}

std::vector<double> moving_average(const std::vector<double>& values, std::size_t window) {
  std::vector<double> out(values.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    sum += values[i];
    if (i >= window) sum -= values[i - window];
    out[i] = sum / static_cast<double>(std::min(i + 1, window));
  }
  return out;
}

}  // namespace teleop
