#include "teleop/metrics/record.hpp"

#include <fmt/format.h>

#include <algorithm>

#include "teleop/core/errors.hpp"

namespace teleop {

void EpisodeRecord::validate() const {
  const std::size_t n = t_ms.size();
  if (n == 0) throw EmptyEpisode("episode record has no samples");
  for (std::size_t len : {reference.size(), visual.size(), real.size(), visual_origin_ms.size(),
                          control_origin_ms.size(), control_delay_ms.size(),
                          visual_delay_ms.size()}) {
    if (len != n) throw InstrumentationError("episode series lengths differ");
  }
  const double max_gap = 3.0 * 1000.0 / rate_hz + 1e-6;
  for (std::size_t i = 1; i < n; ++i) {
    if (!(t_ms[i] > t_ms[i - 1]) || t_ms[i] - t_ms[i - 1] > max_gap) {
      throw InstrumentationError("episode grid is not increasing without gaps");
    }
  }
}

std::vector<Vec7> resample(const std::vector<TimedVec7>& samples, const std::vector<double>& grid) {
  std::vector<Vec7> out;
  out.reserve(grid.size());
  if (samples.empty()) throw EmptyEpisode("nothing to resample");
  std::size_t j = 0;
  for (double t : grid) {
    while (j + 1 < samples.size() && samples[j + 1].t_ms <= t) ++j;
    Vec7 v;
    if (t <= samples.front().t_ms) {
      v = samples.front().value;
    } else if (j + 1 >= samples.size()) {
      v = samples.back().value;
    } else {
      const auto& a = samples[j];
      const auto& b = samples[j + 1];
      const double u = (t - a.t_ms) / (b.t_ms - a.t_ms);
      v = a.value + u * (b.value - a.value);
      renormalize_quaternion_block(v);
    }
    out.push_back(v);
  }
  return out;
}

std::string record_to_csv(const EpisodeRecord& rec) {
  std::string out =
      "t_ms,ref_lx,ref_ly,ref_lz,ref_qx,ref_qy,ref_qz,ref_qw,"
      "vis_lx,vis_ly,vis_lz,vis_qx,vis_qy,vis_qz,vis_qw,"
      "real_lx,real_ly,real_lz,real_qx,real_qy,real_qz,real_qw,"
      "vis_origin_ms,ctl_origin_ms,t_r_ms,t_v_ms\n";
  auto append_vec = [&out](const Vec7& v) {
    for (int i = 0; i < 7; ++i) out += fmt::format(",{}", v[i]);
  };
  for (std::size_t k = 0; k < rec.size(); ++k) {
    out += fmt::format("{}", rec.t_ms[k]);
    append_vec(rec.reference[k]);
    append_vec(rec.visual[k]);
    append_vec(rec.real[k]);
    out += fmt::format(",{},{},{},{}\n", rec.visual_origin_ms[k], rec.control_origin_ms[k],
                       rec.control_delay_ms[k], rec.visual_delay_ms[k]);
  }
  out += "decision_t_ms,h_r_ms,h_v_ms\n";
  for (const auto& d : rec.decisions) {
    out += fmt::format("{},{},{}\n", d.t_ms, d.control_horizon_ms, d.visual_horizon_ms);
  }
  return out;
}

}  // namespace teleop
