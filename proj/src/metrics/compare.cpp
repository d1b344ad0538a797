#include "teleop/metrics/compare.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <numeric>

#include "teleop/core/errors.hpp"

namespace teleop {

Summary summarize(const std::vector<double>& values) {
  Summary s;
  if (values.empty()) return s;
  const double n = static_cast<double>(values.size());
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.std = values.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  return s;
}

double improvement_percent(double baseline, double agent) {
  if (agent == 0.0) return baseline == 0.0 ? 0.0 : INFINITY;
  return (baseline - agent) / agent * 100.0;
}

namespace {

template <typename Get>
Summary summarize_by(const std::vector<EpisodeErrors>& errs, Get get) {
  std::vector<double> v;
  v.reserve(errs.size());
  for (const auto& e : errs) v.push_back(get(e));
  return summarize(v);
}

nlohmann::json summary_json(const Summary& s) { return {{"mean", s.mean}, {"std", s.std}}; }

std::string summary_csv(const Summary& s) { return fmt::format("{},{}", s.mean, s.std); }

}  // namespace

PolicyComparison compare_policies(const std::map<std::string, std::vector<EpisodeErrors>>& runs,
                                  std::size_t min_episodes) {
  PolicyComparison out;
  for (const auto& [name, errs] : runs) {
    if (errs.size() < min_episodes) {
      throw ConfigError("policy '" + name + "' has " + std::to_string(errs.size()) +
                        " episodes, need " + std::to_string(min_episodes));
    }
    PolicyStats s;
    s.policy = name;
    s.episodes = errs.size();
    s.visual_position = summarize_by(errs, [](const auto& e) { return e.visual.position; });
    s.visual_orientation = summarize_by(errs, [](const auto& e) { return e.visual.orientation; });
    s.real_position = summarize_by(errs, [](const auto& e) { return e.real.position; });
    s.real_orientation = summarize_by(errs, [](const auto& e) { return e.real.orientation; });
    s.e_v = summarize_by(errs, [](const auto& e) { return e.e_v; });
    s.e_r = summarize_by(errs, [](const auto& e) { return e.e_r; });
    s.combined = summarize_by(errs, [](const auto& e) { return e.combined; });
    out.ranking.push_back(s);
  }
  std::stable_sort(out.ranking.begin(), out.ranking.end(), [](const auto& a, const auto& b) {
    return a.combined.mean < b.combined.mean;
  });
  for (const auto& base : out.ranking) {
    for (const auto& other : out.ranking) {
      if (base.policy == other.policy) continue;
      out.improvement[base.policy][other.policy] =
          improvement_percent(base.combined.mean, other.combined.mean);
    }
  }
  return out;
}

std::vector<TaskCell> task_table(
    const std::map<std::string, std::map<std::string, std::vector<EpisodeErrors>>>& by_task) {
  std::vector<TaskCell> cells;
  for (const auto& [task, policies] : by_task) {
    for (const auto& [policy, errs] : policies) {
      TaskCell c;
      c.task = task;
      c.policy = policy;
      c.visual_position = summarize_by(errs, [](const auto& e) { return e.visual.position; });
      c.visual_orientation = summarize_by(errs, [](const auto& e) { return e.visual.orientation; });
      c.real_position = summarize_by(errs, [](const auto& e) { return e.real.position; });
      c.real_orientation = summarize_by(errs, [](const auto& e) { return e.real.orientation; });
      c.combined = summarize_by(errs, [](const auto& e) { return e.combined; });
      cells.push_back(c);
    }
  }
  return cells;
}

std::string comparison_to_csv(const PolicyComparison& c) {
  std::string out =
      "rank,policy,episodes,combined_mean,combined_std,e_v_mean,e_v_std,e_r_mean,e_r_std,"
      "vis_pos_mean,vis_pos_std,vis_ori_mean,vis_ori_std,real_pos_mean,real_pos_std,"
      "real_ori_mean,real_ori_std\n";
  for (std::size_t i = 0; i < c.ranking.size(); ++i) {
    const auto& s = c.ranking[i];
    out += fmt::format("{},{},{},{},{},{},{},{},{},{}\n", i + 1, s.policy, s.episodes,
                       summary_csv(s.combined), summary_csv(s.e_v), summary_csv(s.e_r),
                       summary_csv(s.visual_position), summary_csv(s.visual_orientation),
                       summary_csv(s.real_position), summary_csv(s.real_orientation));
  }
  out += "baseline,policy,improvement_percent\n";
  for (const auto& [base, row] : c.improvement) {
    for (const auto& [other, pct] : row) out += fmt::format("{},{},{}\n", base, other, pct);
  }
  return out;
}

std::string comparison_to_json(const PolicyComparison& c) {
  nlohmann::json j;
  j["ranking"] = nlohmann::json::array();
  for (const auto& s : c.ranking) {
    j["ranking"].push_back({{"policy", s.policy},
                            {"episodes", s.episodes},
                            {"combined", summary_json(s.combined)},
                            {"e_v", summary_json(s.e_v)},
                            {"e_r", summary_json(s.e_r)},
                            {"visual_position", summary_json(s.visual_position)},
                            {"visual_orientation", summary_json(s.visual_orientation)},
                            {"real_position", summary_json(s.real_position)},
                            {"real_orientation", summary_json(s.real_orientation)}});
  }
  j["improvement_percent"] = c.improvement;
  return j.dump(2);
}

std::string task_table_to_csv(const std::vector<TaskCell>& cells) {
  std::string out =
      "task,policy,vis_pos_mean,vis_pos_std,vis_ori_mean,vis_ori_std,real_pos_mean,real_pos_std,"
      "real_ori_mean,real_ori_std,combined_mean,combined_std\n";
  for (const auto& c : cells) {
    out += fmt::format("{},{},{},{},{},{},{}\n", c.task, c.policy, summary_csv(c.visual_position),
                       summary_csv(c.visual_orientation), summary_csv(c.real_position),
                       summary_csv(c.real_orientation), summary_csv(c.combined));
  }
  return out;
}

std::string task_table_to_json(const std::vector<TaskCell>& cells) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& c : cells) {
    j.push_back({{"task", c.task},
                 {"policy", c.policy},
                 {"virtual", {{"position", summary_json(c.visual_position)},
                              {"orientation", summary_json(c.visual_orientation)}}},
                 {"real", {{"position", summary_json(c.real_position)},
                           {"orientation", summary_json(c.real_orientation)}}},
                 {"combined", summary_json(c.combined)}});
  }
  return j.dump(2);
}

}  // namespace teleop
