#pragma once

#include <map>
#include <string>
#include <vector>

#include "teleop/metrics/rmse.hpp"

namespace teleop {

struct Summary {
  double mean = 0.0;
  double std = 0.0;
};

Summary summarize(const std::vector<double>& values);

struct PolicyStats {
  std::string policy;
  std::size_t episodes = 0;
  Summary visual_position, visual_orientation, real_position, real_orientation;
  Summary e_v, e_r, combined;
};

struct PolicyComparison {
  std::vector<PolicyStats> ranking;  // ascending mean combined error
  // improvement[baseline][agent] = (baseline - agent) / agent * 100 on the
  // mean combined error.
  std::map<std::string, std::map<std::string, double>> improvement;
};

// Throws ConfigError when any policy has fewer than `min_episodes` episodes.
PolicyComparison compare_policies(const std::map<std::string, std::vector<EpisodeErrors>>& runs,
                                  std::size_t min_episodes = 10);

double improvement_percent(double baseline, double agent);

// Per-task table: shape x {position, orientation} x {virtual, real} for every
// policy.
struct TaskCell {
  std::string task;
  std::string policy;
  Summary visual_position, visual_orientation, real_position, real_orientation;
  Summary combined;
};

std::vector<TaskCell> task_table(
    const std::map<std::string, std::map<std::string, std::vector<EpisodeErrors>>>& by_task);

std::string comparison_to_csv(const PolicyComparison& c);
std::string comparison_to_json(const PolicyComparison& c);
std::string task_table_to_csv(const std::vector<TaskCell>& cells);
std::string task_table_to_json(const std::vector<TaskCell>& cells);

}  // namespace teleop
