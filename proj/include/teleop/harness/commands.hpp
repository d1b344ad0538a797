#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "teleop/agent/checkpoint.hpp"
#include "teleop/harness/experiment.hpp"
#include "teleop/metrics/compare.hpp"

namespace teleop {

// Batch operations over the virtual clock. Each takes an output directory;
// an empty path computes without writing files. Every written report
// carries the config hash and code version.

// Seed of evaluation or training episode `index` under the experiment seed.
std::uint64_t episode_seed(const ExperimentConfig& cfg, std::uint64_t index);

// Parameters named by cfg.checkpoint, checked against the configured bins.
PolicyParams load_agent(const ExperimentConfig& cfg);

struct RunResult {
  std::string task;
  EpisodeRecord record;
  EpisodeErrors errors;
};

// One episode of `shape` under cfg.policy. Writes record.csv and
// errors.json.
RunResult run_once(const ExperimentConfig& cfg, ShapeKind shape, const std::filesystem::path& out);

struct TrainOutcome {
  TrainingResult result;
  Checkpoint checkpoint;  // final state
};

// Stage 1 over stage1_tasks(cfg) from a seeded random initialization.
// Writes checkpoints/stage1_<episodes>.json every checkpoint_every episodes,
// stage1.json and stage1_curve.csv.
TrainOutcome train_stage1(const ExperimentConfig& cfg, const std::filesystem::path& out);
// Same over an explicit task list and initialization.
TrainOutcome train_stage1(const ExperimentConfig& cfg, const std::vector<std::string>& tasks,
                          const PolicyParams& init, const std::filesystem::path& out,
                          const std::string& prefix = "stage1");

// Stage 2 on the held-out shape under the configured channel delays.
TrainOutcome train_stage2(const ExperimentConfig& cfg, const PolicyParams& init,
                          const std::filesystem::path& out, const std::string& prefix = "stage2");

struct EvaluationReport {
  // task -> policy -> per-episode errors
  std::map<std::string, std::map<std::string, std::vector<EpisodeErrors>>> by_task;
  std::map<std::string, std::vector<EpisodeErrors>> by_policy;
  PolicyComparison comparison;
  std::vector<TaskCell> table;
  // Mean end-to-end delay over every completed packet, per policy.
  std::map<std::string, double> visual_delay_ms;
  std::map<std::string, double> control_delay_ms;
};

// cfg.eval_episodes per policy, cycling through `tasks`; episode i runs with
// the same seed for every policy. Writes comparison.{csv,json} and
// tasks.{csv,json}.
EvaluationReport evaluate(const ExperimentConfig& cfg, const std::vector<std::string>& tasks,
                          const std::vector<PolicyKind>& policies, const PolicyParams* agent,
                          const std::filesystem::path& out);

// Mean delay the channel draws: the normal law is truncated at zero by
// redrawing; a trace contributes the mean of its entries.
double expected_delay_ms(const DelaySpec& spec);
// Expected visual-loop delay: uplink + edge service + the age of the newest
// pose at a render tick + render + downlink + display.
double visual_budget_ms(const PipelineConfig& p);
// Expected control-loop delay: uplink + edge service + half a sim period +
// edge-to-plant + plant API + half a plant tick.
double control_budget_ms(const PipelineConfig& p);

struct SweepRow {
  double mean_ms = 0.0;
  double std_ms = 0.0;
  double rmse = 0.0;  // mean combined error of the trained agent
  double rmse_std = 0.0;
  std::optional<std::size_t> convergence_episode;
  double visual_e2e_ms = 0.0;
  double control_e2e_ms = 0.0;
  double visual_budget_ms = 0.0;
  double control_budget_ms = 0.0;
};

struct SweepReport {
  std::vector<SweepRow> rows;
  std::vector<std::vector<TrainingLogRow>> curves;  // per condition, when trained in place
};

// Per delay mean: stage 1 on every shape at N(mean, delay_std^2) (or the
// listed checkpoint), then cfg.eval_episodes modal-agent episodes. Writes
// sweep.{csv,json} and sweep_<mean>_curve.csv.
SweepReport sweep_delays(const ExperimentConfig& cfg, const std::filesystem::path& out);

std::string sweep_to_csv(const SweepReport& r);

// Header line for CSV reports.
std::string report_header(const ExperimentConfig& cfg);

}  // namespace teleop
