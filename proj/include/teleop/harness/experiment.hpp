#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "teleop/agent/policy.hpp"
#include "teleop/agent/ppo.hpp"
#include "teleop/agent/trainer.hpp"
#include "teleop/harness/pipeline.hpp"
#include "teleop/operator/shape.hpp"

namespace teleop {

enum class ClockMode { kVirtual, kRealtime };
enum class PolicyKind { kWP, kRS, kOD, kAgent };

std::string_view to_string(PolicyKind kind);
// Throws ConfigError for unknown names.
PolicyKind parse_policy_kind(std::string_view name);

std::string_view code_version();

struct ExperimentConfig {
  std::uint64_t seed = 0;
  ClockMode clock = ClockMode::kVirtual;
  PipelineConfig pipeline;               // channel delays used by run and evaluate
  std::vector<ShapeKind> shapes = training_shapes();
  ShapeKind held_out = ShapeKind::kFigureEight;
  std::filesystem::path corpus;          // recorded sessions replacing the scripted operator
  PolicyKind policy = PolicyKind::kWP;
  std::filesystem::path checkpoint;      // required for the agent policy
  TrainerConfig trainer;
  PolicyShape network;
  MetricWeights weights;
  // Stage-1 task delays: every shape at every mean, std delay_std_ms on all
  // four channels.
  std::vector<double> train_delays_ms = {0.0, 50.0, 100.0};
  double delay_std_ms = 10.0;
  int stage1_episodes = 400;
  int stage2_episodes = 150;
  int eval_episodes = 20;
  int checkpoint_every = 100;
  std::size_t convergence_window = 50;
  double convergence_epsilon = 5e-5;
  std::vector<double> sweep_means_ms = {0.0, 50.0, 100.0};
  // Per sweep condition; empty means train in place.
  std::vector<std::filesystem::path> sweep_checkpoints;
  std::filesystem::path out_dir = "out";
  int port = 8080;
  std::filesystem::path static_dir;

  void validate() const;
};

// Parses the YAML form. `base` resolves relative paths. Throws ConfigError
// on unknown keys, a missing seed, invalid values, or referenced files that
// do not exist.
ExperimentConfig parse_experiment(const std::string& yaml, const std::filesystem::path& base = {});
ExperimentConfig load_experiment(const std::filesystem::path& path);

// Canonical YAML of every field, the input of the config hash.
std::string experiment_to_yaml(const ExperimentConfig& cfg);
// 16 hex digits of FNV-1a over the canonical YAML.
std::string config_hash(const ExperimentConfig& cfg);

// A task names a shape and, optionally, one delay law for all channels:
// "circle" uses the configured channels, "circle@50/10" uses N(50, 10^2).
struct TaskSpec {
  ShapeKind shape = ShapeKind::kCircle;
  std::optional<double> delay_mean_ms;
  double delay_std_ms = 0.0;
};

std::string task_name(const TaskSpec& t);
// Throws ConfigError on malformed names.
TaskSpec parse_task(std::string_view name);

// Stage-1 task list: shapes x train delays, in config order.
std::vector<std::string> stage1_tasks(const ExperimentConfig& cfg);

// The pipeline configuration a task runs under.
PipelineConfig task_pipeline(const ExperimentConfig& cfg, const TaskSpec& task);

// Episode runner over scripted operators, or over the recorded corpus when
// one is configured (runs of the task's shape, chosen by seed).
EpisodeRunner make_runner(const ExperimentConfig& cfg);

// Baseline policies; the agent needs `params` and acts on modal bins.
std::unique_ptr<HorizonPolicy> make_policy(PolicyKind kind, const PipelineConfig& pipeline,
                                           const PolicyParams* params, std::uint64_t seed);

}  // namespace teleop
