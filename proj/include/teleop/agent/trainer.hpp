#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "teleop/agent/policy.hpp"
#include "teleop/agent/ppo.hpp"
#include "teleop/metrics/record.hpp"
#include "teleop/metrics/rmse.hpp"

namespace teleop {

// Horizon policy backed by the network. Sampling mode draws from both heads
// and records every decision for training; modal mode takes the most
// probable bins.
class NetworkPolicy : public HorizonPolicy {
 public:
  enum class Mode { kSample, kModal };

  NetworkPolicy(const PolicyParams& params, HorizonBins bins, std::uint64_t seed,
                Mode mode = Mode::kSample);

  HorizonAction decide(const AgentState& state) override;

  const std::vector<Transition>& transitions() const { return transitions_; }
  std::vector<Transition> take_transitions() { return std::move(transitions_); }

 private:
  const PolicyParams& params_;
  HorizonBins bins_;
  std::mt19937_64 rng_;
  Mode mode_;
  std::vector<Transition> transitions_;
};

// Per-decision rewards. Every grid sample's visual error is charged to the
// decision slot that produced the displayed frame, and its control error to
// the slot that produced the command the plant was executing; slot j owns
// origins in [t_j, t_{j+1}). A slot with no charged samples in a loop takes
// that loop's episode error.
std::vector<double> slot_rewards(const EpisodeRecord& rec, const MetricWeights& w = {});

// Runs one episode of `task` with the given policy and seed.
using EpisodeRunner =
    std::function<EpisodeRecord(const std::string& task, HorizonPolicy& policy, std::uint64_t seed)>;

struct TrainingLogRow {
  int episode = 0;
  std::string task;
  double mean_reward = 0.0;  // mean per-decision reward
  double reward = 0.0;       // episode-level -(e_v + e_r)
  double e_v = 0.0;
  double e_r = 0.0;
  double combined = 0.0;
  double control_delay_ms = 0.0;
  double visual_delay_ms = 0.0;
};

std::string training_log_csv(const std::vector<TrainingLogRow>& rows);

// Trainer state at an iteration boundary; enough to resume bit-exactly.
struct TrainingSnapshot {
  PolicyParams params;
  int episodes = 0;
  std::string rng_state;  // std::mt19937_64 text form
  AdamState adam;
};

struct TrainingOptions {
  int max_episodes = 500;
  std::uint64_t seed = 1;
  HorizonBins bins;
  MetricWeights weights;
  // Plateau detection on the episode reward curve.
  std::size_t convergence_window = 50;
  double convergence_epsilon = 1e-3;
  bool stop_at_convergence = false;
  // Called after every episode with its log row.
  std::function<void(const TrainingLogRow&)> on_episode;
  // Called after every meta-iteration with the episodes run so far.
  std::function<void(const PolicyParams&, int episodes)> on_iteration;
  // Called at the first iteration boundary at or past every multiple of
  // `checkpoint_every` episodes, and once at the end.
  int checkpoint_every = 0;
  std::function<void(const TrainingSnapshot&)> on_checkpoint;
  // Resume from a snapshot instead of starting fresh from `seed`.
  std::optional<TrainingSnapshot> resume;
};

struct TrainingResult {
  PolicyParams params;
  std::vector<TrainingLogRow> log;
  std::optional<std::size_t> converged_at;
  TrainingSnapshot final_state;
};

// Stage 1: per meta-iteration, sample N tasks; for each collect
// K episodes under theta, adapt one step, collect K episodes under the
// adapted parameters; then apply the first-order meta step.
TrainingResult run_stage1(const PolicyParams& init, const std::vector<std::string>& tasks,
                          const EpisodeRunner& runner, const TrainerConfig& cfg,
                          const TrainingOptions& options);

// Stage 2: the same update on trajectories generated online by the new task.
TrainingResult run_stage2(const PolicyParams& init, const std::string& task,
                          const EpisodeRunner& runner, const TrainerConfig& cfg,
                          const TrainingOptions& options);

// Episodes until the smoothed reward first comes within `fraction` of the
// asymptote (the mean of the last `tail` episodes), or nullopt if never.
std::optional<std::size_t> episodes_to_asymptote(const std::vector<double>& rewards,
                                                 std::size_t smoothing, std::size_t tail,
                                                 double fraction);

}  // namespace teleop
