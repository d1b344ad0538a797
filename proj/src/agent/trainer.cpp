#include "teleop/agent/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <numeric>
#include <sstream>

#include "teleop/core/errors.hpp"

namespace teleop {

NetworkPolicy::NetworkPolicy(const PolicyParams& params, HorizonBins bins, std::uint64_t seed,
                             Mode mode)
    : params_(params), bins_(bins), rng_(seed), mode_(mode) {
  bins_.validate();
  if (params_.shape.bins != bins_.count()) {
    throw ConfigError("policy has " + std::to_string(params_.shape.bins) + " bins, expected " +
                      std::to_string(bins_.count()));
  }
}

HorizonAction NetworkPolicy::decide(const AgentState& state) {
  Transition t;
  t.features = state_features(state, bins_);
  const PolicyOutput out = policy_forward(params_, t.features);
  const SampledAction a = mode_ == Mode::kSample
                              ? sample_action(out.control_probs, out.visual_probs, bins_, rng_)
                              : modal_action(out.control_probs, out.visual_probs, bins_);
  t.control_bin = a.control_bin;
  t.visual_bin = a.visual_bin;
  t.logprob = a.logprob;
  t.value = out.value;
  transitions_.push_back(std::move(t));
  return a.action;
}

namespace {

struct SlotError {
  double pos = 0.0;
  double ori = 0.0;
  int n = 0;
};

// Index of the slot owning `origin`, or -1 when it predates every decision.
int owner(const std::vector<double>& starts, double origin) {
  const auto it = std::upper_bound(starts.begin(), starts.end(), origin);
  return static_cast<int>(it - starts.begin()) - 1;
}

double loop_error(const SlotError& s, double w_pos, double w_ori) {
  return w_pos * std::sqrt(s.pos / s.n) + w_ori * std::sqrt(s.ori / s.n);
}

}  // namespace

std::vector<double> slot_rewards(const EpisodeRecord& rec, const MetricWeights& w) {
  std::vector<double> starts;
  for (const auto& d : rec.decisions) starts.push_back(d.t_ms);
  std::vector<SlotError> vis(starts.size()), real(starts.size());
  for (std::size_t i = 0; i < rec.size(); ++i) {
    const int sv = owner(starts, rec.visual_origin_ms[i]);
    if (sv >= 0) {
      auto& s = vis[sv];
      s.pos += std::pow(rmse_position({rec.reference[i]}, {rec.visual[i]}), 2);
      s.ori += std::pow(rmse_orientation({rec.reference[i]}, {rec.visual[i]}), 2);
      ++s.n;
    }
    const int sr = owner(starts, rec.control_origin_ms[i]);
    if (sr >= 0) {
      auto& s = real[sr];
      s.pos += std::pow(rmse_position({rec.reference[i]}, {rec.real[i]}), 2);
      s.ori += std::pow(rmse_orientation({rec.reference[i]}, {rec.real[i]}), 2);
      ++s.n;
    }
  }
  const EpisodeErrors episode = episode_errors(rec, w);
  std::vector<double> out;
  out.reserve(starts.size());
  for (std::size_t j = 0; j < starts.size(); ++j) {
    const double e_v = vis[j].n > 0 ? loop_error(vis[j], w.w1, w.w2) : episode.e_v;
    const double e_r = real[j].n > 0 ? loop_error(real[j], w.w3, w.w4) : episode.e_r;
    out.push_back(reward(e_v, e_r));
  }
  return out;
}

std::string training_log_csv(const std::vector<TrainingLogRow>& rows) {
  std::string out = "episode,task,mean_reward,reward,e_v,e_r,combined,T_r,T_v\n";
  for (const auto& r : rows) {
    out += fmt::format("{},{},{},{},{},{},{},{},{}\n", r.episode, r.task, r.mean_reward, r.reward,
                       r.e_v, r.e_r, r.combined, r.control_delay_ms, r.visual_delay_ms);
  }
  return out;
}

namespace {

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

class Trainer {
 public:
  Trainer(const EpisodeRunner& runner, const TrainerConfig& cfg, const TrainingOptions& options)
      : runner_(runner), cfg_(cfg), options_(options), rng_(options.seed) {
    cfg_.validate();
    options_.bins.validate();
  }

  TrainingResult run(PolicyParams params, const std::vector<std::string>& tasks) {
    if (tasks.empty()) throw ConfigError("training needs at least one task");
    if (options_.resume) {
      params = options_.resume->params;
      episodes_ = options_.resume->episodes;
      adam_ = options_.resume->adam;
      std::istringstream in(options_.resume->rng_state);
      in >> rng_;
      if (!in) throw ConfigError("unreadable generator state in resume snapshot");
    }
    int next_checkpoint = options_.checkpoint_every > 0
                              ? (episodes_ / options_.checkpoint_every + 1) * options_.checkpoint_every
                              : 0;
    TrainingResult result;
    while (episodes_ < options_.max_episodes) {
      params = iterate(params, pick_tasks(tasks));
      if (options_.on_iteration) options_.on_iteration(params, episodes_);
      if (options_.on_checkpoint && next_checkpoint > 0 && episodes_ >= next_checkpoint) {
        options_.on_checkpoint(snapshot(params));
        while (next_checkpoint <= episodes_) next_checkpoint += options_.checkpoint_every;
      }
      result.converged_at = detect_convergence(rewards_, options_.convergence_window,
                                               options_.convergence_epsilon);
      if (options_.stop_at_convergence && result.converged_at) break;
    }
    result.final_state = snapshot(params);
    if (options_.on_checkpoint) options_.on_checkpoint(result.final_state);
    result.params = std::move(params);
    result.log = std::move(log_);
    return result;
  }

 private:
  TrainingSnapshot snapshot(const PolicyParams& params) const {
    std::ostringstream out;
    out << rng_;
    return {params, episodes_, out.str(), adam_};
  }

  std::vector<std::string> pick_tasks(const std::vector<std::string>& tasks) {
    std::vector<std::string> pool = tasks;
    std::shuffle(pool.begin(), pool.end(), rng_);
    const std::size_t n = static_cast<std::size_t>(cfg_.tasks_per_iteration);
    std::vector<std::string> picked;
    for (std::size_t i = 0; i < n; ++i) picked.push_back(pool[i % pool.size()]);
    return picked;
  }

  std::vector<TrajectoryBatch> collect(const std::string& task, const PolicyParams& params) {
    std::vector<TrajectoryBatch> out;
    for (int k = 0; k < cfg_.trajectories_per_task; ++k) {
      NetworkPolicy policy(params, options_.bins, rng_());
      const EpisodeRecord rec = runner_(task, policy, rng_());
      std::vector<Transition> steps = policy.take_transitions();
      const auto rewards = slot_rewards(rec, options_.weights);
      if (rewards.size() != steps.size()) {
        throw InstrumentationError("decision count does not match recorded transitions");
      }
      for (std::size_t i = 0; i < steps.size(); ++i) steps[i].reward = rewards[i];
      log_episode(task, rec, rewards);
      out.push_back({task, std::move(steps)});
    }
    return out;
  }

  void log_episode(const std::string& task, const EpisodeRecord& rec,
                   const std::vector<double>& rewards) {
    const EpisodeErrors e = episode_errors(rec, options_.weights);
    TrainingLogRow row;
    row.episode = ++episodes_;
    row.task = task;
    row.mean_reward = mean_of(rewards);
    row.reward = reward(e.e_v, e.e_r);
    row.e_v = e.e_v;
    row.e_r = e.e_r;
    row.combined = e.combined;
    row.control_delay_ms = mean_of(rec.control_delay_samples_ms);
    row.visual_delay_ms = mean_of(rec.visual_delay_samples_ms);
    rewards_.push_back(row.reward);
    log_.push_back(row);
    if (options_.on_episode) options_.on_episode(row);
  }

  PolicyParams iterate(const PolicyParams& params, const std::vector<std::string>& tasks) {
    std::vector<AdaptedTask> adapted;
    for (const auto& task : tasks) {
      const auto support = make_samples(collect(task, params), params, cfg_);
      const PolicyParams theta_n = inner_adapt(params, support, cfg_, cfg_.alpha);
      auto query = make_samples(collect(task, theta_n), theta_n, cfg_);
      adapted.push_back({theta_n, std::move(query)});
    }
    PolicyParams next = params;
    if (cfg_.meta_optimizer == TrainerConfig::MetaOptimizer::kAdam) {
      adam_.ascend(next.flat, meta_gradient(adapted, cfg_), cfg_.beta);
    } else {
      next = meta_update(params, adapted, cfg_, cfg_.beta);
    }
    if (!next.finite()) throw NumericalError("meta update produced non-finite parameters");
    return next;
  }

  const EpisodeRunner& runner_;
  TrainerConfig cfg_;
  TrainingOptions options_;
  std::mt19937_64 rng_;
  AdamState adam_;
  int episodes_ = 0;
  std::vector<double> rewards_;
  std::vector<TrainingLogRow> log_;
};

}  // namespace

TrainingResult run_stage1(const PolicyParams& init, const std::vector<std::string>& tasks,
                          const EpisodeRunner& runner, const TrainerConfig& cfg,
                          const TrainingOptions& options) {
  Trainer trainer(runner, cfg, options);
  return trainer.run(init, tasks);
}

TrainingResult run_stage2(const PolicyParams& init, const std::string& task,
                          const EpisodeRunner& runner, const TrainerConfig& cfg,
                          const TrainingOptions& options) {
  TrainerConfig single = cfg;
  single.tasks_per_iteration = 1;
  Trainer trainer(runner, single, options);
  return trainer.run(init, {task});
}

std::optional<std::size_t> episodes_to_asymptote(const std::vector<double>& rewards,
                                                 std::size_t smoothing, std::size_t tail,
                                                 double fraction) {
  if (rewards.size() < tail || tail == 0) return std::nullopt;
  const auto smooth = moving_average(rewards, smoothing);
  const double asymptote =
      std::accumulate(rewards.end() - static_cast<std::ptrdiff_t>(tail), rewards.end(), 0.0) /
      static_cast<double>(tail);
  const double band = fraction * std::abs(asymptote);
  for (std::size_t i = 0; i < smooth.size(); ++i) {
    if (std::abs(smooth[i] - asymptote) <= band) return i + 1;
  }
  return std::nullopt;
}

}  // namespace teleop
