#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "teleop/agent/policy.hpp"

namespace teleop {

struct TrainerConfig {
  double alpha = 1e-3;  // inner step
  double beta = 1e-2;   // meta step (Adam)
  double gamma = 0.99;
  double lambda = 0.99;
  double clip = 0.2;
  int batch_size = 256;
  int trajectories_per_task = 1;  // K
  int tasks_per_iteration = 4;    // N
  double value_coef = 0.5;
  double entropy_coef = 0.01;
  // Optimizer applying the meta gradient with step length beta.
  enum class MetaOptimizer { kSgd, kAdam };
  MetaOptimizer meta_optimizer = MetaOptimizer::kAdam;

  void validate() const;
};

// One decision slot of an episode.
struct Transition {
  Eigen::VectorXd features;
  int control_bin = 0;
  int visual_bin = 0;
  double logprob = 0.0;
  double value = 0.0;
  double reward = 0.0;
};

struct TrajectoryBatch {
  std::string task;
  std::vector<Transition> steps;
};

// Episode reward -(e_v + e_r).
double reward(double e_v, double e_r);

struct Advantages {
  std::vector<double> advantages;
  std::vector<double> returns;
};

// GAE(gamma, lambda) over one episode. `last_value` bootstraps the step after
// the final one: 0 for a terminal end, V of the final state for a time-limit
// cut. Advantages are not normalized here.
Advantages gae(const std::vector<double>& rewards, const std::vector<double>& values,
               double gamma, double lambda, double last_value = 0.0);

// Zero mean, unit variance; a constant vector becomes all zeros.
std::vector<double> normalize(const std::vector<double>& x);

// A training sample: the transition plus its advantage and return target.
struct PpoSample {
  Eigen::VectorXd features;
  int control_bin = 0;
  int visual_bin = 0;
  double old_logprob_control = 0.0;
  double old_logprob_visual = 0.0;
  double advantage = 0.0;
  double ret = 0.0;
};

// GAE per trajectory (tail bootstrapped with the last value estimate), then
// advantages normalized over the whole set.
// Old log-probabilities are recomputed per head under `behavior`.
std::vector<PpoSample> make_samples(const std::vector<TrajectoryBatch>& batches,
                                    const PolicyParams& behavior, const TrainerConfig& cfg);

struct Surrogate {
  double value = 0.0;  // objective to maximize
  double clipped = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  Eigen::VectorXd gradient;
};

// Mean over samples of the clipped ratio objective, summed over both heads,
// minus c_v (V - return)^2 plus c_e times the summed head entropy.
Surrogate ppo_surrogate(const PolicyParams& params, const std::vector<PpoSample>& samples,
                        const TrainerConfig& cfg);

// theta + alpha * grad(surrogate): one descent step on the negated surrogate.
PolicyParams inner_adapt(const PolicyParams& params, const std::vector<PpoSample>& samples,
                         const TrainerConfig& cfg, double alpha);

// First-order MAML: each task's surrogate gradient is taken at its adapted
// parameters and applied to the shared initialization.
struct AdaptedTask {
  PolicyParams adapted;
  std::vector<PpoSample> samples;  // collected under `adapted`
};

// Sum over tasks of the surrogate gradient at each task's adapted parameters.
Eigen::VectorXd meta_gradient(const std::vector<AdaptedTask>& tasks, const TrainerConfig& cfg);

// Plain SGD form of the meta step: theta + beta * meta_gradient.
PolicyParams meta_update(const PolicyParams& params, const std::vector<AdaptedTask>& tasks,
                         const TrainerConfig& cfg, double beta);

// Adam moments for the meta step; persisted in checkpoints.
struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  long steps = 0;
  Eigen::VectorXd m, v;

  // Ascent step of length lr along the bias-corrected moment ratio.
  void ascend(Eigen::VectorXd& params, const Eigen::VectorXd& gradient, double lr);
};

}  // namespace teleop
