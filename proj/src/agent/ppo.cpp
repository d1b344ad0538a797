#include "teleop/agent/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "teleop/core/errors.hpp"

namespace teleop {

void TrainerConfig::validate() const {
  if (!(alpha >= 0) || !(beta >= 0)) throw ConfigError("step lengths must be non-negative");
  if (!(gamma > 0 && gamma <= 1) || !(lambda >= 0 && lambda <= 1)) {
    throw ConfigError("gamma must be in (0, 1] and lambda in [0, 1]");
  }
  if (!(clip > 0 && clip < 1)) throw ConfigError("clip range must be in (0, 1)");
  if (batch_size <= 0 || trajectories_per_task <= 0 || tasks_per_iteration <= 0) {
    throw ConfigError("batch size, K and N must be positive");
  }
  if (!(value_coef >= 0) || !(entropy_coef >= 0)) throw ConfigError("loss coefficients must be >= 0");
}

double reward(double e_v, double e_r) { return -(e_v + e_r); }

Advantages gae(const std::vector<double>& rewards, const std::vector<double>& values,
               double gamma, double lambda, double last_value) {
  if (rewards.size() != values.size()) throw ConfigError("rewards and values differ in length");
  const std::size_t n = rewards.size();
  Advantages out;
  out.advantages.assign(n, 0.0);
  out.returns.assign(n, 0.0);
  double running = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    const double next_value = i + 1 < n ? values[i + 1] : last_value;
    const double delta = rewards[i] + gamma * next_value - values[i];
    running = delta + gamma * lambda * running;
    out.advantages[i] = running;
    out.returns[i] = running + values[i];
  }
  return out;
}

std::vector<double> normalize(const std::vector<double>& x) {
  if (x.empty()) return {};
  const double n = static_cast<double>(x.size());
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / n);
  std::vector<double> out(x.size(), 0.0);
  if (sd < 1e-12) return out;
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - mean) / sd;
  return out;
}

std::vector<PpoSample> make_samples(const std::vector<TrajectoryBatch>& batches,
                                    const PolicyParams& behavior, const TrainerConfig& cfg) {
  std::vector<PpoSample> samples;
  std::vector<double> advantages;
  for (const auto& batch : batches) {
    std::vector<double> rewards, values;
    for (const auto& s : batch.steps) {
      rewards.push_back(s.reward);
      values.push_back(s.value);
    }
    // Episodes end on a time limit, so the tail is bootstrapped rather than
    // treated as terminal.
    const double tail = values.empty() ? 0.0 : values.back();
    const Advantages a = gae(rewards, values, cfg.gamma, cfg.lambda, tail);
    for (std::size_t i = 0; i < batch.steps.size(); ++i) {
      const Transition& t = batch.steps[i];
      const PolicyOutput out = policy_forward(behavior, t.features);
      PpoSample s;
      s.features = t.features;
      s.control_bin = t.control_bin;
      s.visual_bin = t.visual_bin;
      s.old_logprob_control = std::log(out.control_probs(t.control_bin));
      s.old_logprob_visual = std::log(out.visual_probs(t.visual_bin));
      s.ret = a.returns[i];
      samples.push_back(std::move(s));
      advantages.push_back(a.advantages[i]);
    }
  }
  const auto normalized = normalize(advantages);
  for (std::size_t i = 0; i < samples.size(); ++i) samples[i].advantage = normalized[i];
  return samples;
}

namespace {

struct HeadTerms {
  double clipped = 0.0;
  double entropy = 0.0;
  Eigen::VectorXd d_logits;  // of clipped + c_e * entropy
};

HeadTerms head_terms(const Eigen::VectorXd& probs, int bin, double old_logprob, double advantage,
                     double clip, double entropy_coef) {
  HeadTerms h;
  const double ratio = std::exp(std::log(probs(bin)) - old_logprob);
  const double bounded = std::clamp(ratio, 1.0 - clip, 1.0 + clip);
  h.clipped = std::min(ratio * advantage, bounded * advantage);
  const bool unclipped = advantage >= 0.0 ? ratio <= 1.0 + clip : ratio >= 1.0 - clip;
  const double d_ratio = unclipped ? advantage : 0.0;
  Eigen::VectorXd onehot = Eigen::VectorXd::Zero(probs.size());
  onehot(bin) = 1.0;
  const Eigen::VectorXd logp = probs.array().log();
  h.entropy = -(probs.array() * logp.array()).sum();
  h.d_logits = d_ratio * ratio * (onehot - probs);
  h.d_logits.array() -= entropy_coef * probs.array() * (logp.array() + h.entropy);
  return h;
}

}  // namespace

Surrogate ppo_surrogate(const PolicyParams& params, const std::vector<PpoSample>& samples,
                        const TrainerConfig& cfg) {
  Surrogate s;
  s.gradient = Eigen::VectorXd::Zero(params.flat.size());
  if (samples.empty()) return s;
  const double n = static_cast<double>(samples.size());
  for (const auto& x : samples) {
    const PolicyOutput out = policy_forward(params, x.features);
    const HeadTerms r = head_terms(out.control_probs, x.control_bin, x.old_logprob_control,
                                   x.advantage, cfg.clip, cfg.entropy_coef);
    const HeadTerms v = head_terms(out.visual_probs, x.visual_bin, x.old_logprob_visual,
                                   x.advantage, cfg.clip, cfg.entropy_coef);
    const double err = out.value - x.ret;
    s.clipped += (r.clipped + v.clipped) / n;
    s.entropy += (r.entropy + v.entropy) / n;
    s.value_loss += err * err / n;
    s.gradient += policy_backward(params, out, r.d_logits / n, v.d_logits / n,
                                  -2.0 * cfg.value_coef * err / n);
  }
  s.value = s.clipped - cfg.value_coef * s.value_loss + cfg.entropy_coef * s.entropy;
  return s;
}

PolicyParams inner_adapt(const PolicyParams& params, const std::vector<PpoSample>& samples,
                         const TrainerConfig& cfg, double alpha) {
  PolicyParams out = params;
  if (alpha == 0.0) return out;
  out.flat += alpha * ppo_surrogate(params, samples, cfg).gradient;
  return out;
}

Eigen::VectorXd meta_gradient(const std::vector<AdaptedTask>& tasks, const TrainerConfig& cfg) {
  if (tasks.empty()) return {};
  Eigen::VectorXd total = Eigen::VectorXd::Zero(tasks.front().adapted.flat.size());
  for (const auto& task : tasks) total += ppo_surrogate(task.adapted, task.samples, cfg).gradient;
  return total;
}

PolicyParams meta_update(const PolicyParams& params, const std::vector<AdaptedTask>& tasks,
                         const TrainerConfig& cfg, double beta) {
  PolicyParams out = params;
  if (beta == 0.0 || tasks.empty()) return out;
  out.flat += beta * meta_gradient(tasks, cfg);
  return out;
}

void AdamState::ascend(Eigen::VectorXd& params, const Eigen::VectorXd& gradient, double lr) {
  if (m.size() != params.size()) {
    m = Eigen::VectorXd::Zero(params.size());
    v = Eigen::VectorXd::Zero(params.size());
    steps = 0;
  }
  ++steps;
  m = beta1 * m + (1.0 - beta1) * gradient;
  v = beta2 * v + (1.0 - beta2) * gradient.cwiseProduct(gradient);
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(steps));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(steps));
  params.array() += lr * (m.array() / c1) / ((v.array() / c2).sqrt() + epsilon);
}

}  // namespace teleop
