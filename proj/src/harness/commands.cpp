#include "teleop/harness/commands.hpp"

#include <cmath>
#include <fmt/format.h>
#include <fstream>
#include <json.hpp>
#include <numeric>

#include "teleop/core/errors.hpp"

namespace teleop {

namespace {

using nlohmann::json;

constexpr std::uint64_t kEpisodeStream = 1000;
constexpr std::uint64_t kTrainStream = 2000;
constexpr std::uint64_t kInitStream = 3000;
constexpr std::uint64_t kPolicyStream = 7;

void write_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
}

json meta(const ExperimentConfig& cfg) {
  return {{"config_hash", config_hash(cfg)},
          {"code_version", std::string(code_version())},
          {"seed", cfg.seed}};
}

json errors_json(const EpisodeErrors& e) {
  return {{"visual_position", e.visual.position}, {"visual_orientation", e.visual.orientation},
          {"real_position", e.real.position},     {"real_orientation", e.real.orientation},
          {"e_v", e.e_v},                         {"e_r", e.e_r},
          {"combined", e.combined}};
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

Checkpoint make_checkpoint(const ExperimentConfig& cfg, const std::string& stage,
                           const TrainingSnapshot& s) {
  return {stage, s, cfg.trainer, cfg.pipeline.bins, config_hash(cfg), std::string(code_version())};
}

TrainingOptions training_options(const ExperimentConfig& cfg, int episodes, std::uint64_t seed) {
  TrainingOptions o;
  o.max_episodes = episodes;
  o.seed = seed;
  o.bins = cfg.pipeline.bins;
  o.weights = cfg.weights;
  o.convergence_window = cfg.convergence_window;
  o.convergence_epsilon = cfg.convergence_epsilon;
  o.checkpoint_every = cfg.checkpoint_every;
  return o;
}

TrainOutcome finish_training(const ExperimentConfig& cfg, TrainingResult result,
                             const std::string& stage, const std::filesystem::path& out,
                             const std::string& prefix) {
  TrainOutcome o{std::move(result), {}};
  o.checkpoint = make_checkpoint(cfg, stage, o.result.final_state);
  if (!out.empty()) {
    save_checkpoint(out / (prefix + ".json"), o.checkpoint);
    write_file(out / (prefix + "_curve.csv"), report_header(cfg) + training_log_csv(o.result.log));
  }
  return o;
}

void attach_checkpoints(TrainingOptions& o, const ExperimentConfig& cfg, const std::string& stage,
                        const std::filesystem::path& out, const std::string& prefix) {
  if (out.empty() || cfg.checkpoint_every == 0) return;
  const int budget = o.max_episodes;
  o.on_checkpoint = [&cfg, stage, out, prefix, budget](const TrainingSnapshot& s) {
    // The final snapshot is written by finish_training under the plain name.
    if (s.episodes >= budget) return;
    save_checkpoint(out / "checkpoints" / fmt::format("{}_{}.json", prefix, s.episodes),
                    make_checkpoint(cfg, stage, s));
  };
}

}  // namespace

std::string report_header(const ExperimentConfig& cfg) {
  return fmt::format("# config_hash={} code_version={} seed={}\n", config_hash(cfg), code_version(),
                     cfg.seed);
}

std::uint64_t episode_seed(const ExperimentConfig& cfg, std::uint64_t index) {
  return derive_seed(cfg.seed, kEpisodeStream + index);
}

PolicyParams load_agent(const ExperimentConfig& cfg) {
  if (cfg.checkpoint.empty()) throw ConfigError("no checkpoint configured");
  const Checkpoint c = load_checkpoint(cfg.checkpoint);
  check_compatible(c, cfg.pipeline.bins);
  return c.state.params;
}

RunResult run_once(const ExperimentConfig& cfg, ShapeKind shape, const std::filesystem::path& out) {
  std::optional<PolicyParams> params;
  if (cfg.policy == PolicyKind::kAgent) params = load_agent(cfg);
  RunResult r;
  r.task = task_name({shape, std::nullopt, 0.0});
  const std::uint64_t seed = episode_seed(cfg, 0);
  auto policy = make_policy(cfg.policy, cfg.pipeline, params ? &*params : nullptr,
                            derive_seed(seed, kPolicyStream));
  r.record = make_runner(cfg)(r.task, *policy, seed);
  r.errors = episode_errors(r.record, cfg.weights);
  if (!out.empty()) {
    write_file(out / "record.csv", record_to_csv(r.record));
    json j = meta(cfg);
    j["task"] = r.task;
    j["policy"] = std::string(to_string(cfg.policy));
    j["errors"] = errors_json(r.errors);
    j["visual_delay_ms"] = mean_of(r.record.visual_delay_samples_ms);
    j["control_delay_ms"] = mean_of(r.record.control_delay_samples_ms);
    write_file(out / "errors.json", j.dump(2) + "\n");
  }
  return r;
}

TrainOutcome train_stage1(const ExperimentConfig& cfg, const std::filesystem::path& out) {
  const PolicyParams init = PolicyParams::random(cfg.network, derive_seed(cfg.seed, kInitStream));
  return train_stage1(cfg, stage1_tasks(cfg), init, out);
}

TrainOutcome train_stage1(const ExperimentConfig& cfg, const std::vector<std::string>& tasks,
                          const PolicyParams& init, const std::filesystem::path& out,
                          const std::string& prefix) {
  TrainingOptions o = training_options(cfg, cfg.stage1_episodes, derive_seed(cfg.seed, kTrainStream));
  attach_checkpoints(o, cfg, "stage1", out, prefix);
  auto result = run_stage1(init, tasks, make_runner(cfg), cfg.trainer, o);
  return finish_training(cfg, std::move(result), "stage1", out, prefix);
}

TrainOutcome train_stage2(const ExperimentConfig& cfg, const PolicyParams& init,
                          const std::filesystem::path& out, const std::string& prefix) {
  TrainingOptions o =
      training_options(cfg, cfg.stage2_episodes, derive_seed(cfg.seed, kTrainStream + 1));
  attach_checkpoints(o, cfg, "stage2", out, prefix);
  const std::string task = task_name({cfg.held_out, std::nullopt, 0.0});
  auto result = run_stage2(init, task, make_runner(cfg), cfg.trainer, o);
  return finish_training(cfg, std::move(result), "stage2", out, prefix);
}

EvaluationReport evaluate(const ExperimentConfig& cfg, const std::vector<std::string>& tasks,
                          const std::vector<PolicyKind>& policies, const PolicyParams* agent,
                          const std::filesystem::path& out) {
  if (tasks.empty()) throw ConfigError("evaluation needs at least one task");
  const EpisodeRunner runner = make_runner(cfg);
  EvaluationReport r;
  for (PolicyKind kind : policies) {
    const std::string name(to_string(kind));
    std::vector<double> visual, control;
    for (int i = 0; i < cfg.eval_episodes; ++i) {
      const std::string& task = tasks[static_cast<std::size_t>(i) % tasks.size()];
      const std::uint64_t seed = episode_seed(cfg, static_cast<std::uint64_t>(i));
      auto policy = make_policy(kind, cfg.pipeline, agent, derive_seed(seed, kPolicyStream));
      const EpisodeRecord rec = runner(task, *policy, seed);
      const EpisodeErrors e = episode_errors(rec, cfg.weights);
      r.by_task[task][name].push_back(e);
      r.by_policy[name].push_back(e);
      visual.insert(visual.end(), rec.visual_delay_samples_ms.begin(),
                    rec.visual_delay_samples_ms.end());
      control.insert(control.end(), rec.control_delay_samples_ms.begin(),
                     rec.control_delay_samples_ms.end());
    }
    r.visual_delay_ms[name] = mean_of(visual);
    r.control_delay_ms[name] = mean_of(control);
  }
  r.comparison = compare_policies(r.by_policy, 1);
  r.table = task_table(r.by_task);
  if (!out.empty()) {
    const std::string header = report_header(cfg);
    write_file(out / "comparison.csv", header + comparison_to_csv(r.comparison));
    write_file(out / "tasks.csv", header + task_table_to_csv(r.table));
    json c = meta(cfg);
    c["comparison"] = json::parse(comparison_to_json(r.comparison));
    c["visual_delay_ms"] = r.visual_delay_ms;
    c["control_delay_ms"] = r.control_delay_ms;
    write_file(out / "comparison.json", c.dump(2) + "\n");
    json t = meta(cfg);
    t["tasks"] = json::parse(task_table_to_json(r.table));
    write_file(out / "tasks.json", t.dump(2) + "\n");
  }
  return r;
}

double expected_delay_ms(const DelaySpec& spec) {
  switch (spec.kind) {
    case DelaySpec::Kind::kConstant: return spec.mean_ms;
    case DelaySpec::Kind::kNormal: {
      // The channel redraws negative delays and treats a zero mean as no delay.
      if (spec.std_ms == 0.0 || spec.mean_ms == 0.0) return spec.mean_ms;
      const double a = -spec.mean_ms / spec.std_ms;
      const double pdf = std::exp(-0.5 * a * a) / std::sqrt(2.0 * M_PI);
      const double tail = 0.5 * std::erfc(a / std::sqrt(2.0));
      return spec.mean_ms + spec.std_ms * pdf / tail;
    }
    case DelaySpec::Kind::kTrace: {
      double sum = 0.0;
      for (const auto& p : spec.trace) sum += p.delay_ms;
      return spec.trace.empty() ? 0.0 : sum / static_cast<double>(spec.trace.size());
    }
  }
  return 0.0;
}

double visual_budget_ms(const PipelineConfig& p) {
  return expected_delay_ms(p.delays.uplink) + p.processing.edge_service_ms +
         0.5 * 1000.0 / p.input_rate_hz + p.processing.render_ms +
         expected_delay_ms(p.delays.downlink) + p.processing.display_ms;
}

double control_budget_ms(const PipelineConfig& p) {
  return expected_delay_ms(p.delays.uplink) + p.processing.edge_service_ms +
         0.5 * 1000.0 / kSimRateHz + expected_delay_ms(p.delays.edge_to_plant) +
         p.processing.plant_api_ms + 0.5 * 1000.0 / kPlantRateHz;
}

std::string sweep_to_csv(const SweepReport& r) {
  std::string out =
      "delay_mean_ms,delay_std_ms,rmse,rmse_std,convergence_episode,visual_e2e_ms,"
      "control_e2e_ms,visual_budget_ms,control_budget_ms\n";
  for (const auto& row : r.rows) {
    out += fmt::format("{},{},{},{},{},{},{},{},{}\n", row.mean_ms, row.std_ms, row.rmse,
                       row.rmse_std,
                       row.convergence_episode ? std::to_string(*row.convergence_episode) : "",
                       row.visual_e2e_ms, row.control_e2e_ms, row.visual_budget_ms,
                       row.control_budget_ms);
  }
  return out;
}

SweepReport sweep_delays(const ExperimentConfig& cfg, const std::filesystem::path& out) {
  SweepReport report;
  const PolicyParams init = PolicyParams::random(cfg.network, derive_seed(cfg.seed, kInitStream));
  for (std::size_t c = 0; c < cfg.sweep_means_ms.size(); ++c) {
    const double mean = cfg.sweep_means_ms[c];
    SweepRow row;
    row.mean_ms = mean;
    row.std_ms = cfg.delay_std_ms;
    std::vector<std::string> tasks;
    for (auto s : cfg.shapes) tasks.push_back(task_name({s, mean, cfg.delay_std_ms}));
    PolicyParams params;
    if (cfg.sweep_checkpoints.empty()) {
      const std::string prefix = fmt::format("sweep_{}", mean);
      TrainOutcome t = train_stage1(cfg, tasks, init, out.empty() ? out : out / "sweep", prefix);
      std::vector<double> rewards;
      for (const auto& l : t.result.log) rewards.push_back(l.reward);
      row.convergence_episode = detect_convergence(rewards, cfg.convergence_window,
                                                   cfg.convergence_epsilon);
      report.curves.push_back(std::move(t.result.log));
      params = std::move(t.result.params);
    } else {
      const Checkpoint ck = load_checkpoint(cfg.sweep_checkpoints[c]);
      check_compatible(ck, cfg.pipeline.bins);
      params = ck.state.params;
    }
    const EvaluationReport e = evaluate(cfg, tasks, {PolicyKind::kAgent}, &params, {});
    const std::string agent(to_string(PolicyKind::kAgent));
    std::vector<double> combined;
    for (const auto& x : e.by_policy.at(agent)) combined.push_back(x.combined);
    const Summary s = summarize(combined);
    row.rmse = s.mean;
    row.rmse_std = s.std;
    row.visual_e2e_ms = e.visual_delay_ms.at(agent);
    row.control_e2e_ms = e.control_delay_ms.at(agent);
    const PipelineConfig p = task_pipeline(cfg, parse_task(tasks.front()));
    row.visual_budget_ms = visual_budget_ms(p);
    row.control_budget_ms = control_budget_ms(p);
    report.rows.push_back(row);
  }
  if (!out.empty()) {
    write_file(out / "sweep.csv", report_header(cfg) + sweep_to_csv(report));
    json j = meta(cfg);
    json rows = json::array();
    for (const auto& r : report.rows) {
      rows.push_back({{"delay_mean_ms", r.mean_ms},
                      {"delay_std_ms", r.std_ms},
                      {"rmse", r.rmse},
                      {"rmse_std", r.rmse_std},
                      {"convergence_episode", r.convergence_episode
                                                  ? json(*r.convergence_episode)
                                                  : json(nullptr)},
                      {"visual_e2e_ms", r.visual_e2e_ms},
                      {"control_e2e_ms", r.control_e2e_ms},
                      {"visual_budget_ms", r.visual_budget_ms},
                      {"control_budget_ms", r.control_budget_ms}});
    }
    j["rows"] = rows;
    write_file(out / "sweep.json", j.dump(2) + "\n");
  }
  return report;
}

}  // namespace teleop
