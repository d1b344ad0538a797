#include <CLI11.hpp>
#include <atomic>
#include <csignal>
#include <cstdlib>
#include <fmt/format.h>
#include <spdlog/spdlog.h>
#include <thread>

#include "teleop/core/errors.hpp"
#include "teleop/harness/commands.hpp"
#include "teleop/harness/experiment.hpp"
#include "teleop/harness/serve.hpp"

using namespace teleop;

namespace {

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> policy;
  std::optional<double> delay_mean;
  std::optional<double> delay_std;
  std::optional<std::string> out;
  std::optional<int> port;
  std::optional<std::string> checkpoint;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "experiment YAML")->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.seed, "experiment seed");
  cmd->add_option("--policy", o.policy, "wp, rs, od or agent");
  cmd->add_option("--delay-mean", o.delay_mean, "mean delay of every channel, ms");
  cmd->add_option("--delay-std", o.delay_std, "delay standard deviation of every channel, ms");
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--checkpoint", o.checkpoint, "policy checkpoint")->check(CLI::ExistingFile);
}

ExperimentConfig resolve(const Overrides& o) {
  ExperimentConfig cfg;
  if (!o.config.empty()) {
    cfg = load_experiment(o.config);
  } else if (!o.seed) {
    throw ConfigError("either --config or --seed is required");
  }
  if (o.seed) cfg.seed = *o.seed;
  if (o.policy) cfg.policy = parse_policy_kind(*o.policy);
  if (o.out) cfg.out_dir = *o.out;
  if (o.port) cfg.port = *o.port;
  if (o.checkpoint) cfg.checkpoint = *o.checkpoint;
  if (o.delay_mean || o.delay_std) {
    const double mean = o.delay_mean.value_or(50.0);
    const double std = o.delay_std.value_or(cfg.delay_std_ms);
    cfg.pipeline.delays = ChannelDelays::all(DelaySpec::normal(mean, std));
  }
  cfg.validate();
  return cfg;
}

std::vector<std::string> configured_tasks(const ExperimentConfig& cfg) {
  std::vector<std::string> tasks;
  for (auto s : cfg.shapes) tasks.push_back(task_name({s, std::nullopt, 0.0}));
  return tasks;
}

void print_errors(const std::string& label, const EpisodeErrors& e) {
  fmt::print("{:<14} e_v {:.6f} m  e_r {:.6f} m  combined {:.6f} m\n", label, e.e_v, e.e_r,
             e.combined);
}

void print_training(const TrainOutcome& t, const std::filesystem::path& out,
                    const std::string& stage) {
  const auto& r = t.result;
  fmt::print("{}: {} episodes, final reward {:.6f}, ", stage, t.checkpoint.state.episodes,
             r.log.empty() ? 0.0 : r.log.back().reward);
  if (r.converged_at) {
    fmt::print("converged at episode {}\n", *r.converged_at);
  } else {
    fmt::print("no convergence detected\n");
  }
  fmt::print("wrote {}\n", (out / (stage + ".json")).string());
}

std::atomic<bool> interrupted{false};

void on_signal(int) { interrupted = true; }

int serve(const ExperimentConfig& cfg) {
  Server server(cfg);
  server.start();
  fmt::print("listening on http://0.0.0.0:{}/ (websocket /session)\n", server.port());
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  while (!interrupted) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  server.stop();
  return 0;
}

void configure_logging() {
  spdlog::set_level(spdlog::level::warn);
  if (const char* level = std::getenv("TELEOP_TWIN_LOG")) {
    const auto parsed = spdlog::level::from_str(level);
    if (parsed == spdlog::level::off && std::string_view(level) != "off") {
      spdlog::warn("unknown TELEOP_TWIN_LOG level '{}'", level);
    } else {
      spdlog::set_level(parsed);
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  configure_logging();
  CLI::App app{"Delay-compensating digital-twin teleoperation simulator"};
  app.require_subcommand(1);

  Overrides run_o, train_o, eval_o, sweep_o, serve_o;
  std::string shape = "circle";
  int stage = 1;

  auto* run = app.add_subcommand("run", "one episode under the configured policy");
  add_common(run, run_o);
  run->add_option("--shape", shape, "operator shape");

  auto* train = app.add_subcommand("train", "meta-train (stage 1) or adapt (stage 2)");
  add_common(train, train_o);
  train->add_option("--stage", stage, "1 or 2")->check(CLI::IsMember({1, 2}));

  auto* eval = app.add_subcommand("evaluate", "policy by shape comparison");
  add_common(eval, eval_o);

  auto* sweep = app.add_subcommand("sweep", "train and evaluate per delay mean");
  add_common(sweep, sweep_o);

  auto* srv = app.add_subcommand("serve", "operator console endpoint");
  add_common(srv, serve_o);
  srv->add_option("--port", serve_o.port, "listen port (0 picks one)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      const ExperimentConfig cfg = resolve(run_o);
      const ShapeKind kind = parse_shape_kind(shape);
      const RunResult r = run_once(cfg, kind, cfg.out_dir);
      print_errors(std::string(to_string(cfg.policy)), r.errors);
      fmt::print("wrote {}\n", (cfg.out_dir / "record.csv").string());
    } else if (*train) {
      const ExperimentConfig cfg = resolve(train_o);
      if (stage == 1) {
        print_training(train_stage1(cfg, cfg.out_dir), cfg.out_dir, "stage1");
      } else {
        if (cfg.checkpoint.empty()) throw ConfigError("stage 2 needs --checkpoint");
        print_training(train_stage2(cfg, load_agent(cfg), cfg.out_dir), cfg.out_dir, "stage2");
      }
    } else if (*eval) {
      const ExperimentConfig cfg = resolve(eval_o);
      std::vector<PolicyKind> policies = {PolicyKind::kWP, PolicyKind::kRS, PolicyKind::kOD};
      std::optional<PolicyParams> agent;
      if (!cfg.checkpoint.empty()) {
        agent = load_agent(cfg);
        policies.push_back(PolicyKind::kAgent);
      }
      const EvaluationReport r =
          evaluate(cfg, configured_tasks(cfg), policies, agent ? &*agent : nullptr, cfg.out_dir);
      for (const auto& [policy, errors] : r.by_policy) {
        double sum = 0.0;
        for (const auto& e : errors) sum += e.combined;
        fmt::print("{:<6} mean combined {:.6f} m over {} episodes, visual E2E {:.1f} ms\n", policy,
                   sum / static_cast<double>(errors.size()), errors.size(),
                   r.visual_delay_ms.at(policy));
      }
      fmt::print("wrote {}\n", (cfg.out_dir / "comparison.csv").string());
    } else if (*sweep) {
      const ExperimentConfig cfg = resolve(sweep_o);
      const SweepReport r = sweep_delays(cfg, cfg.out_dir);
      fmt::print("{}", sweep_to_csv(r));
    } else if (*srv) {
      ExperimentConfig cfg = resolve(serve_o);
      cfg.clock = ClockMode::kRealtime;
      return serve(cfg);
    }
  } catch (const ConfigError& e) {
    fmt::print(stderr, "config error: {}\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  }
  return 0;
}
