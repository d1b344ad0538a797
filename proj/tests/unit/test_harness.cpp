#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "teleop/agent/checkpoint.hpp"
#include "teleop/agent/trainer.hpp"
#include "teleop/core/errors.hpp"
#include "teleop/harness/commands.hpp"
#include "teleop/harness/experiment.hpp"
#include "teleop/harness/pipeline.hpp"

using namespace teleop;

namespace {

ExperimentConfig short_config() {
  ExperimentConfig cfg;
  cfg.seed = 5;
  cfg.pipeline.warmup_ms = 2000.0;
  cfg.pipeline.length_ms = 3000.0;
  cfg.network.trunk = 16;
  cfg.network.head = 16;
  return cfg;
}

std::filesystem::path scratch(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("teleop_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("config needs a seed and rejects unknown keys") {
  CHECK_THROWS_AS(parse_experiment("clock: virtual\n"), ConfigError);
  CHECK_THROWS_AS(parse_experiment("seed: 1\ntrainer: {alpah: 0.1}\n"), ConfigError);
  CHECK_THROWS_AS(parse_experiment("seed: 1\nbogus: 2\n"), ConfigError);
  CHECK_THROWS_AS(parse_experiment("seed: 1\npolicy: agent\n"), ConfigError);
  CHECK_THROWS_AS(parse_experiment("seed: 1\ncheckpoint: /nonexistent/ck.json\n"), ConfigError);
  CHECK_THROWS_AS(parse_experiment("seed: 1\nhorizon: {max_ms: 1000, step_ms: 300}\n"), ConfigError);
}

TEST_CASE("config values override the defaults") {
  const ExperimentConfig c = parse_experiment(
      "seed: 9\n"
      "policy: od\n"
      "shapes: [circle, triangle]\n"
      "delays: {mean_ms: 80, std_ms: 5, uplink: {constant_ms: 3}}\n"
      "trainer: {beta: 0.001, meta_optimizer: sgd}\n"
      "training: {delays_ms: [0, 100], stage1_episodes: 40}\n");
  CHECK(c.seed == 9);
  CHECK(c.policy == PolicyKind::kOD);
  CHECK(c.shapes.size() == 2);
  CHECK(c.pipeline.delays.uplink.kind == DelaySpec::Kind::kConstant);
  CHECK(c.pipeline.delays.uplink.mean_ms == 3.0);
  CHECK(c.pipeline.delays.downlink.mean_ms == 80.0);
  CHECK(c.pipeline.delays.downlink.std_ms == 5.0);
  CHECK(c.trainer.beta == 0.001);
  CHECK(c.trainer.meta_optimizer == TrainerConfig::MetaOptimizer::kSgd);
  CHECK(c.stage1_episodes == 40);
  CHECK(stage1_tasks(c) == std::vector<std::string>{"circle@0/10", "triangle@0/10",
                                                     "circle@100/10", "triangle@100/10"});
}

TEST_CASE("canonical config round-trips and the hash follows the content") {
  ExperimentConfig c = short_config();
  const std::string yaml = experiment_to_yaml(c);
  const ExperimentConfig back = parse_experiment(yaml);
  CHECK(experiment_to_yaml(back) == yaml);
  CHECK(config_hash(back) == config_hash(c));
  c.trainer.alpha *= 2.0;
  CHECK(config_hash(c) != config_hash(back));
  CHECK(config_hash(c).size() == 16);
}

TEST_CASE("task names round-trip") {
  const TaskSpec t = parse_task("pentagram@50/10");
  CHECK(t.shape == ShapeKind::kPentagram);
  CHECK(*t.delay_mean_ms == 50.0);
  CHECK(t.delay_std_ms == 10.0);
  CHECK(task_name(t) == "pentagram@50/10");
  CHECK_FALSE(parse_task("circle").delay_mean_ms);
  CHECK_THROWS_AS(parse_task("circle@x"), ConfigError);
  CHECK_THROWS_AS(parse_task("hexagon@5"), ConfigError);
}

TEST_CASE("expected delays and budgets") {
  CHECK(expected_delay_ms(DelaySpec::constant(7.0)) == 7.0);
  CHECK(expected_delay_ms(DelaySpec::normal(0.0, 10.0)) == 0.0);
  CHECK(expected_delay_ms(DelaySpec::normal(50.0, 10.0)) == doctest::Approx(50.0).epsilon(1e-5));
  // Mean of N(5, 10^2) conditioned on being non-negative, by quadrature.
  double mass = 0.0, moment = 0.0;
  for (double x = 0.0; x < 200.0; x += 1e-3) {
    const double pdf = std::exp(-0.5 * std::pow((x + 5e-4 - 5.0) / 10.0, 2));
    mass += pdf;
    moment += (x + 5e-4) * pdf;
  }
  CHECK(expected_delay_ms(DelaySpec::normal(5.0, 10.0)) == doctest::Approx(moment / mass).epsilon(1e-6));
  PipelineConfig p;
  p.delays = ChannelDelays::all(DelaySpec::constant(0.0));
  CHECK(visual_budget_ms(p) == doctest::Approx(5.0 + 1000.0 / 240.0 + 8.0 + 8.0));
}

TEST_CASE("same seed gives byte-identical records") {
  const ExperimentConfig cfg = short_config();
  const EpisodeRunner run = make_runner(cfg);
  auto once = [&](std::uint64_t seed) {
    RandomHorizons rs(1000, 3);
    return record_to_csv(run("square@50/10", rs, seed));
  };
  CHECK(once(11) == once(11));
  CHECK(once(11) != once(12));
}

TEST_CASE("zero-delay pipeline without prediction stays under 2 mm") {
  ExperimentConfig cfg = short_config();
  cfg.pipeline.length_ms = 8000.0;
  const EpisodeRunner run = make_runner(cfg);
  for (auto shape : training_shapes()) {
    WithoutPrediction wp;
    const EpisodeRecord rec = run(task_name({shape, 0.0, 0.0}), wp, 21);
    CHECK(episode_errors(rec).combined < 0.002);
  }
}

TEST_CASE("delay-matched horizons equal zero horizons at zero measured delay") {
  DelayMatched od(1000);
  WithoutPrediction wp;
  AgentState s;
  s.pose = Vec7::Constant(0.3);
  CHECK(od.decide(s) == wp.decide(s));
}

TEST_CASE("slot rewards charge samples to the decision that produced them") {
  EpisodeRecord r;
  r.rate_hz = 100.0;
  for (int k = 0; k < 4; ++k) {
    r.t_ms.push_back(10.0 * k);
    Vec7 v = Vec7::Zero();
    v(6) = 1.0;
    r.reference.push_back(v);
    r.visual.push_back(v);
    r.real.push_back(v);
  }
  r.visual[0](0) = 0.3;  // charged to slot 0
  r.visual[3](0) = 0.4;  // charged to slot 1
  r.real[2](0) = 0.5;    // charged to slot 1
  r.visual_origin_ms = {0.0, 5.0, 20.0, 25.0};
  r.control_origin_ms = {-1.0, 0.0, 20.0, 20.0};
  r.control_delay_ms.assign(4, 0.0);
  r.visual_delay_ms.assign(4, 0.0);
  r.decisions = {{0.0, 0, 0}, {20.0, 0, 0}};
  const auto rw = slot_rewards(r);
  REQUIRE(rw.size() == 2);
  const double v0 = std::sqrt(0.09 / 2.0), v1 = std::sqrt(0.16 / 2.0), r1 = std::sqrt(0.25 / 2.0);
  CHECK(rw[0] == doctest::Approx(-v0));
  CHECK(rw[1] == doctest::Approx(-(v1 + r1)));
}

TEST_CASE("checkpoints round-trip and reject mismatches") {
  Checkpoint c;
  c.stage = "stage1";
  c.state.params = PolicyParams::random(PolicyShape{kStateSize, 8, 8, 11}, 4);
  c.state.episodes = 12;
  c.state.rng_state = "1 2 3";
  c.state.adam.ascend(c.state.params.flat, Eigen::VectorXd::Ones(c.state.params.flat.size()), 0.1);
  c.config_hash = "abc";
  c.code_version = std::string(code_version());
  const std::string text = checkpoint_to_json(c);
  const Checkpoint back = checkpoint_from_json(text);
  CHECK(back.state.params.flat == c.state.params.flat);
  CHECK(back.state.adam.m == c.state.adam.m);
  CHECK(back.state.adam.steps == 1);
  CHECK(checkpoint_to_json(back) == text);
  check_compatible(back, HorizonBins{});
  CHECK_THROWS_AS(check_compatible(back, HorizonBins{1000, 50}), VersionError);
  std::string old = text;
  old.replace(old.find("\"format\": 1"), 11, "\"format\": 0");
  CHECK_THROWS_AS(checkpoint_from_json(old), VersionError);
  CHECK_THROWS_AS(checkpoint_from_json("{"), ParseError);
}

TEST_CASE("training resumed from a snapshot continues bit-exactly") {
  ExperimentConfig cfg = short_config();
  cfg.trainer.tasks_per_iteration = 2;
  const auto tasks = std::vector<std::string>{"circle@50/10", "triangle@0/10"};
  const EpisodeRunner run = make_runner(cfg);
  const PolicyParams init = PolicyParams::random(cfg.network, 1);
  TrainingOptions o;
  o.seed = 3;
  o.max_episodes = 8;
  const TrainingResult straight = run_stage1(init, tasks, run, cfg.trainer, o);
  o.max_episodes = 4;
  const TrainingResult half = run_stage1(init, tasks, run, cfg.trainer, o);
  o.max_episodes = 8;
  o.resume = half.final_state;
  const TrainingResult rest = run_stage1(init, tasks, run, cfg.trainer, o);
  CHECK(rest.params.flat == straight.params.flat);
  REQUIRE(rest.log.size() == 4);
  CHECK(rest.log.back().reward == straight.log.back().reward);
  CHECK(rest.log.front().episode == 5);
}

TEST_CASE("training writes checkpoints and curves, twice identically") {
  ExperimentConfig cfg = short_config();
  cfg.shapes = {ShapeKind::kCircle};
  cfg.train_delays_ms = {50.0};
  cfg.trainer.tasks_per_iteration = 1;
  cfg.stage1_episodes = 4;
  cfg.checkpoint_every = 2;
  const auto a = scratch("train_a"), b = scratch("train_b");
  const TrainOutcome ta = train_stage1(cfg, a);
  train_stage1(cfg, b);
  CHECK(std::filesystem::exists(a / "checkpoints" / "stage1_2.json"));
  CHECK(slurp(a / "stage1_curve.csv") == slurp(b / "stage1_curve.csv"));
  CHECK(slurp(a / "stage1.json") == slurp(b / "stage1.json"));
  CHECK(slurp(a / "stage1_curve.csv").rfind("# config_hash=" + config_hash(cfg), 0) == 0);
  CHECK(load_checkpoint(a / "stage1.json").state.params.flat == ta.result.params.flat);
}

TEST_CASE("evaluation fills the policy by shape grid") {
  ExperimentConfig cfg = short_config();
  cfg.eval_episodes = 4;
  std::vector<std::string> tasks;
  for (auto s : training_shapes()) tasks.push_back(task_name({s, 50.0, 10.0}));
  const PolicyParams agent = PolicyParams::random(cfg.network, 2);
  const auto out = scratch("eval");
  const EvaluationReport r = evaluate(cfg, tasks,
                                      {PolicyKind::kWP, PolicyKind::kRS, PolicyKind::kOD,
                                       PolicyKind::kAgent},
                                      &agent, out);
  CHECK(r.table.size() == 16);
  CHECK(r.comparison.ranking.size() == 4);
  CHECK(std::filesystem::exists(out / "tasks.csv"));
  CHECK(slurp(out / "comparison.json").find(config_hash(cfg)) != std::string::npos);
}
