#include "teleop/harness/experiment.hpp"

#include <charconv>
#include <fmt/format.h>
#include <fstream>
#include <set>
#include <sstream>
#include <yaml-cpp/yaml.h>

#include "teleop/agent/trainer.hpp"
#include "teleop/core/errors.hpp"
#include "teleop/operator/session.hpp"
#include "teleop/operator/source.hpp"

#ifndef TELEOP_VERSION
#define TELEOP_VERSION "unknown"
#endif

namespace teleop {

std::string_view to_string(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::kWP: return "wp";
    case PolicyKind::kRS: return "rs";
    case PolicyKind::kOD: return "od";
    case PolicyKind::kAgent: return "agent";
  }
  return "?";
}

PolicyKind parse_policy_kind(std::string_view name) {
  for (auto k : {PolicyKind::kWP, PolicyKind::kRS, PolicyKind::kOD, PolicyKind::kAgent}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown policy '" + std::string(name) + "' (wp, rs, od, agent)");
}

std::string_view code_version() { return TELEOP_VERSION; }

void ExperimentConfig::validate() const {
  pipeline.validate();
  trainer.validate();
  if (shapes.empty()) throw ConfigError("shapes must not be empty");
  if (train_delays_ms.empty()) throw ConfigError("training delays must not be empty");
  for (double d : train_delays_ms) {
    if (d < 0.0) throw ConfigError("training delays must be non-negative");
  }
  for (double d : sweep_means_ms) {
    if (d < 0.0) throw ConfigError("sweep means must be non-negative");
  }
  if (delay_std_ms < 0.0) throw ConfigError("delay_std_ms must be non-negative");
  if (stage1_episodes < 1 || stage2_episodes < 1 || eval_episodes < 1) {
    throw ConfigError("episode counts must be positive");
  }
  if (checkpoint_every < 0) throw ConfigError("checkpoint_every must be non-negative");
  if (convergence_window < 1) throw ConfigError("convergence window must be positive");
  if (!sweep_checkpoints.empty() && sweep_checkpoints.size() != sweep_means_ms.size()) {
    throw ConfigError("sweep needs one checkpoint per delay mean");
  }
  if (port < 0 || port > 65535) throw ConfigError("port out of range");
  if (network.inputs != kStateSize || network.bins != pipeline.bins.count()) {
    throw ConfigError("network shape does not match the state size and horizon bins");
  }
  if (network.trunk < 1 || network.head < 1) throw ConfigError("network layers must be non-empty");
  if (policy == PolicyKind::kAgent && checkpoint.empty()) {
    throw ConfigError("the agent policy needs a checkpoint");
  }
}

namespace {

// A mapping whose keys must all be consumed; leftovers are typos.
class Section {
 public:
  Section(YAML::Node node, std::string path) : node_(std::move(node)), path_(std::move(path)) {
    if (node_ && !node_.IsNull() && !node_.IsMap()) throw ConfigError(path_ + " must be a mapping");
  }

  bool has(const std::string& key) {
    if (!node_ || !node_.IsMap() || !node_[key]) return false;
    used_.insert(key);
    return true;
  }

  YAML::Node at(const std::string& key) {
    used_.insert(key);
    return node_[key];
  }

  template <class T>
  void read(const std::string& key, T& out) {
    if (!has(key)) return;
    try {
      out = node_[key].as<T>();
    } catch (const YAML::Exception&) {
      throw ConfigError("bad value for " + name(key));
    }
  }

  Section child(const std::string& key) {
    return Section(has(key) ? node_[key] : YAML::Node(), name(key));
  }

  std::string name(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  void finish() const {
    if (!node_ || !node_.IsMap()) return;
    for (const auto& kv : node_) {
      const auto key = kv.first.as<std::string>();
      if (!used_.count(key)) throw ConfigError("unknown key " + name(key));
    }
  }

 private:
  YAML::Node node_;
  std::string path_;
  std::set<std::string> used_;
};

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

void require_exists(const std::filesystem::path& p, const std::string& what) {
  if (!std::filesystem::exists(p)) throw ConfigError(what + " not found: " + p.string());
}

DelaySpec read_delay(Section s, const DelaySpec& fallback, const std::filesystem::path& base) {
  DelaySpec spec = fallback;
  if (s.has("constant_ms")) {
    spec = DelaySpec::constant(s.at("constant_ms").as<double>());
  } else if (s.has("trace")) {
    const YAML::Node t = s.at("trace");
    if (t.IsScalar()) {
      const auto path = resolve(base, t.as<std::string>());
      require_exists(path, "delay trace");
      spec = DelaySpec::from_trace(load_delay_trace(path));
    } else {
      std::vector<DelayTracePoint> points;
      for (const auto& row : t) {
        points.push_back({row[0].as<double>(), row[1].as<double>()});
      }
      spec = DelaySpec::from_trace(std::move(points));
    }
  } else {
    double mean = fallback.kind == DelaySpec::Kind::kNormal ? fallback.mean_ms : 50.0;
    double std = fallback.kind == DelaySpec::Kind::kNormal ? fallback.std_ms : 10.0;
    const bool any = s.has("mean_ms") || s.has("std_ms");
    s.read("mean_ms", mean);
    s.read("std_ms", std);
    if (any) spec = DelaySpec::normal(mean, std);
  }
  s.finish();
  spec.validate();
  return spec;
}

Eigen::Vector3d read_vec3(const YAML::Node& n, const std::string& what) {
  if (!n.IsSequence() || n.size() != 3) throw ConfigError(what + " must be a list of 3 numbers");
  return {n[0].as<double>(), n[1].as<double>(), n[2].as<double>()};
}

std::vector<double> read_list(Section& s, const std::string& key, std::vector<double> fallback) {
  if (!s.has(key)) return fallback;
  try {
    return s.at(key).as<std::vector<double>>();
  } catch (const YAML::Exception&) {
    throw ConfigError("bad list for " + s.name(key));
  }
}

void read_pipeline(Section& root, PipelineConfig& p, const std::filesystem::path& base) {
  {
    Section s = root.child("pipeline");
    s.read("input_rate_hz", p.input_rate_hz);
    s.read("decision_rate_hz", p.decision_rate_hz);
    s.read("warmup_ms", p.warmup_ms);
    s.read("length_ms", p.length_ms);
    s.read("guard_radius_m", p.guard_radius_m);
    s.read("latency_alpha", p.latency_alpha);
    s.finish();
  }
  {
    Section s = root.child("delays");
    DelaySpec all = p.delays.uplink;
    if (s.has("mean_ms") || s.has("std_ms")) {
      double mean = 50.0, std = 10.0;
      s.read("mean_ms", mean);
      s.read("std_ms", std);
      all = DelaySpec::normal(mean, std);
    }
    if (s.has("constant_ms")) all = DelaySpec::constant(s.at("constant_ms").as<double>());
    p.delays.uplink = read_delay(s.child("uplink"), all, base);
    p.delays.downlink = read_delay(s.child("downlink"), all, base);
    p.delays.edge_to_plant = read_delay(s.child("edge_to_plant"), all, base);
    p.delays.plant_to_edge = read_delay(s.child("plant_to_edge"), all, base);
    s.finish();
  }
  {
    Section s = root.child("processing");
    s.read("edge_service_ms", p.processing.edge_service_ms);
    s.read("render_ms", p.processing.render_ms);
    s.read("display_ms", p.processing.display_ms);
    s.read("plant_api_ms", p.processing.plant_api_ms);
    s.read("feedback_period_ms", p.processing.feedback_period_ms);
    s.finish();
  }
  {
    Section s = root.child("predictor");
    s.read("p", p.predictor.orders.p);
    s.read("q", p.predictor.orders.q);
    double window = to_ms(p.predictor.window), refit = to_ms(p.predictor.refit_every);
    s.read("window_ms", window);
    s.read("refit_every_ms", refit);
    p.predictor.window = from_ms(window);
    p.predictor.refit_every = from_ms(refit);
    s.finish();
  }
  {
    Section s = root.child("control");
    Section rmp = s.child("rmp");
    rmp.read("k_p", p.rmp.k_p);
    rmp.read("k_d", p.rmp.k_d);
    rmp.read("cap", p.rmp.cap);
    rmp.finish();
    Section pid = s.child("pid");
    pid.read("k_p", p.pid.k_p);
    pid.read("k_i", p.pid.k_i);
    pid.read("k_d", p.pid.k_d);
    pid.read("integral_limit", p.pid.integral_limit);
    pid.finish();
    Section sm = s.child("smoother");
    sm.read("alpha0", p.smoother.alpha0);
    p.smoother.alpha = p.smoother.alpha0;
    sm.finish();
    s.finish();
  }
  {
    Section s = root.child("workspace");
    if (s.has("scale")) p.map.scale = read_vec3(s.at("scale"), "workspace.scale");
    if (s.has("translation")) {
      p.map.translation = read_vec3(s.at("translation"), "workspace.translation");
    }
    s.finish();
  }
  {
    Section s = root.child("horizon");
    s.read("max_ms", p.bins.max_ms);
    s.read("step_ms", p.bins.step_ms);
    s.finish();
  }
}

}  // namespace

ExperimentConfig parse_experiment(const std::string& yaml, const std::filesystem::path& base) {
  YAML::Node doc;
  try {
    doc = YAML::Load(yaml);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  ExperimentConfig cfg;
  Section root(doc, "");
  if (!root.has("seed")) throw ConfigError("config must set seed");
  root.read("seed", cfg.seed);
  if (root.has("clock")) {
    const auto clock = root.at("clock").as<std::string>();
    if (clock == "virtual") {
      cfg.clock = ClockMode::kVirtual;
    } else if (clock == "realtime") {
      cfg.clock = ClockMode::kRealtime;
    } else {
      throw ConfigError("clock must be virtual or realtime");
    }
  }
  if (root.has("policy")) cfg.policy = parse_policy_kind(root.at("policy").as<std::string>());
  if (root.has("checkpoint")) {
    cfg.checkpoint = resolve(base, root.at("checkpoint").as<std::string>());
    require_exists(cfg.checkpoint, "checkpoint");
  }
  if (root.has("corpus")) {
    cfg.corpus = resolve(base, root.at("corpus").as<std::string>());
    require_exists(cfg.corpus, "corpus");
  }
  if (root.has("shapes")) {
    cfg.shapes.clear();
    for (const auto& n : root.at("shapes")) cfg.shapes.push_back(parse_shape_kind(n.as<std::string>()));
  }
  if (root.has("held_out")) cfg.held_out = parse_shape_kind(root.at("held_out").as<std::string>());
  if (root.has("out_dir")) cfg.out_dir = resolve(base, root.at("out_dir").as<std::string>());
  read_pipeline(root, cfg.pipeline, base);
  {
    Section s = root.child("network");
    s.read("trunk", cfg.network.trunk);
    s.read("head", cfg.network.head);
    s.finish();
    cfg.network.bins = cfg.pipeline.bins.count();
  }
  {
    Section s = root.child("trainer");
    auto& t = cfg.trainer;
    s.read("alpha", t.alpha);
    s.read("beta", t.beta);
    s.read("gamma", t.gamma);
    s.read("lambda", t.lambda);
    s.read("clip", t.clip);
    s.read("batch_size", t.batch_size);
    s.read("trajectories_per_task", t.trajectories_per_task);
    s.read("tasks_per_iteration", t.tasks_per_iteration);
    s.read("value_coef", t.value_coef);
    s.read("entropy_coef", t.entropy_coef);
    if (s.has("meta_optimizer")) {
      const auto m = s.at("meta_optimizer").as<std::string>();
      if (m == "adam") {
        t.meta_optimizer = TrainerConfig::MetaOptimizer::kAdam;
      } else if (m == "sgd") {
        t.meta_optimizer = TrainerConfig::MetaOptimizer::kSgd;
      } else {
        throw ConfigError("trainer.meta_optimizer must be adam or sgd");
      }
    }
    s.finish();
  }
  {
    Section s = root.child("weights");
    s.read("w1", cfg.weights.w1);
    s.read("w2", cfg.weights.w2);
    s.read("w3", cfg.weights.w3);
    s.read("w4", cfg.weights.w4);
    s.finish();
  }
  {
    Section s = root.child("training");
    cfg.train_delays_ms = read_list(s, "delays_ms", cfg.train_delays_ms);
    s.read("delay_std_ms", cfg.delay_std_ms);
    s.read("stage1_episodes", cfg.stage1_episodes);
    s.read("stage2_episodes", cfg.stage2_episodes);
    s.read("checkpoint_every", cfg.checkpoint_every);
    s.read("convergence_window", cfg.convergence_window);
    s.read("convergence_epsilon", cfg.convergence_epsilon);
    s.finish();
  }
  {
    Section s = root.child("evaluation");
    s.read("episodes", cfg.eval_episodes);
    s.finish();
  }
  {
    Section s = root.child("sweep");
    cfg.sweep_means_ms = read_list(s, "means_ms", cfg.sweep_means_ms);
    if (s.has("checkpoints")) {
      for (const auto& n : s.at("checkpoints")) {
        cfg.sweep_checkpoints.push_back(resolve(base, n.as<std::string>()));
        require_exists(cfg.sweep_checkpoints.back(), "sweep checkpoint");
      }
    }
    s.finish();
  }
  {
    Section s = root.child("serve");
    s.read("port", cfg.port);
    if (s.has("static_dir")) {
      cfg.static_dir = resolve(base, s.at("static_dir").as<std::string>());
      require_exists(cfg.static_dir, "static directory");
    }
    s.finish();
  }
  root.finish();
  cfg.validate();
  return cfg;
}

ExperimentConfig load_experiment(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_experiment(text.str(), path.parent_path());
}

namespace {

std::string delay_yaml(const DelaySpec& d) {
  switch (d.kind) {
    case DelaySpec::Kind::kConstant: return fmt::format("{{constant_ms: {}}}", d.mean_ms);
    case DelaySpec::Kind::kNormal: return fmt::format("{{mean_ms: {}, std_ms: {}}}", d.mean_ms, d.std_ms);
    case DelaySpec::Kind::kTrace: {
      std::string rows;
      for (const auto& p : d.trace) {
        rows += fmt::format("{}[{}, {}]", rows.empty() ? "" : ", ", p.send_ms, p.delay_ms);
      }
      return "{trace: [" + rows + "]}";
    }
  }
  return "{}";
}

std::string list_yaml(const std::vector<double>& v) {
  return fmt::format("[{}]", fmt::join(v, ", "));
}

}  // namespace

std::string experiment_to_yaml(const ExperimentConfig& c) {
  const auto& p = c.pipeline;
  const auto& t = c.trainer;
  std::string out;
  auto line = [&out](const std::string& s) { out += s + "\n"; };
  line(fmt::format("seed: {}", c.seed));
  line(fmt::format("clock: {}", c.clock == ClockMode::kVirtual ? "virtual" : "realtime"));
  line(fmt::format("policy: {}", to_string(c.policy)));
  if (!c.checkpoint.empty()) line(fmt::format("checkpoint: {}", c.checkpoint.string()));
  if (!c.corpus.empty()) line(fmt::format("corpus: {}", c.corpus.string()));
  std::vector<std::string> shapes;
  for (auto s : c.shapes) shapes.emplace_back(to_string(s));
  line(fmt::format("shapes: [{}]", fmt::join(shapes, ", ")));
  line(fmt::format("held_out: {}", to_string(c.held_out)));
  line(fmt::format("out_dir: {}", c.out_dir.string()));
  line("pipeline:");
  line(fmt::format("  input_rate_hz: {}", p.input_rate_hz));
  line(fmt::format("  decision_rate_hz: {}", p.decision_rate_hz));
  line(fmt::format("  warmup_ms: {}", p.warmup_ms));
  line(fmt::format("  length_ms: {}", p.length_ms));
  line(fmt::format("  guard_radius_m: {}", p.guard_radius_m));
  line(fmt::format("  latency_alpha: {}", p.latency_alpha));
  line("delays:");
  line("  uplink: " + delay_yaml(p.delays.uplink));
  line("  downlink: " + delay_yaml(p.delays.downlink));
  line("  edge_to_plant: " + delay_yaml(p.delays.edge_to_plant));
  line("  plant_to_edge: " + delay_yaml(p.delays.plant_to_edge));
  line("processing:");
  line(fmt::format("  edge_service_ms: {}", p.processing.edge_service_ms));
  line(fmt::format("  render_ms: {}", p.processing.render_ms));
  line(fmt::format("  display_ms: {}", p.processing.display_ms));
  line(fmt::format("  plant_api_ms: {}", p.processing.plant_api_ms));
  line(fmt::format("  feedback_period_ms: {}", p.processing.feedback_period_ms));
  line("predictor:");
  line(fmt::format("  p: {}", p.predictor.orders.p));
  line(fmt::format("  q: {}", p.predictor.orders.q));
  line(fmt::format("  window_ms: {}", to_ms(p.predictor.window)));
  line(fmt::format("  refit_every_ms: {}", to_ms(p.predictor.refit_every)));
  line("control:");
  line(fmt::format("  rmp: {{k_p: {}, k_d: {}, cap: {}}}", p.rmp.k_p, p.rmp.k_d, p.rmp.cap));
  line(fmt::format("  pid: {{k_p: {}, k_i: {}, k_d: {}, integral_limit: {}}}", p.pid.k_p, p.pid.k_i,
                   p.pid.k_d, p.pid.integral_limit));
  line(fmt::format("  smoother: {{alpha0: {}}}", p.smoother.alpha0));
  line("workspace:");
  line(fmt::format("  scale: [{}, {}, {}]", p.map.scale.x(), p.map.scale.y(), p.map.scale.z()));
  line(fmt::format("  translation: [{}, {}, {}]", p.map.translation.x(), p.map.translation.y(),
                   p.map.translation.z()));
  line(fmt::format("horizon: {{max_ms: {}, step_ms: {}}}", p.bins.max_ms, p.bins.step_ms));
  line(fmt::format("network: {{trunk: {}, head: {}}}", c.network.trunk, c.network.head));
  line("trainer:");
  line(fmt::format("  alpha: {}", t.alpha));
  line(fmt::format("  beta: {}", t.beta));
  line(fmt::format("  gamma: {}", t.gamma));
  line(fmt::format("  lambda: {}", t.lambda));
  line(fmt::format("  clip: {}", t.clip));
  line(fmt::format("  batch_size: {}", t.batch_size));
  line(fmt::format("  trajectories_per_task: {}", t.trajectories_per_task));
  line(fmt::format("  tasks_per_iteration: {}", t.tasks_per_iteration));
  line(fmt::format("  value_coef: {}", t.value_coef));
  line(fmt::format("  entropy_coef: {}", t.entropy_coef));
  line(fmt::format("  meta_optimizer: {}",
                   t.meta_optimizer == TrainerConfig::MetaOptimizer::kAdam ? "adam" : "sgd"));
  line(fmt::format("weights: {{w1: {}, w2: {}, w3: {}, w4: {}}}", c.weights.w1, c.weights.w2,
                   c.weights.w3, c.weights.w4));
  line("training:");
  line("  delays_ms: " + list_yaml(c.train_delays_ms));
  line(fmt::format("  delay_std_ms: {}", c.delay_std_ms));
  line(fmt::format("  stage1_episodes: {}", c.stage1_episodes));
  line(fmt::format("  stage2_episodes: {}", c.stage2_episodes));
  line(fmt::format("  checkpoint_every: {}", c.checkpoint_every));
  line(fmt::format("  convergence_window: {}", c.convergence_window));
  line(fmt::format("  convergence_epsilon: {}", c.convergence_epsilon));
  line(fmt::format("evaluation: {{episodes: {}}}", c.eval_episodes));
  line("sweep:");
  line("  means_ms: " + list_yaml(c.sweep_means_ms));
  if (!c.sweep_checkpoints.empty()) {
    line("  checkpoints:");
    for (const auto& p : c.sweep_checkpoints) line("    - " + p.string());
  }
  line(fmt::format("serve: {{port: {}{}}}", c.port,
                   c.static_dir.empty() ? "" : ", static_dir: " + c.static_dir.string()));
  return out;
}

std::string config_hash(const ExperimentConfig& cfg) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : experiment_to_yaml(cfg)) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return fmt::format("{:016x}", h);
}

std::string task_name(const TaskSpec& t) {
  std::string name(to_string(t.shape));
  if (t.delay_mean_ms) name += fmt::format("@{}/{}", *t.delay_mean_ms, t.delay_std_ms);
  return name;
}

namespace {

double parse_number(std::string_view s, std::string_view whole) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || v < 0.0) {
    throw ConfigError("bad task name '" + std::string(whole) + "'");
  }
  return v;
}

}  // namespace

TaskSpec parse_task(std::string_view name) {
  TaskSpec t;
  const auto at = name.find('@');
  t.shape = parse_shape_kind(name.substr(0, at));
  if (at == std::string_view::npos) return t;
  const auto rest = name.substr(at + 1);
  const auto slash = rest.find('/');
  t.delay_mean_ms = parse_number(rest.substr(0, slash), name);
  if (slash != std::string_view::npos) t.delay_std_ms = parse_number(rest.substr(slash + 1), name);
  return t;
}

std::vector<std::string> stage1_tasks(const ExperimentConfig& cfg) {
  std::vector<std::string> out;
  for (double d : cfg.train_delays_ms) {
    for (auto s : cfg.shapes) out.push_back(task_name({s, d, cfg.delay_std_ms}));
  }
  return out;
}

PipelineConfig task_pipeline(const ExperimentConfig& cfg, const TaskSpec& task) {
  PipelineConfig p = cfg.pipeline;
  if (task.delay_mean_ms) {
    p.delays = ChannelDelays::all(DelaySpec::normal(*task.delay_mean_ms, task.delay_std_ms));
  }
  return p;
}

EpisodeRunner make_runner(const ExperimentConfig& cfg) {
  std::vector<CorpusEntry> corpus;
  if (!cfg.corpus.empty()) corpus = list_corpus(cfg.corpus);
  return [cfg, corpus](const std::string& name, HorizonPolicy& policy, std::uint64_t seed) {
    const TaskSpec task = parse_task(name);
    const PipelineConfig p = task_pipeline(cfg, task);
    if (corpus.empty()) {
      ScriptedOperator op(calibration_shape(task.shape), derive_seed(seed, 100));
      return run_episode(p, op, policy, seed);
    }
    std::vector<const CorpusEntry*> runs;
    for (const auto& e : corpus) {
      if (e.shape == task.shape) runs.push_back(&e);
    }
    if (runs.empty()) throw ConfigError("corpus has no runs of " + std::string(to_string(task.shape)));
    SessionSource source(load(runs[derive_seed(seed, 100) % runs.size()]->path));
    return run_episode(p, source, policy, seed);
  };
}

std::unique_ptr<HorizonPolicy> make_policy(PolicyKind kind, const PipelineConfig& pipeline,
                                           const PolicyParams* params, std::uint64_t seed) {
  switch (kind) {
    case PolicyKind::kWP: return std::make_unique<WithoutPrediction>();
    case PolicyKind::kRS: return std::make_unique<RandomHorizons>(pipeline.bins.max_ms, seed);
    case PolicyKind::kOD: return std::make_unique<DelayMatched>(pipeline.bins.max_ms);
    case PolicyKind::kAgent:
      if (params == nullptr) throw ConfigError("the agent policy needs parameters");
      return std::make_unique<NetworkPolicy>(*params, pipeline.bins, seed,
                                             NetworkPolicy::Mode::kModal);
  }
  throw ConfigError("unknown policy kind");
}

}  // namespace teleop
