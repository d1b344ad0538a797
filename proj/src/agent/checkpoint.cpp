#include "teleop/agent/checkpoint.hpp"

#include <fstream>
#include <json.hpp>
#include <sstream>

#include "teleop/core/errors.hpp"

namespace teleop {

namespace {

using nlohmann::json;

json vec_to_json(const Eigen::VectorXd& v) {
  return json(std::vector<double>(v.data(), v.data() + v.size()));
}

Eigen::VectorXd vec_from_json(const json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

const char* optimizer_name(TrainerConfig::MetaOptimizer m) {
  return m == TrainerConfig::MetaOptimizer::kAdam ? "adam" : "sgd";
}

TrainerConfig::MetaOptimizer parse_optimizer(const std::string& s) {
  if (s == "adam") return TrainerConfig::MetaOptimizer::kAdam;
  if (s == "sgd") return TrainerConfig::MetaOptimizer::kSgd;
  throw ParseError("unknown meta optimizer '" + s + "'", 0);
}

}  // namespace

std::string checkpoint_to_json(const Checkpoint& c) {
  const auto& p = c.state.params;
  const auto& t = c.trainer;
  const auto& a = c.state.adam;
  json j;
  j["format"] = kCheckpointFormat;
  j["stage"] = c.stage;
  j["code_version"] = c.code_version;
  j["config_hash"] = c.config_hash;
  j["episodes"] = c.state.episodes;
  j["bins"] = {{"max_ms", c.bins.max_ms}, {"step_ms", c.bins.step_ms}};
  j["shape"] = {{"inputs", p.shape.inputs},
                {"trunk", p.shape.trunk},
                {"head", p.shape.head},
                {"bins", p.shape.bins}};
  j["params"] = vec_to_json(p.flat);
  j["trainer"] = {{"alpha", t.alpha},
                  {"beta", t.beta},
                  {"gamma", t.gamma},
                  {"lambda", t.lambda},
                  {"clip", t.clip},
                  {"batch_size", t.batch_size},
                  {"trajectories_per_task", t.trajectories_per_task},
                  {"tasks_per_iteration", t.tasks_per_iteration},
                  {"value_coef", t.value_coef},
                  {"entropy_coef", t.entropy_coef},
                  {"meta_optimizer", optimizer_name(t.meta_optimizer)}};
  j["rng_state"] = c.state.rng_state;
  j["adam"] = {{"beta1", a.beta1}, {"beta2", a.beta2}, {"epsilon", a.epsilon},
               {"steps", a.steps}, {"m", vec_to_json(a.m)}, {"v", vec_to_json(a.v)}};
  return j.dump(1) + "\n";
}

Checkpoint checkpoint_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("checkpoint: ") + e.what(), 0);
  }
  try {
    const int format = j.at("format").get<int>();
    if (format != kCheckpointFormat) {
      throw VersionError("checkpoint format " + std::to_string(format) + ", expected " +
                         std::to_string(kCheckpointFormat));
    }
    Checkpoint c;
    c.stage = j.at("stage").get<std::string>();
    c.code_version = j.at("code_version").get<std::string>();
    c.config_hash = j.at("config_hash").get<std::string>();
    c.state.episodes = j.at("episodes").get<int>();
    c.bins.max_ms = j.at("bins").at("max_ms").get<int>();
    c.bins.step_ms = j.at("bins").at("step_ms").get<int>();
    const auto& s = j.at("shape");
    c.state.params.shape = {s.at("inputs").get<int>(), s.at("trunk").get<int>(),
                            s.at("head").get<int>(), s.at("bins").get<int>()};
    c.state.params.flat = vec_from_json(j.at("params"));
    if (c.state.params.flat.size() != c.state.params.shape.parameter_count()) {
      throw VersionError("checkpoint holds " + std::to_string(c.state.params.flat.size()) +
                         " parameters, shape needs " +
                         std::to_string(c.state.params.shape.parameter_count()));
    }
    const auto& t = j.at("trainer");
    c.trainer.alpha = t.at("alpha").get<double>();
    c.trainer.beta = t.at("beta").get<double>();
    c.trainer.gamma = t.at("gamma").get<double>();
    c.trainer.lambda = t.at("lambda").get<double>();
    c.trainer.clip = t.at("clip").get<double>();
    c.trainer.batch_size = t.at("batch_size").get<int>();
    c.trainer.trajectories_per_task = t.at("trajectories_per_task").get<int>();
    c.trainer.tasks_per_iteration = t.at("tasks_per_iteration").get<int>();
    c.trainer.value_coef = t.at("value_coef").get<double>();
    c.trainer.entropy_coef = t.at("entropy_coef").get<double>();
    c.trainer.meta_optimizer = parse_optimizer(t.at("meta_optimizer").get<std::string>());
    c.state.rng_state = j.at("rng_state").get<std::string>();
    const auto& a = j.at("adam");
    c.state.adam.beta1 = a.at("beta1").get<double>();
    c.state.adam.beta2 = a.at("beta2").get<double>();
    c.state.adam.epsilon = a.at("epsilon").get<double>();
    c.state.adam.steps = a.at("steps").get<long>();
    c.state.adam.m = vec_from_json(a.at("m"));
    c.state.adam.v = vec_from_json(a.at("v"));
    return c;
  } catch (const json::exception& e) {
    throw ParseError(std::string("checkpoint: ") + e.what(), 0);
  }
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write checkpoint " + path.string());
  out << checkpoint_to_json(c);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read checkpoint " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return checkpoint_from_json(text.str());
}

void check_compatible(const Checkpoint& c, const HorizonBins& bins) {
  if (c.bins.max_ms != bins.max_ms || c.bins.step_ms != bins.step_ms) {
    throw VersionError("checkpoint bins " + std::to_string(c.bins.max_ms) + "/" +
                       std::to_string(c.bins.step_ms) + " do not match configured " +
                       std::to_string(bins.max_ms) + "/" + std::to_string(bins.step_ms));
  }
  if (c.state.params.shape.inputs != kStateSize || c.state.params.shape.bins != bins.count()) {
    throw VersionError("checkpoint policy shape does not match the configured state and bins");
  }
}

}  // namespace teleop
