#pragma once

#include <filesystem>
#include <string>

#include "teleop/agent/policy.hpp"
#include "teleop/agent/ppo.hpp"
#include "teleop/agent/trainer.hpp"
#include "teleop/agent/types.hpp"

namespace teleop {

constexpr int kCheckpointFormat = 1;

// Self-describing JSON snapshot of a policy and the trainer that produced it.
struct Checkpoint {
  std::string stage;  // "stage1", "stage2" or "init"
  TrainingSnapshot state;
  TrainerConfig trainer;
  HorizonBins bins;
  std::string config_hash;
  std::string code_version;
};

std::string checkpoint_to_json(const Checkpoint& c);
// Throws ParseError on malformed text and VersionError when the format
// number differs or the stored parameter count disagrees with the shape.
Checkpoint checkpoint_from_json(const std::string& text);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Throws VersionError when the checkpoint's policy cannot serve `bins`.
void check_compatible(const Checkpoint& c, const HorizonBins& bins);

}  // namespace teleop
