#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "teleop/agent/types.hpp"

namespace teleop {

// Layer sizes of the horizon policy: a shared tanh trunk, one tanh hidden
// layer per horizon head, softmax outputs, and a linear value head on the
// trunk.
struct PolicyShape {
  int inputs = kStateSize;
  int trunk = 64;
  int head = 64;
  int bins = 11;

  int parameter_count() const;
  bool operator==(const PolicyShape&) const = default;
};

// All weights in one flat vector so optimizer steps and finite differences
// work on a single Eigen vector. Matrices are column-major blocks.
struct PolicyParams {
  PolicyShape shape;
  Eigen::VectorXd flat;

  static PolicyParams zeros(const PolicyShape& shape);
  // Uniform fan-in scaled weights, zero biases, output layers scaled down so
  // the initial heads are close to uniform.
  static PolicyParams random(const PolicyShape& shape, std::uint64_t seed);

  bool finite() const { return flat.allFinite(); }
};

// Name and position of each weight and bias block inside PolicyParams::flat.
struct ParamTensor {
  std::string name;
  int offset;
  int size;
};

std::vector<ParamTensor> parameter_tensors(const PolicyShape& shape);

// Forward pass outputs plus the activations the backward pass needs.
struct PolicyOutput {
  Eigen::VectorXd control_probs;
  Eigen::VectorXd visual_probs;
  double value = 0.0;

  Eigen::VectorXd input;
  Eigen::VectorXd h1, h2, hr, hv;  // post-tanh activations
};

// Throws NumericalError when an activation is not finite.
PolicyOutput policy_forward(const PolicyParams& params, const Eigen::VectorXd& features);

// Gradient of a scalar with respect to every parameter, given its gradient
// with respect to both heads' logits and the value output.
Eigen::VectorXd policy_backward(const PolicyParams& params, const PolicyOutput& out,
                                const Eigen::VectorXd& d_control_logits,
                                const Eigen::VectorXd& d_visual_logits, double d_value);

struct SampledAction {
  HorizonAction action;
  int control_bin = 0;
  int visual_bin = 0;
  double logprob = 0.0;  // sum over both heads
};

int sample_categorical(const Eigen::VectorXd& probs, std::mt19937_64& rng);

SampledAction sample_action(const Eigen::VectorXd& control_probs,
                            const Eigen::VectorXd& visual_probs, const HorizonBins& bins,
                            std::mt19937_64& rng);

// Most probable bin of each head (lowest bin on ties).
SampledAction modal_action(const Eigen::VectorXd& control_probs,
                           const Eigen::VectorXd& visual_probs, const HorizonBins& bins);

}  // namespace teleop
