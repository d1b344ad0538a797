#include "teleop/agent/policy.hpp"

#include <cmath>

#include "teleop/core/errors.hpp"

namespace teleop {

namespace {

using Eigen::Map;
using Eigen::MatrixXd;
using Eigen::VectorXd;

struct Dense {
  int rows, cols;
  int w;  // offset of the weight block
  int b;  // offset of the bias block
};

struct Layout {
  Dense l1, l2, r1, r2, v1, v2, value;
  int total;
};

Layout layout(const PolicyShape& s) {
  Layout l{};
  int at = 0;
  auto dense = [&at](int rows, int cols) {
    Dense d{rows, cols, at, at + rows * cols};
    at += rows * cols + rows;
    return d;
  };
  l.l1 = dense(s.trunk, s.inputs);
  l.l2 = dense(s.trunk, s.trunk);
  l.r1 = dense(s.head, s.trunk);
  l.r2 = dense(s.bins, s.head);
  l.v1 = dense(s.head, s.trunk);
  l.v2 = dense(s.bins, s.head);
  l.value = dense(1, s.trunk);
  l.total = at;
  return l;
}

Map<const MatrixXd> weights(const VectorXd& flat, const Dense& d) {
  return {flat.data() + d.w, d.rows, d.cols};
}

Map<const VectorXd> bias(const VectorXd& flat, const Dense& d) { return {flat.data() + d.b, d.rows}; }

VectorXd affine(const VectorXd& flat, const Dense& d, const VectorXd& x) {
  return weights(flat, d) * x + bias(flat, d);
}

VectorXd softmax(const VectorXd& z) {
  const VectorXd e = (z.array() - z.maxCoeff()).exp();
  return e / e.sum();
}

void check_finite(const VectorXd& v, const char* what) {
  if (!v.allFinite()) throw NumericalError(std::string("non-finite ") + what + " activation");
}

// Accumulates the gradient of one dense layer and returns dL/dx.
VectorXd backprop(const VectorXd& flat, const Dense& d, const VectorXd& x, const VectorXd& dy,
                  VectorXd& grad) {
  Map<MatrixXd>(grad.data() + d.w, d.rows, d.cols) += dy * x.transpose();
  Map<VectorXd>(grad.data() + d.b, d.rows) += dy;
  return weights(flat, d).transpose() * dy;
}

VectorXd through_tanh(const VectorXd& h, const VectorXd& dh) {
  return dh.array() * (1.0 - h.array().square());
}

SampledAction make_action(int control_bin, int visual_bin, const VectorXd& control_probs,
                          const VectorXd& visual_probs, const HorizonBins& bins) {
  SampledAction s;
  s.control_bin = control_bin;
  s.visual_bin = visual_bin;
  s.action = {bins.to_ms(control_bin), bins.to_ms(visual_bin)};
  s.logprob = std::log(control_probs(control_bin)) + std::log(visual_probs(visual_bin));
  return s;
}

}  // namespace

int PolicyShape::parameter_count() const { return layout(*this).total; }

std::vector<ParamTensor> parameter_tensors(const PolicyShape& shape) {
  const Layout l = layout(shape);
  std::vector<ParamTensor> out;
  auto add = [&out](const std::string& name, const Dense& d) {
    out.push_back({name + ".weight", d.w, d.rows * d.cols});
    out.push_back({name + ".bias", d.b, d.rows});
  };
  add("trunk1", l.l1);
  add("trunk2", l.l2);
  add("control_hidden", l.r1);
  add("control_out", l.r2);
  add("visual_hidden", l.v1);
  add("visual_out", l.v2);
  add("value", l.value);
  return out;
}

PolicyParams PolicyParams::zeros(const PolicyShape& shape) {
  return {shape, VectorXd::Zero(shape.parameter_count())};
}

PolicyParams PolicyParams::random(const PolicyShape& shape, std::uint64_t seed) {
  PolicyParams p = zeros(shape);
  const Layout l = layout(shape);
  std::mt19937_64 rng(seed);
  auto fill = [&](const Dense& d, double gain) {
    const double limit = gain * std::sqrt(3.0 / d.cols);
    std::uniform_real_distribution<double> u(-limit, limit);
    for (int i = 0; i < d.rows * d.cols; ++i) p.flat(d.w + i) = u(rng);
  };
  fill(l.l1, 1.0);
  fill(l.l2, 1.0);
  fill(l.r1, 1.0);
  fill(l.r2, 0.01);
  fill(l.v1, 1.0);
  fill(l.v2, 0.01);
  fill(l.value, 0.1);
  return p;
}

PolicyOutput policy_forward(const PolicyParams& params, const VectorXd& features) {
  const Layout l = layout(params.shape);
  if (features.size() != params.shape.inputs) {
    throw ConfigError("policy expects " + std::to_string(params.shape.inputs) + " inputs");
  }
  const VectorXd& f = params.flat;
  PolicyOutput out;
  out.input = features;
  out.h1 = affine(f, l.l1, features).array().tanh();
  out.h2 = affine(f, l.l2, out.h1).array().tanh();
  out.hr = affine(f, l.r1, out.h2).array().tanh();
  out.hv = affine(f, l.v1, out.h2).array().tanh();
  const VectorXd zr = affine(f, l.r2, out.hr);
  const VectorXd zv = affine(f, l.v2, out.hv);
  check_finite(zr, "control head");
  check_finite(zv, "visual head");
  out.control_probs = softmax(zr);
  out.visual_probs = softmax(zv);
  out.value = affine(f, l.value, out.h2)(0);
  if (!std::isfinite(out.value)) throw NumericalError("non-finite value estimate");
  return out;
}

VectorXd policy_backward(const PolicyParams& params, const PolicyOutput& out,
                         const VectorXd& d_control_logits, const VectorXd& d_visual_logits,
                         double d_value) {
  const Layout l = layout(params.shape);
  const VectorXd& f = params.flat;
  VectorXd grad = VectorXd::Zero(f.size());
  const VectorXd d_hr = backprop(f, l.r2, out.hr, d_control_logits, grad);
  const VectorXd d_hv = backprop(f, l.v2, out.hv, d_visual_logits, grad);
  VectorXd d_h2 = backprop(f, l.r1, out.h2, through_tanh(out.hr, d_hr), grad);
  d_h2 += backprop(f, l.v1, out.h2, through_tanh(out.hv, d_hv), grad);
  d_h2 += backprop(f, l.value, out.h2, VectorXd::Constant(1, d_value), grad);
  const VectorXd d_h1 = backprop(f, l.l2, out.h1, through_tanh(out.h2, d_h2), grad);
  backprop(f, l.l1, out.input, through_tanh(out.h1, d_h1), grad);
  return grad;
}

int sample_categorical(const VectorXd& probs, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double x = u(rng);
  double acc = 0.0;
  for (int i = 0; i < probs.size(); ++i) {
    acc += probs(i);
    if (x < acc) return i;
  }
  // Rounding left the cumulative sum just below 1; take the last bin with
  // non-zero mass.
  for (int i = static_cast<int>(probs.size()) - 1; i > 0; --i) {
    if (probs(i) > 0.0) return i;
  }
  return 0;
}

SampledAction sample_action(const VectorXd& control_probs, const VectorXd& visual_probs,
                            const HorizonBins& bins, std::mt19937_64& rng) {
  const int r = sample_categorical(control_probs, rng);
  const int v = sample_categorical(visual_probs, rng);
  return make_action(r, v, control_probs, visual_probs, bins);
}

SampledAction modal_action(const VectorXd& control_probs, const VectorXd& visual_probs,
                           const HorizonBins& bins) {
  Eigen::Index r = 0, v = 0;
  control_probs.maxCoeff(&r);
  visual_probs.maxCoeff(&v);
  return make_action(static_cast<int>(r), static_cast<int>(v), control_probs, visual_probs, bins);
}

}  // namespace teleop
