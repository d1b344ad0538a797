#include "teleop/operator/source.hpp"

#include <numbers>

namespace teleop {

ScriptedOperator::ScriptedOperator(ShapeSpec shape, unsigned long long seed)
    : ScriptedOperator(std::move(shape), seed, Options{}) {}

ScriptedOperator::ScriptedOperator(ShapeSpec shape, unsigned long long seed, Options options)
    : shape_(std::move(shape)), options_(options), rng_(seed), noise_(0.0, 1.0) {
  shape_.validate();
  if (options_.random_phase) {
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
    shape_.phase += phase(rng_);
  }
}

std::optional<Pose> ScriptedOperator::sample(SimTime t) {
  const Pose clean = generate(shape_, to_ms(t));
  if (options_.noise_std_m <= 0.0) return clean;
  Eigen::Vector3d jitter;
  for (int i = 0; i < 3; ++i) jitter[i] = options_.noise_std_m * noise_(rng_);
  return Pose(clean.position() + jitter, clean.orientation());
}

SessionSource::SessionSource(Session session) : session_(std::move(session)) {
  session_.validate();
}

std::optional<Pose> SessionSource::sample(SimTime t) {
  const auto& s = session_.samples;
  if (s.empty()) return std::nullopt;
  const double ms = to_ms(t);
  while (cursor_ + 1 < s.size() && s[cursor_ + 1].t_ms <= ms) ++cursor_;
  if (ms <= s.front().t_ms) return s.front().target;
  if (cursor_ + 1 >= s.size()) return s.back().target;
  const auto& a = s[cursor_];
  const auto& b = s[cursor_ + 1];
  const double u = (ms - a.t_ms) / (b.t_ms - a.t_ms);
  Vec7 v = a.target.as_vector() + u * (b.target.as_vector() - a.target.as_vector());
  return Pose::from_vector(v);
}

void LiveInput::push(double t_ms, const Pose& pose) {
  {
    std::lock_guard lock(mutex_);
    items_.push_back({t_ms, pose});
  }
  cv_.notify_all();
}

void LiveInput::close() {
  {
    std::lock_guard lock(mutex_);
    closed_ = true;
  }
  cv_.notify_all();
}

bool LiveInput::closed() const {
  std::lock_guard lock(mutex_);
  return closed_;
}

std::optional<double> LiveInput::newest_time() const {
  std::lock_guard lock(mutex_);
  if (items_.empty()) return std::nullopt;
  return items_.back().t_ms;
}

std::optional<Pose> LiveInput::pose_at(double t_ms, std::chrono::milliseconds wait) {
  std::unique_lock lock(mutex_);
  cv_.wait_for(lock, wait, [&] {
    return closed_ || (!items_.empty() && items_.back().t_ms >= t_ms);
  });
  if (items_.empty() || items_.back().t_ms < t_ms) return std::nullopt;
  while (!items_.empty() && items_.front().t_ms <= t_ms) {
    last_ = items_.front().pose;
    items_.pop_front();
  }
  return last_ ? *last_ : items_.front().pose;
}

std::optional<Pose> LiveSource::sample(SimTime t) { return input_->pose_at(to_ms(t), wait_); }

}  // namespace teleop
