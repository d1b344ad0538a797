#include <doctest.h>

#include <cmath>
#include <random>

#include "teleop/control/dynamics.hpp"
#include "teleop/control/pid.hpp"
#include "teleop/control/smoother.hpp"
#include "teleop/control/synthesizer.hpp"
#include "teleop/core/errors.hpp"

using namespace teleop;

namespace {

Vec7 pose_vec(double x, double y, double z) {
  Vec7 v = Vec7::Zero();
  v << x, y, z, 0.0, 0.0, 0.0, 1.0;
  return v;
}

RmpParams soft_gains() {
  RmpParams p;
  p.k_p = 100.0;
  p.k_d = 20.0;
  return p;
}

}  // namespace

TEST_CASE("cap examples") {
  Eigen::VectorXd u(2);
  u << 1.0, 0.0;
  CHECK(cap(u, 2.0).isApprox(u));
  u << 3.0, 4.0;
  const Eigen::VectorXd c = cap(u, 2.5);
  CHECK(c(0) == doctest::Approx(1.5));
  CHECK(c(1) == doctest::Approx(2.0));
  CHECK(cap(Eigen::VectorXd::Zero(3), 1.0).norm() == 0.0);
}

TEST_CASE("cap never exceeds the threshold") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 3.0);
  std::uniform_real_distribution<double> th(0.01, 5.0);
  for (int i = 0; i < 10000; ++i) {
    Eigen::VectorXd u(7);
    for (int k = 0; k < 7; ++k) u(k) = n(rng);
    const double t = th(rng);
    CHECK(cap(u, t).norm() <= t * (1.0 + 1e-12));
  }
}

TEST_CASE("rmp acceleration at equilibrium, below and above the cap") {
  const RmpParams p = soft_gains();
  AxisState s = AxisState::at_rest(pose_vec(0.3, 0.0, 0.25));
  CHECK(rmp_accel(s, s.q, p).norm() == 0.0);
  const Vec7 near = pose_vec(0.4, 0.0, 0.25);
  CHECK(rmp_accel(s, near, p)(0) == doctest::Approx(p.k_p * 0.1));
  const Vec7 far = pose_vec(3.3, 4.0, 0.25);
  CHECK(rmp_accel(s, far, p).norm() == doctest::Approx(p.k_p * p.cap));
}

TEST_CASE("integration examples") {
  AxisState s = AxisState::at_rest(pose_vec(0.0, 0.0, 0.0));
  integrate(s, 0.01);
  CHECK(s.q.isApprox(pose_vec(0.0, 0.0, 0.0)));
  s.qdd(0) = 1.0;
  const double dt = 1.0 / 240.0;
  integrate(s, dt);
  CHECK(s.qd(0) == doctest::Approx(dt));
  CHECK(s.q(0) == doctest::Approx(dt * dt));
}

TEST_CASE("twin settles like a critically damped oscillator") {
  const RmpParams p = soft_gains();
  TwinState ts;
  ts.axes = AxisState::at_rest(pose_vec(0.3, 0.0, 0.25));
  ts.target = pose_vec(0.35, 0.0, 0.25);
  const double e0 = 0.05;
  const double w = std::sqrt(p.k_p);
  const double dt = 1.0 / kSimRateHz;
  for (int k = 1; k <= 480; ++k) {
    step_sim(ts, p);
    const double t = k * dt;
    const double exact = e0 * (1.0 + w * t) * std::exp(-w * t);
    CHECK(std::abs((ts.target(0) - ts.axes.q(0)) - exact) < 2e-3);
  }
  CHECK(std::abs(ts.target(0) - ts.axes.q(0)) < 1e-3);
  CHECK(ts.sim_ticks == 480);
}

TEST_CASE("twin energy decreases once the transient is over") {
  const RmpParams p = soft_gains();
  TwinState ts;
  ts.axes = AxisState::at_rest(pose_vec(0.3, 0.0, 0.25));
  ts.target = pose_vec(0.32, -0.03, 0.27);
  auto energy = [&] {
    const Vec7 e = ts.target - ts.axes.q;
    return p.k_p * e.squaredNorm() + ts.axes.qd.squaredNorm();
  };
  double prev = 0.0;
  for (int k = 1; k <= 240 * 3; ++k) {
    step_sim(ts, p);
    if (k >= 120 && k % 24 == 0) {
      const double v = energy();
      if (k > 120) CHECK(v < prev);
      prev = v;
    }
  }
}

TEST_CASE("quaternion axes stay unit norm") {
  TwinState ts;
  ts.axes = AxisState::at_rest(pose_vec(0.3, 0.0, 0.25));
  Vec7 target = pose_vec(0.3, 0.1, 0.2);
  target.tail<4>() = Eigen::Vector4d(0.3, -0.2, 0.1, 0.9).normalized();
  ts.target = target;
  PlantState ps;
  ps.axes = ts.axes;
  for (int k = 0; k < 5000; ++k) {
    step_sim(ts, RmpParams{});
    plant_step(ps, target, PidGains{});
  }
  CHECK(ts.axes.q.tail<4>().norm() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(ps.axes.q.tail<4>().norm() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("render ticks carry the twin pose with increasing ids") {
  TwinState ts;
  ts.axes = AxisState::at_rest(pose_vec(0.3, 0.0, 0.25));
  std::uint64_t last = 0;
  int frames = 0;
  for (int ms = 0; ms < 1000; ms += 16) {
    const FrameSnapshot f = render_tick(ts, from_ms(ms));
    if (frames > 0) CHECK(f.frame_id > last);
    CHECK(f.pose.isApprox(ts.axes.q));
    last = f.frame_id;
    ++frames;
  }
  CHECK((frames == 62 || frames == 63));
}

TEST_CASE("pid examples") {
  PidGains g;
  g.k_p = 60.0;
  g.k_i = 0.0;
  g.k_d = 0.0;
  g.integral_limit = 1.0;
  CHECK(pid_step(g, 0.2, 0.0, 0.2, 0.001).u == doctest::Approx(12.0));
  const PidGains d;
  const PidOutput z = pid_step(d, 0.0, 0.0, 0.0, 0.001);
  CHECK(z.u == 0.0);
  CHECK(z.integral == 0.0);
  // Trapezoidal integral and derivative on one step.
  const PidOutput o = pid_step(d, 0.02, 0.0, 0.01, 0.001);
  CHECK(o.integral == doctest::Approx(0.001 * 0.015));
  CHECK(o.u == doctest::Approx(d.k_p * 0.02 + d.k_i * o.integral + d.k_d * 10.0));
}

TEST_CASE("pid integral is clamped") {
  const PidGains g;
  double integral = 0.0;
  for (int k = 0; k < 10000; ++k) integral = pid_step(g, 1.0, integral, 1.0, 0.001).integral;
  CHECK(integral == doctest::Approx(g.integral_limit));
}

TEST_CASE("plant tracks a step with vanishing error") {
  PlantState ps;
  ps.axes = AxisState::at_rest(pose_vec(0.3, 0.0, 0.25));
  const Vec7 cmd = pose_vec(0.35, 0.0, 0.25);
  for (int k = 0; k < 5000; ++k) plant_step(ps, cmd, PidGains{});
  CHECK(std::abs(ps.axes.q(0) - 0.35) < 1e-3);
  CHECK(ps.steps == 5000);
}

TEST_CASE("plant holds still on its own position") {
  PlantState ps;
  ps.axes = AxisState::at_rest(pose_vec(0.3, 0.0, 0.25));
  const Vec7 start = ps.axes.q;
  for (int k = 0; k < 1000; ++k) plant_step(ps, start, PidGains{});
  CHECK((ps.axes.q - start).norm() < 1e-12);
}

TEST_CASE("plant follows a ramp with less than 200 ms lag") {
  PlantState ps;
  ps.axes = AxisState::at_rest(pose_vec(0.3, 0.0, 0.25));
  const double speed = 0.015;
  double worst_lag_ms = 0.0;
  for (int k = 1; k <= 4000; ++k) {
    const double t = k / kPlantRateHz;
    plant_step(ps, pose_vec(0.3 + speed * t, 0.0, 0.25), PidGains{});
    if (k > 500) worst_lag_ms = std::max(worst_lag_ms, (0.3 + speed * t - ps.axes.q(0)) / speed * 1e3);
  }
  CHECK(worst_lag_ms < 200.0);
}

TEST_CASE("smoother examples") {
  SmootherState st;
  st.alpha0 = 0.5;
  Vec7 zero = Vec7::Zero();
  smoother_receive(st, zero, from_ms(0.0));
  CHECK(smooth_command(st, from_ms(0.0)).isApprox(zero));
  smoother_receive(st, Vec7::Ones(), from_ms(1.0));
  const Vec7 out = smooth_command(st, from_ms(1.0));
  CHECK(out(0) == doctest::Approx(0.5));
  CHECK(st.alpha == doctest::Approx(0.25));
}

TEST_CASE("smoother with alpha one holds the previous command") {
  SmootherState st;
  st.alpha0 = 1.0;
  smoother_receive(st, Vec7::Zero(), from_ms(0.0));
  smoother_receive(st, Vec7::Ones(), from_ms(1.0));
  CHECK(smooth_command(st, from_ms(2.0)).norm() == 0.0);
}

TEST_CASE("smoother converges geometrically and stays between its endpoints") {
  SmootherState st;
  st.blend_window_ms = 1e9;
  smoother_receive(st, Vec7::Zero(), from_ms(0.0));
  smoother_receive(st, Vec7::Ones(), from_ms(0.0));
  double prev_gap = 1.0;
  double alpha = st.alpha0;
  double expected_gap = 1.0;
  for (int k = 0; k < 8; ++k) {
    const Vec7 out = smooth_command(st, from_ms(k));
    expected_gap *= alpha;
    alpha *= alpha;
    const double gap = 1.0 - out(0);
    CHECK(gap == doctest::Approx(expected_gap));
    CHECK(gap <= prev_gap);
    CHECK((out.array() >= 0.0).all());
    CHECK((out.array() <= 1.0).all());
    prev_gap = gap;
  }
}

TEST_CASE("smoother holds outside the blend window") {
  SmootherState st;
  smoother_receive(st, Vec7::Zero(), from_ms(0.0));
  smoother_receive(st, Vec7::Ones(), from_ms(0.0));
  const Vec7 a = smooth_command(st, from_ms(1.0));
  const Vec7 b = smooth_command(st, from_ms(100.0));
  CHECK(a.isApprox(b));
  SmootherState fresh;
  CHECK_THROWS_AS(smooth_command(fresh, from_ms(0.0)), InstrumentationError);
}

TEST_CASE("identity map passes the predicted pose through") {
  ControlSynthesizer s(WorkspaceMap::identity(), 0.05);
  const Vec7 p = pose_vec(0.31, 0.02, 0.24);
  CHECK(s.synthesize(Pose::from_vector(p), p, p).isApprox(p));
}

TEST_CASE("guard radius freezes targets until the gap halves") {
  ControlSynthesizer s(WorkspaceMap::identity(), 0.05);
  const Vec7 twin = pose_vec(0.3, 0.0, 0.25);
  const Vec7 a = pose_vec(0.31, 0.0, 0.25);
  CHECK(s.synthesize(Pose::from_vector(a), twin, twin).isApprox(a));
  const Vec7 b = pose_vec(0.32, 0.0, 0.25);
  // Plant 6 cm from the twin: hold the last target.
  CHECK(s.synthesize(Pose::from_vector(b), twin, pose_vec(0.36, 0.0, 0.25)).isApprox(a));
  CHECK(s.holding());
  // 3 cm is inside the radius but not below half of it: still holding.
  CHECK(s.synthesize(Pose::from_vector(b), twin, pose_vec(0.33, 0.0, 0.25)).isApprox(a));
  // 2 cm releases.
  CHECK(s.synthesize(Pose::from_vector(b), twin, pose_vec(0.32, 0.0, 0.25)).isApprox(b));
  CHECK_FALSE(s.holding());
}

TEST_CASE("invalid control parameters are rejected") {
  CHECK_THROWS_AS(ControlSynthesizer(WorkspaceMap::identity(), 0.0), ConfigError);
  SmootherState st;
  st.alpha0 = 0.0;
  CHECK_THROWS_AS(st.validate(), ConfigError);
}
