// Copyright (c) 2026 The forcegen Authors. All rights reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <doctest.h>

#include <cmath>
#include <limits>

#include "forcegen/policy.hpp"
#include "forcegen/teleop.hpp"

using namespace forcegen;

namespace {

UpperTrajectory ramp_trajectory(std::size_t n) {
  UpperTrajectory t;
  for (std::size_t i = 0; i < n; ++i) {
    const double s = static_cast<double>(i);
    t.theta.push_back(JointVector(0.3 + 0.001 * s, 1.2 - 0.002 * s, 0.01));
    t.dtheta.push_back(JointVector(0.05, -0.1, 0.0));
  }
  return t;
}

ModelSpec small_mlp() { return ModelSpec::mlp(8, 2); }

}  // namespace

TEST_CASE("upper provider") {
  const UpperTrajectory t = ramp_trajectory(35);
  SUBCASE("hold advances every ten ticks") {
    for (std::size_t k = 0; k < 10; ++k) CHECK(upper_provider(t, k).hold_index == 10);
    for (std::size_t k = 10; k < 20; ++k) CHECK(upper_provider(t, k).hold_index == 20);
    CHECK(upper_provider(t, 20).hold_index == 30);
    CHECK(upper_provider(t, 7).ref_index == 8);
    CHECK(upper_provider(t, 7).hold.theta == t.theta[10]);
    CHECK(upper_provider(t, 7).ref.dtheta == t.dtheta[8]);
  }
  SUBCASE("past the end clamps") {
    CHECK(upper_provider(t, 30).hold_index == 34);
    CHECK(upper_provider(t, 34).ref_index == 34);
    CHECK(upper_provider(t, 500).hold.theta == t.theta.back());
  }
  SUBCASE("empty") { CHECK_THROWS_AS(upper_provider(UpperTrajectory{}, 0), EmptyTrajectory); }
}

TEST_CASE("pid correction") {
  const UpperSample zero;
  UpperSample ref;
  ref.theta = JointVector::Constant(0.05);
  ref.dtheta = JointVector::Constant(-0.1);

  SUBCASE("proportional") {
    PidState st;
    const auto out = pid_correct(ref, zero, {2.0, 0.0, 0.0}, st);
    CHECK(out.u[0] == doctest::Approx(0.1).epsilon(1e-12));
  }
  SUBCASE("proportional plus derivative") {
    PidState st;
    const auto out = pid_correct(ref, zero, {2.0, 0.2, 0.0}, st);
    CHECK(out.u[1] == doctest::Approx(2.0 * 0.05 + 0.2 * -0.1).epsilon(1e-12));
    // First pseudo-derivative sample of a step from zero is g * u.
    CHECK(out.du[1] == doctest::Approx(kPidDerivativeCutoff * 0.08).epsilon(1e-12));
  }
  SUBCASE("integral is a trapezoid starting from zero error") {
    PidState st;
    UpperSample r;
    r.theta = JointVector::Constant(0.1);
    PidOutput out;
    for (int i = 0; i < 50; ++i) out = pid_correct(r, zero, {0.0, 0.0, 2.0}, st);
    CHECK(out.u[2] == doctest::Approx(2.0 * (0.1 * 1.0 - 0.1 * 0.02 / 2)).epsilon(1e-12));
  }
  SUBCASE("linear in each gain") {
    for (int g = 0; g < 3; ++g) {
      PidGains a, b;
      double* pa = g == 0 ? &a.kp : g == 1 ? &a.kd : &a.ki;
      double* pb = g == 0 ? &b.kp : g == 1 ? &b.kd : &b.ki;
      *pa = 0.7;
      *pb = 2.1;
      PidState sa, sb;
      PidOutput oa, ob;
      for (int i = 0; i < 5; ++i) {
        oa = pid_correct(ref, zero, a, sa);
        ob = pid_correct(ref, zero, b, sb);
      }
      CHECK((ob.u - 3.0 * oa.u).norm() < 1e-12);
      CHECK((ob.du - 3.0 * oa.du).norm() < 1e-12);
    }
  }
  SUBCASE("derivative of a constant correction decays") {
    PidState st;
    PidOutput out;
    for (int i = 0; i < 2000; ++i) out = pid_correct(ref, zero, {1.0, 0.0, 0.0}, st);
    CHECK(out.du.norm() < 1e-6);
    CHECK(out.u[0] == doctest::Approx(0.05));
  }
  SUBCASE("negative gains rejected") {
    const PidGains bad{-1.0, 0.0, 0.0};
    CHECK_THROWS_AS(bad.validate(), ConfigError);
  }
}

TEST_CASE("lower-layer input layout") {
  State s;
  s.theta = JointVector(1, 2, 3);
  s.dtheta = JointVector(4, 5, 6);
  s.tau = JointVector(7, 8, 9);
  UpperSample hold;
  hold.theta = JointVector(0.3, 1.0, 0.01);
  hold.dtheta = JointVector(13, 14, 15);
  PidOutput pid;
  pid.u = JointVector(0.01, 0.02, 0.0);
  pid.du = JointVector(1, 1, 1);
  const Eigen::VectorXd x = compose_input(s, hold, pid, NormStats{});
  Eigen::VectorXd expect(15);
  expect << 1, 2, 3, 4, 5, 6, 7, 8, 9, 0.31, 1.02, 0.01, 14, 15, 16;
  CHECK((x - expect).norm() < 1e-12);

  NormStats norm;
  norm.mean.setConstant(1.0);
  norm.std.setConstant(2.0);
  const Eigen::VectorXd xn = compose_input(s, hold, pid, norm);
  CHECK((xn - (expect.array() - 1.0).matrix() / 2.0).norm() < 1e-12);
}

TEST_CASE("policy step") {
  const UpperTrajectory traj = ramp_trajectory(40);
  const Model model = Model::random(small_mlp(), 3);
  NormStats norm;
  norm.mean.setConstant(0.1);
  norm.std.setConstant(0.5);
  State s;
  s.theta = traj.theta[0];

  SUBCASE("with the PID off the network sees the raw hold") {
    PolicyState st = make_policy_state(model);
    for (std::size_t k = 0; k < 25; ++k) {
      const auto out = policy_step(model, norm, s, traj, {}, st);
      const UpperWindow w = upper_provider(traj, k);
      const Eigen::VectorXd x = norm.apply_input(lower_layer_input(s, w.hold.theta, w.hold.dtheta));
      Model::Hidden h = model.initial_hidden();
      const Eigen::VectorXd y = norm.invert_output(model.step(x, h));
      CHECK((out.a_hat.theta - y.segment<3>(9)).norm() < 1e-12);
      CHECK((out.s_hat.tau - y.segment<3>(6)).norm() < 1e-12);
      CHECK(out.upper_input.theta == w.hold.theta);
    }
  }
  SUBCASE("error is taken against the previous prediction") {
    const PidGains g{1.0, 0.0, 0.0};
    PolicyState st = make_policy_state(model);
    const auto first = policy_step(model, norm, s, traj, g, st);
    CHECK(first.upper_input.theta == clamp_workspace(upper_provider(traj, 0).hold.theta));
    const auto second = policy_step(model, norm, s, traj, g, st);
    const JointVector e = traj.theta[1] - first.s_hat.theta;
    CHECK((second.upper_input.theta - clamp_workspace(traj.theta[10] + e)).norm() < 1e-12);
  }
  SUBCASE("lstm carries state between ticks") {
    const Model lstm = Model::random(ModelSpec::lstm(8, 1), 4);
    PolicyState st = make_policy_state(lstm);
    const auto a = policy_step(lstm, norm, s, traj, {}, st);
    st.tick = 0;
    const auto b = policy_step(lstm, norm, s, traj, {}, st);
    CHECK((a.a_hat.theta - b.a_hat.theta).norm() > 1e-9);
  }
  SUBCASE("non-finite output names the tick") {
    Model bad = model;
    Eigen::VectorXd p = bad.params();
    p[p.size() - 1] = std::numeric_limits<double>::quiet_NaN();
    bad.set_params(p);
    PolicyState st = make_policy_state(bad);
    try {
      policy_step(bad, norm, s, traj, {}, st);
      FAIL("expected NonFinite");
    } catch (const NonFinite& e) {
      CHECK(e.tick() == 0);
    }
  }
}

TEST_CASE("autonomous run") {
  const UpperTrajectory traj = ramp_trajectory(12);
  RunConfig cfg;
  cfg.board.height = -1.0;
  const Model model = Model::random(small_mlp(), 9);
  NormStats norm;
  norm.mean.head(9) = Eigen::VectorXd::Constant(9, 0.0);
  norm.mean.segment<3>(0) = traj.theta[0];
  norm.std.setConstant(0.01);

  const RunResult r = run_autonomous(model, norm, traj, cfg);
  REQUIRE(r.episode.length() == 120);
  CHECK(r.policy_ticks == 12);
  CHECK(r.tau_ref.rows() == 120);
  CHECK(r.upper_input.rows() == 12);
  CHECK(r.episode.meta.at("source") == "autonomous");
  // Commands are held for the ten robot ticks of each policy tick.
  for (std::size_t t = 0; t < 120; ++t) {
    if (t % 10 == 0) continue;
    CHECK(r.episode.get(t, Channel::ThetaCmd) == r.episode.get(t - 1, Channel::ThetaCmd));
    CHECK(r.episode.get(t, Channel::TauCmd) == r.episode.get(t - 1, Channel::TauCmd));
  }
  CHECK(r.episode.get(0, Channel::ThetaRes) == traj.theta[0]);
  CHECK(r.ink.empty());

  const RunResult again = run_autonomous(model, norm, traj, cfg);
  CHECK(again.episode == r.episode);
}

TEST_CASE("playback") {
  const TeleopConfig tc;
  const auto [upper, taught] = direct_teach({TaskId::Line1, 0.0, 1}, tc);
  RunConfig cfg;
  cfg.board = tc.board;
  const RunResult r = run_playback(upper, cfg);
  CHECK(r.episode.meta.at("source") == "playback");
  for (std::size_t k = 0; k < upper.size(); ++k) {
    CHECK(r.episode.get(10 * k + 3, Channel::ThetaCmd) == upper.theta[k]);
    CHECK(r.episode.get(10 * k + 3, Channel::TauCmd).isZero(0.0));
  }
  // Angle-only replay follows the stroke in the plane.
  double sq = 0.0;
  for (std::size_t k = 0; k < upper.size(); ++k) {
    const Vec3 want = forward_kinematics(upper.theta[k], tc.arm);
    const Eigen::Index row = static_cast<Eigen::Index>(std::min(10 * k + 10, r.episode.length() - 1));
    sq += (r.episode.aux.row(row).head<2>().transpose() - want.head<2>()).squaredNorm();
  }
  CHECK(std::sqrt(sq / static_cast<double>(upper.size())) < 0.005);
}
