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

#include "forcegen/teleop.hpp"

using namespace forcegen;

namespace {

double signed_area(const std::vector<Eigen::Vector2d>& p) {
  double a = 0.0;
  for (std::size_t i = 0; i + 1 < p.size(); ++i) a += p[i].x() * p[i + 1].y() - p[i + 1].x() * p[i].y();
  return 0.5 * a;
}

}  // namespace

TEST_CASE("task names") {
  for (TaskId id : {TaskId::Line1, TaskId::CircleB, TaskId::Char3, TaskId::StringABCD}) {
    CHECK(parse_task(task_name(id)) == id);
  }
  CHECK_THROWS_AS(parse_task("line9"), UnknownTask);
  CHECK(protocol_tasks().size() * protocol_heights().size() * kProtocolTrials == 70);
}

TEST_CASE("stroke library") {
  SUBCASE("line1 is one pen-down segment") {
    const StrokePath p = stroke_library(TaskId::Line1);
    REQUIRE(p.segments.size() == 1);
    CHECK(p.segments[0].polyline.size() == 2);
    CHECK_FALSE(p.segments[0].pen_up);
    CHECK(p.length() == doctest::Approx(0.06));
  }
  SUBCASE("circles start at the top and run counterclockwise") {
    for (auto [id, r] : {std::pair{TaskId::CircleA, 0.03}, std::pair{TaskId::CircleB, 0.04}}) {
      const StrokePath p = stroke_library(id);
      REQUIRE(p.segments.size() == 1);
      const auto& poly = p.segments[0].polyline;
      CHECK(poly.size() == 65);
      CHECK(poly.front() == poly.back());
      CHECK(poly.front().y() == doctest::Approx(kWritingCenter.y() + r));
      CHECK(poly.front().x() == doctest::Approx(kWritingCenter.x()));
      CHECK(signed_area(poly) > 0.0);
      for (const auto& v : poly) CHECK((v - kWritingCenter).norm() == doctest::Approx(r));
    }
  }
  SUBCASE("glyph block is longer than a single glyph") {
    CHECK(stroke_library(TaskId::StringABCD).length() > stroke_library(TaskId::CharA).length());
  }
  SUBCASE("all paths inside the reachable annulus") {
    for (int i = 0; i <= static_cast<int>(TaskId::StringABCD); ++i) {
      const StrokePath p = stroke_library(static_cast<TaskId>(i));
      for (const auto& s : p.segments) {
        CHECK(s.press_depth >= 0.0);
        CHECK(s.press_depth <= 0.005);
        for (const auto& v : s.polyline) {
          CHECK(v.norm() > 0.05);
          CHECK(v.norm() < 0.49);
        }
      }
    }
  }
  SUBCASE("jitter is bounded and seeded") {
    const StrokePath base = stroke_library(TaskId::Char2);
    const JitterConfig cfg;
    const StrokePath a = jitter_path(base, cfg, 3);
    const StrokePath b = jitter_path(base, cfg, 3);
    for (std::size_t s = 0; s < base.segments.size(); ++s) {
      CHECK(a.segments[s].speed == b.segments[s].speed);
      CHECK(a.segments[s].speed <= base.segments[s].speed * 1.1 + 1e-12);
      CHECK(a.segments[s].speed >= base.segments[s].speed * 0.9 - 1e-12);
      for (std::size_t i = 0; i < base.segments[s].polyline.size(); ++i) {
        CHECK(a.segments[s].polyline[i] == b.segments[s].polyline[i]);
        const Eigen::Vector2d d = a.segments[s].polyline[i] - base.segments[s].polyline[i];
        CHECK(d.cwiseAbs().maxCoeff() <= cfg.point_noise + 1e-12);
      }
    }
  }
}

TEST_CASE("reference path") {
  const StrokePath p = stroke_library(TaskId::Line1);
  const ReferencePath ref(p, 0.01);
  CHECK(ref.start().z() == doctest::Approx(0.01 + ReferencePath::kLift));
  CHECK(ref.at(0.0).position == ref.start());
  CHECK(ref.at(1e9).velocity.isZero());
  double pen_time = 0.0;
  for (double t = 0.0; t < ref.duration(); t += 0.001) {
    const auto s = ref.at(t);
    if (s.pen_down) {
      pen_time += 0.001;
      CHECK(s.position.z() == doctest::Approx(0.01 - p.segments[0].press_depth));
      CHECK(s.velocity.norm() == doctest::Approx(0.05));
    }
  }
  CHECK(pen_time == doctest::Approx(0.06 / 0.05).epsilon(0.01));
}

TEST_CASE("operator impedance") {
  const OperatorGains g;
  ReferencePath::Sample ref{Vec3(0.3, 0.0, 0.01), Vec3(0.05, 0.0, 0.0), true};
  CHECK(operator_force(ref.position, ref.velocity, ref, g).isZero());
  const Vec3 f = operator_force(ref.position - Vec3(0.01, 0, 0), ref.velocity, ref, g);
  CHECK(f.x() == doctest::Approx(4.0));
  CHECK(f.tail<2>().isZero());
}

TEST_CASE("bilateral law") {
  const ArmParams arm;
  const BilateralGains g;
  const State s{{0.3, 1.2, 0.02}, {0.1, -0.2, 0.0}, {0.0, 0.0, 0.0}};

  SUBCASE("synchronized and unloaded gives gravity feedforward only") {
    const auto t = bilateral_step(s, s, g, arm);
    CHECK(t.leader == arm.gravity_feedforward());
    CHECK(t.follower == arm.gravity_feedforward());
  }

  SUBCASE("follower half is the joint controller driven by the leader command") {
    State l = s;
    State f = s;
    l.theta += JointVector(0.01, -0.02, 0.003);
    l.dtheta += JointVector(0.1, 0.05, -0.02);
    l.tau = JointVector(0.2, -0.4, 1.5);
    f.tau = JointVector(-0.1, 0.3, -1.2);
    const auto t = bilateral_step(l, f, g, arm);
    JointGains half;
    half.kp.setConstant(g.kp / 2);
    half.kd.setConstant(g.kd / 2);
    half.kf.setConstant(g.kf / 2);
    CHECK((t.follower - joint_controller(leader_command(l), f, half, arm)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(leader_command(l).tau == -l.tau);
  }

  SUBCASE("follower moves with the pressed leader") {
    const JointVector q0 = inverse_kinematics(Vec3(0.35, 0.0, 0.03), arm);
    Robot leader(arm, std::nullopt, q0);
    Robot follower(arm, std::nullopt, q0);
    const TipForceField push = [](const Vec3&, const Vec3&, double) { return Vec3(0, 0, -2.0); };
    for (int k = 0; k < 100; ++k) {
      const auto t = bilateral_step(leader.response(), follower.response(), g, arm);
      leader.tick(t.leader, push);
      follower.tick(t.follower);
    }
    CHECK(leader.state().q[2] > q0[2] + 1e-3);
    CHECK(follower.state().q[2] > q0[2] + 1e-3);
    CHECK(std::abs(leader.state().q[2] - follower.state().q[2]) < 1e-3);
  }

  SUBCASE("operator feels the board") {
    BoardConfig board;
    const JointVector q0 = inverse_kinematics(Vec3(0.35, 0.0, 0.0), arm);
    Robot leader(arm, std::nullopt, q0);
    Robot follower(arm, board, q0);
    // Hold the tip in the plane; push down with 3 N.
    const OperatorGains hold{400.0, 20.0};
    const TipForceField hand = [&](const Vec3& tip, const Vec3& vel, double) {
      Vec3 f = hold.stiffness * (Vec3(0.35, 0.0, tip.z()) - tip) - hold.damping * vel;
      f.z() = -3.0;
      return f;
    };
    for (int k = 0; k < 1000; ++k) {
      const auto t = bilateral_step(leader.response(), follower.response(), g, arm);
      leader.tick(t.leader, hand);
      follower.tick(t.follower);
    }
    CHECK(follower.state().fn == doctest::Approx(3.0).epsilon(0.1));
    const double l3 = leader.response().tau[2];
    const double f3 = follower.response().tau[2];
    CHECK(l3 == doctest::Approx(-f3).epsilon(0.1));
  }
}

TEST_CASE("bilateral collection protocol") {
  const TeleopConfig cfg;
  double worst_sync = 0.0;
  double worst_force = 0.0;
  for (TaskId task : protocol_tasks()) {
    for (double h : protocol_heights()) {
      for (int trial = 0; trial < kProtocolTrials; ++trial) {
        const Episode ep = collect_bilateral({task, h, static_cast<std::uint64_t>(trial)}, cfg);
        CHECK(ep.has_commands);
        CHECK(ep.dt == kControlPeriod);
        CHECK(ep.meta.at("action_source") == "leader");
        CHECK(ep.meta.at("state_source") == "follower");
        const std::size_t skip = static_cast<std::size_t>(0.2 / kControlPeriod);
        JointVector sync = JointVector::Zero();
        JointVector force = JointVector::Zero();
        for (std::size_t k = skip; k < ep.length(); ++k) {
          const Action a = ep.action(k);
          const State s = ep.state(k);
          sync += (a.theta - s.theta).cwiseAbs();
          force += (s.tau - a.tau).cwiseAbs();  // |tau_l + tau_f|
        }
        const double n = static_cast<double>(ep.length() - skip);
        worst_sync = std::max(worst_sync, sync.maxCoeff() / n);
        worst_force = std::max(worst_force, force.maxCoeff() / n);
      }
    }
  }
  CHECK(worst_sync < 0.01);
  CHECK(worst_force < 0.1);
}

TEST_CASE("demonstration quality") {
  const TeleopConfig cfg;
  SUBCASE("circleA inks during pen-down") {
    const TaskSpec spec{TaskId::CircleA, 0.0, 1};
    const Episode ep = collect_bilateral(spec, cfg);
    const ReferencePath ref(jitter_path(stroke_library(spec.task), cfg.jitter, spec.seed), spec.board_h);
    std::size_t down = 0;
    std::size_t ink = 0;
    for (std::size_t k = 0; k < ep.length(); ++k) {
      if (!ref.at(static_cast<double>(k) * kControlPeriod).pen_down) continue;
      ++down;
      if (ep.aux(static_cast<Eigen::Index>(k), 3) >= cfg.board.ink_threshold) ++ink;
    }
    REQUIRE(down > 0);
    CHECK(static_cast<double>(ink) / static_cast<double>(down) >= 0.9);
  }
  SUBCASE("leader tracks a line") {
    const TaskSpec spec{TaskId::Line1, 0.0, 2};
    TeleopConfig quiet = cfg;
    quiet.jitter.speed_noise = 0.0;
    const Episode ep = collect_bilateral(spec, quiet);
    const ReferencePath ref(jitter_path(stroke_library(spec.task), quiet.jitter, spec.seed), spec.board_h);
    double sq = 0.0;
    std::size_t n = 0;
    for (std::size_t k = 0; k < ep.length(); ++k) {
      const auto r = ref.at(static_cast<double>(k) * kControlPeriod);
      const Vec3 tip = forward_kinematics(ep.action(k).theta, quiet.arm);
      sq += (tip.head<2>() - r.position.head<2>()).squaredNorm();
      ++n;
    }
    CHECK(std::sqrt(sq / static_cast<double>(n)) < 0.002);
  }
  SUBCASE("reproducible") {
    const TaskSpec spec{TaskId::Line3, 0.02, 4};
    CHECK(collect_bilateral(spec, cfg) == collect_bilateral(spec, cfg));
  }
}

TEST_CASE("direct teaching") {
  const TeleopConfig cfg;
  const auto [upper, ep] = direct_teach({TaskId::Char2, 0.01, 5}, cfg);
  CHECK_FALSE(ep.has_commands);
  CHECK(ep.joints.leftCols(9).isZero(0.0));
  CHECK(upper.size() == (ep.length() + 9) / 10);
  for (std::size_t i = 0; i < upper.size(); ++i) {
    CHECK(upper.theta[i] == ep.get(10 * i, Channel::ThetaRes));
  }
  BoardConfig board = cfg.board;
  board.height = 0.01;
  const auto down = upper_pen_down(upper, cfg.arm, board);
  CHECK(std::count(down.begin(), down.end(), true) > 20);
}
