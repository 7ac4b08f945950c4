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

#include "forcegen/teleop.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

namespace forcegen {

namespace {

using Poly = std::vector<Eigen::Vector2d>;
constexpr double kPi = std::numbers::pi;
constexpr double kGlyphHeight = 0.06;
constexpr double kSmallGlyphHeight = 0.02;

struct TaskEntry {
  TaskId id;
  std::string_view name;
};

constexpr TaskEntry kTasks[] = {
    {TaskId::Line1, "line1"},     {TaskId::Line2, "line2"},     {TaskId::Line3, "line3"},
    {TaskId::Line4, "line4"},     {TaskId::Line5, "line5"},     {TaskId::CircleA, "circleA"},
    {TaskId::CircleB, "circleB"}, {TaskId::CharA, "charA"},     {TaskId::CharB, "charB"},
    {TaskId::Char2, "char2"},     {TaskId::Char3, "char3"},     {TaskId::StringABCD, "stringABCD"},
};

Poly arc(double cx, double cy, double rx, double ry, double from_deg, double to_deg, int n) {
  Poly p;
  for (int i = 0; i <= n; ++i) {
    const double a = (from_deg + (to_deg - from_deg) * i / n) * kPi / 180.0;
    p.emplace_back(cx + rx * std::cos(a), cy + ry * std::sin(a));
  }
  return p;
}

Poly concat(Poly a, const Poly& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

// Glyph strokes in a unit box: x in [0, 0.6], y in [0, 1], origin bottom-left.
std::vector<Poly> glyph(char c) {
  switch (c) {
    case 'A':
      return {{{0, 0}, {0.3, 1}, {0.6, 0}}, {{0.12, 0.4}, {0.48, 0.4}}};
    case 'B':
      return {concat({{0, 0}, {0, 1}, {0.3, 1}}, concat(arc(0.3, 0.76, 0.24, 0.24, 90, -90, 6), {{0, 0.52}})),
              concat({{0, 0.52}, {0.32, 0.52}}, concat(arc(0.32, 0.26, 0.28, 0.26, 90, -90, 6), {{0, 0}}))};
    case 'C':
      return {arc(0.32, 0.5, 0.3, 0.5, 50, 310, 12)};
    case 'D':
      return {concat({{0, 0}, {0, 1}, {0.25, 1}}, concat(arc(0.25, 0.5, 0.35, 0.5, 90, -90, 10), {{0, 0}}))};
    case '2':
      return {{{0.03, 0.78}, {0.12, 0.93}, {0.3, 1.0}, {0.48, 0.94}, {0.57, 0.78}, {0.52, 0.6},
               {0.35, 0.42}, {0, 0}, {0.6, 0}}};
    case '3':
      return {{{0.03, 0.88}, {0.2, 1.0}, {0.42, 0.98}, {0.56, 0.84}, {0.52, 0.66}, {0.3, 0.54},
               {0.52, 0.44}, {0.6, 0.26}, {0.52, 0.08}, {0.3, 0.0}, {0.03, 0.1}}};
    default:
      throw UnknownTask(std::string("no glyph for '") + c + "'");
  }
}

std::vector<Poly> place(const std::vector<Poly>& strokes, const Eigen::Vector2d& origin, double h) {
  std::vector<Poly> out;
  for (const auto& s : strokes) {
    Poly p;
    for (const auto& v : s) p.push_back(origin + h * v);
    out.push_back(std::move(p));
  }
  return out;
}

// Pen-down strokes joined by pen-up travel.
StrokePath connect(const std::vector<Poly>& strokes, double speed) {
  StrokePath path;
  for (std::size_t i = 0; i < strokes.size(); ++i) {
    if (i > 0) {
      StrokeSegment up;
      up.pen_up = true;
      up.speed = ReferencePath::kTravelSpeed;
      up.polyline = {strokes[i - 1].back(), strokes[i].front()};
      path.segments.push_back(up);
    }
    StrokeSegment down;
    down.polyline = strokes[i];
    down.speed = speed;
    path.segments.push_back(down);
  }
  return path;
}

StrokePath line(const Eigen::Vector2d& from, const Eigen::Vector2d& to) {
  return connect({{kWritingCenter + from, kWritingCenter + to}}, 0.05);
}

StrokePath circle(double r) {
  Poly p;
  for (int i = 0; i <= 64; ++i) {
    const double a = kPi / 2 + 2 * kPi * i / 64;
    p.emplace_back(kWritingCenter.x() + r * std::cos(a), kWritingCenter.y() + r * std::sin(a));
  }
  p.back() = p.front();
  return connect({p}, 0.05);
}

StrokePath single_glyph(char c) {
  const Eigen::Vector2d origin = kWritingCenter - Eigen::Vector2d(0.3, 0.5) * kGlyphHeight;
  return connect(place(glyph(c), origin, kGlyphHeight), 0.05);
}

StrokePath glyph_block() {
  const double h = kSmallGlyphHeight;
  const double advance = 0.9 * h;
  const double row_pitch = 1.5 * h;
  const double width = 3 * advance + 0.6 * h;
  const double height = 3 * row_pitch + h;
  std::vector<Poly> strokes;
  for (int row = 0; row < 4; ++row) {
    for (int col = 0; col < 4; ++col) {
      const Eigen::Vector2d origin =
          kWritingCenter + Eigen::Vector2d(-width / 2 + col * advance, height / 2 - h - row * row_pitch);
      for (auto& s : place(glyph("ABCD"[col]), origin, h)) strokes.push_back(std::move(s));
    }
  }
  return connect(strokes, 0.03);
}

}  // namespace

std::string_view task_name(TaskId id) {
  for (const auto& t : kTasks) {
    if (t.id == id) return t.name;
  }
  throw UnknownTask("unknown task id");
}

TaskId parse_task(std::string_view name) {
  for (const auto& t : kTasks) {
    if (t.name == name) return t.id;
  }
  throw UnknownTask("unknown task '" + std::string(name) + "'");
}

const std::vector<TaskId>& protocol_tasks() {
  static const std::vector<TaskId> tasks{TaskId::Line1, TaskId::Line2,   TaskId::Line3,
                                         TaskId::Line4, TaskId::Line5,   TaskId::CircleA,
                                         TaskId::CircleB};
  return tasks;
}

const std::vector<double>& protocol_heights() {
  static const std::vector<double> h{0.0, 0.02};
  return h;
}

double StrokePath::length(bool pen_down_only) const {
  double len = 0;
  for (const auto& s : segments) {
    if (pen_down_only && s.pen_up) continue;
    for (std::size_t i = 1; i < s.polyline.size(); ++i) len += (s.polyline[i] - s.polyline[i - 1]).norm();
  }
  return len;
}

StrokePath stroke_library(TaskId id) {
  const double d = 0.03;
  const double e = d / std::sqrt(2.0);
  switch (id) {
    case TaskId::Line1: return line({-d, 0}, {d, 0});
    case TaskId::Line2: return line({0, d}, {0, -d});
    case TaskId::Line3: return line({-e, e}, {e, -e});
    case TaskId::Line4: return line({-e, -e}, {e, e});
    case TaskId::Line5: return line({d, 0}, {-d, 0});
    case TaskId::CircleA: return circle(0.03);
    case TaskId::CircleB: return circle(0.04);
    case TaskId::CharA: return single_glyph('A');
    case TaskId::CharB: return single_glyph('B');
    case TaskId::Char2: return single_glyph('2');
    case TaskId::Char3: return single_glyph('3');
    case TaskId::StringABCD: return glyph_block();
  }
  throw UnknownTask("unknown task id");
}

StrokePath jitter_path(const StrokePath& path, const JitterConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const double speed_scale = 1.0 + cfg.speed_noise * unit(rng);
  const double depth = cfg.press_depth * (1.0 + 0.1 * unit(rng));
  StrokePath out = path;
  for (auto& seg : out.segments) {
    if (seg.pen_up) continue;
    seg.speed *= speed_scale;
    seg.press_depth = depth;
    const Eigen::Vector2d shift(cfg.point_noise * unit(rng), cfg.point_noise * unit(rng));
    // Dense polylines (circles, arcs) move rigidly; sparse ones get per-vertex noise.
    const bool rigid = seg.polyline.size() > 16;
    for (auto& v : seg.polyline) {
      if (rigid) {
        v += 0.5 * shift;
      } else {
        v += Eigen::Vector2d(cfg.point_noise * unit(rng), cfg.point_noise * unit(rng)) * 0.5 + 0.5 * shift;
      }
    }
  }
  for (std::size_t i = 0; i < out.segments.size(); ++i) {
    auto& seg = out.segments[i];
    if (!seg.pen_up || i == 0 || i + 1 >= out.segments.size()) continue;
    seg.polyline = {out.segments[i - 1].polyline.back(), out.segments[i + 1].polyline.front()};
  }
  return out;
}

ReferencePath::ReferencePath(const StrokePath& path, double board_h) {
  const double z_up = board_h + kLift;
  const StrokeSegment* first = nullptr;
  for (const auto& s : path.segments) {
    if (!s.pen_up && !s.polyline.empty()) {
      first = &s;
      break;
    }
  }
  if (first == nullptr) throw EmptyTrajectory("reference path has no pen-down segment");
  const Vec3 start(first->polyline.front().x(), first->polyline.front().y(), z_up);
  points_.push_back(start);
  times_.push_back(0.0);
  points_.push_back(start);
  times_.push_back(kStartHold);
  pen_down_.push_back(false);

  for (const auto& seg : path.segments) {
    if (seg.polyline.empty()) continue;
    if (seg.pen_up) {
      for (const auto& v : seg.polyline) add({v.x(), v.y(), z_up}, kTravelSpeed, false);
      continue;
    }
    const Eigen::Vector2d& s0 = seg.polyline.front();
    add({s0.x(), s0.y(), z_up}, kTravelSpeed, false);
    const double z_down = board_h - seg.press_depth;
    add({s0.x(), s0.y(), z_down}, kVerticalSpeed, false);
    for (const auto& v : seg.polyline) add({v.x(), v.y(), z_down}, seg.speed, true);
    const Eigen::Vector2d& s1 = seg.polyline.back();
    add({s1.x(), s1.y(), z_up}, kVerticalSpeed, false);
  }
}

void ReferencePath::add(const Vec3& p, double speed, bool pen_down) {
  const double dist = (p - points_.back()).norm();
  if (dist < 1e-12) return;
  points_.push_back(p);
  times_.push_back(times_.back() + dist / speed);
  pen_down_.push_back(pen_down);
}

ReferencePath::Sample ReferencePath::at(double t) const {
  if (t <= 0.0) return {points_.front(), Vec3::Zero(), false};
  if (t >= times_.back()) return {points_.back(), Vec3::Zero(), false};
  const auto it = std::upper_bound(times_.begin(), times_.end(), t);
  const std::size_t i = static_cast<std::size_t>(it - times_.begin()) - 1;
  const double span = times_[i + 1] - times_[i];
  const Vec3 vel = (points_[i + 1] - points_[i]) / span;
  return {points_[i] + vel * (t - times_[i]), vel, pen_down_[i]};
}

Vec3 operator_force(const Vec3& tip, const Vec3& tip_vel, const ReferencePath::Sample& ref,
                    const OperatorGains& gains) {
  return gains.stiffness * (ref.position - tip) + gains.damping * (ref.velocity - tip_vel);
}

JointVector scripted_operator(const RobotState& robot, const ReferencePath& path, double t,
                              const OperatorGains& gains, const ArmParams& arm) {
  const Mat3 jac = jacobian(robot.q, arm);
  const Vec3 f = operator_force(forward_kinematics(robot.q, arm), jac * robot.dq, path.at(t), gains);
  return jac.transpose() * f;
}

BilateralTorques bilateral_step(const State& leader, const State& follower,
                                const BilateralGains& g, const ArmParams& arm) {
  const JointVector position = g.kp * (leader.theta - follower.theta) +
                               g.kd * (leader.dtheta - follower.dtheta);
  const JointVector force = g.kf * (leader.tau + follower.tau);
  const JointVector ff = arm.gravity_feedforward();
  auto clamp = [](const JointVector& v) { return JointVector(v.cwiseMax(-kTorqueLimit).cwiseMin(kTorqueLimit)); };
  return {clamp(-0.5 * position + 0.5 * force - leader.tau + ff),
          clamp(0.5 * position + 0.5 * force - follower.tau + ff)};
}

Action leader_command(const State& leader) { return {leader.theta, leader.dtheta, -leader.tau}; }

double family_duration(TaskId id, const JitterConfig& jitter) {
  std::vector<TaskId> family;
  switch (id) {
    case TaskId::Line1: case TaskId::Line2: case TaskId::Line3: case TaskId::Line4: case TaskId::Line5:
      family = {TaskId::Line1, TaskId::Line2, TaskId::Line3, TaskId::Line4, TaskId::Line5};
      break;
    case TaskId::CircleA: case TaskId::CircleB:
      family = {TaskId::CircleA, TaskId::CircleB};
      break;
    default:
      family = {id};
  }
  double longest = 0.0;
  for (TaskId t : family) {
    StrokePath slow = stroke_library(t);
    for (auto& s : slow.segments) {
      if (!s.pen_up) s.speed *= 1.0 - jitter.speed_noise;
      s.press_depth = jitter.press_depth * 1.1;
    }
    longest = std::max(longest, ReferencePath(slow, 0.0).duration());
  }
  // Slack for the jittered path length.
  return std::ceil((longest * 1.05 + 0.2) / kPolicyPeriod) * kPolicyPeriod;
}

std::string format_height(double h) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", h);
  return buf;
}

std::map<std::string, std::string> task_meta(const TaskSpec& task) {
  return {{"task", std::string(task_name(task.task))},
          {"board_h", format_height(task.board_h)},
          {"seed", std::to_string(task.seed)}};
}

Episode collect_bilateral(const TaskSpec& task, const TeleopConfig& cfg) {
  BoardConfig board = cfg.board;
  board.height = task.board_h;
  const ReferencePath ref(jitter_path(stroke_library(task.task), cfg.jitter, task.seed), task.board_h);
  const JointVector q0 = inverse_kinematics(ref.start(), cfg.arm);
  Robot leader(cfg.arm, std::nullopt, q0, {cfg.sensor_noise, 2 * task.seed + 1});
  Robot follower(cfg.arm, board, q0, {cfg.sensor_noise, 2 * task.seed + 2});

  const auto n = static_cast<std::size_t>(std::lround(family_duration(task.task, cfg.jitter) / cfg.arm.dt_ctrl));
  Episode ep = Episode::with_length(n);
  ep.meta = task_meta(task);
  ep.meta["source"] = "bilateral";
  ep.meta["action_source"] = "leader";
  ep.meta["state_source"] = "follower";

  const TipForceField hand = [&](const Vec3& tip, const Vec3& vel, double t) {
    return operator_force(tip, vel, ref.at(t), cfg.op);
  };
  for (std::size_t k = 0; k < n; ++k) {
    const State sl = leader.response();
    const State sf = follower.response();
    ep.set_action(k, leader_command(sl));
    ep.set_state(k, sf);
    const RobotState& fs = follower.state();
    ep.aux.row(static_cast<Eigen::Index>(k)) << fs.tip.x(), fs.tip.y(), fs.tip.z(), fs.fn;
    const BilateralTorques tau = bilateral_step(sl, sf, cfg.bilateral, cfg.arm);
    leader.tick(tau.leader, hand);
    follower.tick(tau.follower);
  }
  return ep;
}

std::pair<UpperTrajectory, Episode> direct_teach(const TaskSpec& task, const TeleopConfig& cfg) {
  BoardConfig board = cfg.board;
  board.height = task.board_h;
  const ReferencePath ref(jitter_path(stroke_library(task.task), cfg.jitter, task.seed), task.board_h);
  Robot robot(cfg.arm, board, inverse_kinematics(ref.start(), cfg.arm),
              {cfg.sensor_noise, 2 * task.seed + 2});

  const auto n = static_cast<std::size_t>(std::lround(family_duration(task.task, cfg.jitter) / cfg.arm.dt_ctrl));
  Episode ep = Episode::with_length(n, false);
  ep.meta = task_meta(task);
  ep.meta["source"] = "direct_teach";
  ep.meta["state_source"] = "follower";

  const TipForceField hand = [&](const Vec3& tip, const Vec3& vel, double t) {
    return operator_force(tip, vel, ref.at(t), cfg.teach_op);
  };
  for (std::size_t k = 0; k < n; ++k) {
    ep.set_state(k, robot.response());
    const RobotState& s = robot.state();
    ep.aux.row(static_cast<Eigen::Index>(k)) << s.tip.x(), s.tip.y(), s.tip.z(), s.fn;
    robot.tick(cfg.arm.gravity_feedforward(), hand);
  }
  UpperTrajectory upper = UpperTrajectory::from_responses(ep);
  upper.meta = ep.meta;
  return {std::move(upper), std::move(ep)};
}

}  // namespace forcegen
