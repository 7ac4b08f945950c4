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

#pragma once

// Demonstration sources: a scripted operator that writes glyphs, the
// four-channel bilateral coupling between a leader and a follower robot, and
// direct teaching of the follower alone.

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "forcegen/dataset.hpp"
#include "forcegen/sim_core.hpp"
#include "forcegen/trajectory.hpp"

namespace forcegen {

enum class TaskId {
  Line1, Line2, Line3, Line4, Line5,
  CircleA, CircleB,
  CharA, CharB, Char2, Char3, StringABCD,
};

class UnknownTask : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

std::string_view task_name(TaskId id);
TaskId parse_task(std::string_view name);
/// The seven demonstration tasks (five lines, two circles).
const std::vector<TaskId>& protocol_tasks();
/// Board heights used for demonstrations.
const std::vector<double>& protocol_heights();
inline constexpr int kProtocolTrials = 5;

struct StrokeSegment {
  std::vector<Eigen::Vector2d> polyline;  // board coordinates (m)
  double press_depth = 0.004;
  double speed = 0.05;
  bool pen_up = false;
};

struct StrokePath {
  std::vector<StrokeSegment> segments;
  double length(bool pen_down_only = true) const;
};

/// Center of the writing area in the board frame.
inline const Eigen::Vector2d kWritingCenter{0.35, 0.0};

StrokePath stroke_library(TaskId id);

struct TaskSpec {
  TaskId task = TaskId::CircleA;
  double board_h = 0.0;
  std::uint64_t seed = 0;
};

struct JitterConfig {
  double point_noise = 0.002;  // uniform +- (m)
  double speed_noise = 0.10;   // relative, uniform +-
  double press_depth = 0.004;
};

/// Perturbs a path the way a human would vary between trials. Deterministic per seed.
StrokePath jitter_path(const StrokePath& path, const JitterConfig& cfg, std::uint64_t seed);

/// Time-parameterized operator target built from a stroke path: lowers the pen
/// at the start of each pen-down segment, traces it, and lifts it again.
class ReferencePath {
 public:
  static constexpr double kLift = 0.01;
  static constexpr double kVerticalSpeed = 0.04;
  static constexpr double kTravelSpeed = 0.08;
  static constexpr double kStartHold = 0.2;
  static constexpr double kEndHold = 0.3;

  ReferencePath(const StrokePath& path, double board_h);

  struct Sample {
    Vec3 position;
    Vec3 velocity;
    bool pen_down = false;
  };
  Sample at(double t) const;
  double duration() const { return times_.back() + kEndHold; }
  Vec3 start() const { return points_.front(); }

 private:
  void add(const Vec3& p, double speed, bool pen_down);
  std::vector<Vec3> points_;
  std::vector<double> times_;
  std::vector<bool> pen_down_;  // segment i -> i+1
};

struct OperatorGains {
  double stiffness = 400.0;  // N/m
  double damping = 20.0;     // N*s/m
};

/// Impedance pull of the operator's hand toward the reference.
Vec3 operator_force(const Vec3& tip, const Vec3& tip_vel, const ReferencePath::Sample& ref,
                    const OperatorGains& gains);
/// The same pull expressed as joint torques of the robot being held.
JointVector scripted_operator(const RobotState& robot, const ReferencePath& path, double t,
                              const OperatorGains& gains, const ArmParams& arm);

struct BilateralGains {
  double kp = 200.0;
  double kd = 20.0;
  double kf = 2.0;
};

struct BilateralTorques {
  JointVector leader;
  JointVector follower;
};

/// Symmetric four-channel law. Position error e = theta_l - theta_f is driven to
/// zero in the differential mode and tau_l + tau_f to zero in the common mode;
/// each side compensates its own observed external torque.
BilateralTorques bilateral_step(const State& leader, const State& follower,
                                const BilateralGains& g, const ArmParams& arm);

/// Follower-side command equivalent to the bilateral law: what the follower's
/// joint controller receives when the leader is replaced by a policy.
Action leader_command(const State& leader);

struct TeleopConfig {
  ArmParams arm;
  BoardConfig board;
  BilateralGains bilateral;
  OperatorGains op;
  OperatorGains teach_op{800.0, 40.0};
  JitterConfig jitter;
  double sensor_noise = 0.0;
};

/// Duration every episode of a task family is padded to (lines, circles, glyphs).
double family_duration(TaskId id, const JitterConfig& jitter);

/// Leader is driven by the scripted operator in free space; the follower
/// writes on the board. Action = leader response, State = follower response.
Episode collect_bilateral(const TaskSpec& task, const TeleopConfig& cfg);

/// The operator guides the follower alone (robot in gravity compensation).
/// Returns the response-only episode and its 20 ms decimation.
std::pair<UpperTrajectory, Episode> direct_teach(const TaskSpec& task, const TeleopConfig& cfg);

/// Metadata key/values shared by all episodes of a task.
std::map<std::string, std::string> task_meta(const TaskSpec& task);
std::string format_height(double h);

}  // namespace forcegen
