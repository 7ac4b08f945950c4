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

// Hierarchical runtime: upper-layer trajectory with a 10-step hold, PID
// correction of the lower-layer input, and the 20 ms / 2 ms rate bridge.

#include <Eigen/Core>

#include <array>
#include <optional>
#include <string_view>
#include <vector>

#include "forcegen/dataset.hpp"
#include "forcegen/nn.hpp"
#include "forcegen/sim_core.hpp"
#include "forcegen/trajectory.hpp"

namespace forcegen {

inline constexpr int kRobotTicksPerPolicyTick = kLookahead;
inline constexpr double kPidDerivativeCutoff = 0.6 * 3.14159265358979323846;  // 0.3 Hz in rad/s

struct UpperSample {
  JointVector theta = JointVector::Zero();
  JointVector dtheta = JointVector::Zero();
};

struct UpperWindow {
  UpperSample ref;   // index k + 1, compared against the prediction
  UpperSample hold;  // index 10 * (floor(k / 10) + 1), frozen for ten ticks
  std::size_t ref_index = 0;
  std::size_t hold_index = 0;
};

/// Indices past the end clamp to the last sample. Throws EmptyTrajectory.
UpperWindow upper_provider(const UpperTrajectory& traj, std::size_t k);
UpperSample upper_at(const UpperTrajectory& traj, std::size_t index);

struct PidGains {
  double kp = 0.0;
  double kd = 0.0;
  double ki = 0.0;
  void validate() const;
  bool zero() const { return kp == 0.0 && kd == 0.0 && ki == 0.0; }
};

struct PidState {
  JointVector integral = JointVector::Zero();
  JointVector prev_error = JointVector::Zero();
  std::array<FilterState, kDof> u_filter{FilterState{0.0, kPidDerivativeCutoff},
                                         FilterState{0.0, kPidDerivativeCutoff},
                                         FilterState{0.0, kPidDerivativeCutoff}};
};

struct PidOutput {
  JointVector u = JointVector::Zero();
  JointVector du = JointVector::Zero();
};

/// u = Kp e + Kd de + Ki trapz(e); du is the pseudo-derivative of u.
PidOutput pid_correct(const UpperSample& ref, const UpperSample& predicted, const PidGains& g,
                      PidState& st, double dt = kPolicyPeriod);

/// Normalized 15-vector in training layout, with the corrected upper-layer input.
Eigen::VectorXd compose_input(const State& s, const UpperSample& hold, const PidOutput& pid,
                              const NormStats& norm);

struct PolicyOutput {
  Action a_hat;
  State s_hat;
  UpperSample upper_input;  // hold + PID correction fed to the network
};

struct PolicyState {
  PidState pid;
  Model::Hidden hidden;
  std::optional<State> prediction;  // s_hat for the current tick, made on the previous one
  std::size_t tick = 0;
};

PolicyState make_policy_state(const Model& model);

PolicyOutput policy_step(const Model& model, const NormStats& norm, const State& s,
                         const UpperTrajectory& traj, const PidGains& gains, PolicyState& st);

/// How a 20 ms action is spread over the ten robot ticks that follow it.
enum class RateBridge {
  Hold,    // zero-order hold of the new action
  Linear,  // ramp from the previous action to the new one
};

RateBridge parse_rate_bridge(std::string_view name);
const char* rate_bridge_name(RateBridge b);

struct RunConfig {
  ArmParams arm;
  BoardConfig board;
  JointGains joint;
  PidGains gains;
  RateBridge bridge = RateBridge::Hold;
  /// Causal first-order low-pass (rad/s) on the state the network sees; 0 disables.
  /// The default matches the cutoff applied to the training data.
  double state_cutoff = 20.0;
  double sensor_noise = 0.0;
  std::uint64_t seed = 0;
  void validate() const;
};

struct RunResult {
  Episode episode;                      // 2 ms: held command, follower response, aux
  Eigen::MatrixXd tau_ref;              // N x 3 joint torque references
  Eigen::MatrixXd upper_input;          // policy ticks x 6: corrected theta, dtheta
  Eigen::MatrixXd hold;                 // policy ticks x 6: uncorrected hold
  std::vector<Eigen::Vector2d> ink;     // tip (x, y) where fn >= ink threshold
  std::size_t policy_ticks = 0;
};

/// Autonomous run of the lower-layer network over the whole trajectory.
RunResult run_autonomous(const Model& model, const NormStats& norm, const UpperTrajectory& traj,
                         const RunConfig& cfg);
/// Angle-only replay: upper-layer angles and velocities as commands, zero force command.
RunResult run_playback(const UpperTrajectory& traj, const RunConfig& cfg);

}  // namespace forcegen
