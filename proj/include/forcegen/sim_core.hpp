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

// Rigid-body model of a 3-DOF SCARA writing robot (two revolute joints in the
// board plane, one prismatic joint along the vertical, positive down) together
// with the joint-level sensing and control that defines the robot "response".

#include <Eigen/Core>
#include <Eigen/LU>

#include <cstdint>
#include <functional>
#include <optional>
#include <random>

namespace forcegen {

/// Per-joint triple: (shoulder rad, elbow rad, vertical m). Also used for
/// velocities and for torques (N*m, N*m, N).
using JointVector = Eigen::Vector3d;
/// Cartesian point or vector in the board frame (m).
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline constexpr int kDof = 3;
inline constexpr double kControlPeriod = 0.002;
inline constexpr double kTorqueLimit = 20.0;
inline constexpr double kGravity = 9.81;

struct ArmParams {
  double link1 = 0.25;
  double link2 = 0.25;
  double mass1 = 1.0;
  double mass2 = 0.8;
  double mass3 = 0.4;  // pen carriage, point mass at the end of link 2
  double inertia1 = 1.0 * 0.25 * 0.25 / 12.0;
  double inertia2 = 0.8 * 0.25 * 0.25 / 12.0;
  JointVector rotor{0.05, 0.05, 0.0};  // reflected actuator inertia (kg*m^2, kg on j3)
  JointVector viscous{0.1, 0.1, 1.0};
  double gravity_comp = 0.4 * kGravity;
  double dt_phys = 0.0002;
  double dt_ctrl = kControlPeriod;
  double tip_z0 = 0.05;  // tip height at q3 = 0
  double velocity_cutoff = 200.0;  // rad/s
  double observer_cutoff = 200.0;  // rad/s

  /// Throws ConfigError when an invariant is violated.
  void validate() const;
  int substeps() const;
  /// Constant force holding the carriage against gravity.
  JointVector gravity_feedforward() const { return {0.0, 0.0, -gravity_comp}; }
  /// Diagonal inertia used by the observers (planar block at q2 = pi/2).
  JointVector nominal_inertia() const;
};

struct BoardConfig {
  double height = 0.0;
  double normal_stiffness = 5000.0;
  double normal_damping = 50.0;
  double friction = 0.3;
  double ink_threshold = 0.3;

  void validate() const;
};

struct ContactForce {
  double normal = 0.0;
  Eigen::Vector2d tangential = Eigen::Vector2d::Zero();
};

struct RobotState {
  JointVector q = JointVector::Zero();
  JointVector dq = JointVector::Zero();
  JointVector dq_hat = JointVector::Zero();
  JointVector tau_ext_hat = JointVector::Zero();
  Vec3 tip = Vec3::Zero();
  double fn = 0.0;
  double t = 0.0;
};

/// Command triple sent to a joint controller.
struct Action {
  JointVector theta = JointVector::Zero();
  JointVector dtheta = JointVector::Zero();
  JointVector tau = JointVector::Zero();
};

/// Measured response triple: angle, pseudo-differentiated velocity, and
/// observer torque.
struct State {
  JointVector theta = JointVector::Zero();
  JointVector dtheta = JointVector::Zero();
  JointVector tau = JointVector::Zero();
};

/// Force applied at the pen tip by something outside the robot (an operator's
/// hand), evaluated at every physics substep from the tip position/velocity.
using TipForceField = std::function<Vec3(const Vec3& tip, const Vec3& tip_vel, double t)>;

JointVector clamp_workspace(const JointVector& q);
Vec3 forward_kinematics(const JointVector& q, const ArmParams& arm);
Mat3 jacobian(const JointVector& q, const ArmParams& arm);
/// Elbow-up (q2 > 0) inverse kinematics; z maps to q3 and is clamped.
JointVector inverse_kinematics(const Vec3& tip, const ArmParams& arm);
Eigen::Matrix2d planar_mass_matrix(double q2, const ArmParams& arm);
double kinetic_energy(const RobotState& s, const ArmParams& arm);

/// Penalty contact of the pen against a horizontal board. tip_vel.z() is dz/dt.
ContactForce contact_force(const Vec3& tip, const Vec3& tip_vel, const BoardConfig& board);

/// Integrates the dynamics for one control period under a zero-order-held
/// torque reference. dq_hat and tau_ext_hat are passed through untouched.
/// Throws NonFinite if the state blows up.
RobotState step_dynamics(const RobotState& state, const JointVector& tau_ref,
                         const BoardConfig* board, const ArmParams& arm,
                         const TipForceField& external = {});

struct FilterState {
  double x = 0.0;       // low-passed copy of the input
  double cutoff = 1.0;  // rad/s
};

/// Discrete g*s/(s+g): y = g*(u - x); x += dt*y.
double pseudo_diff(double input, FilterState& fs, double dt);

/// Pseudo-differentiation applied independently to each joint.
class JointDifferentiator {
 public:
  explicit JointDifferentiator(double cutoff);
  void reset(const JointVector& value);
  JointVector update(const JointVector& value, double dt);

 private:
  std::array<FilterState, kDof> filters_;
};

/// First-order reaction force observer. The estimate is the external
/// generalized force acting on each joint: pressing the pen into the board
/// with normal force fn reads as -fn on the vertical joint.
class ReactionForceObserver {
 public:
  ReactionForceObserver(const JointVector& nominal_inertia, const JointVector& viscous,
                        double cutoff = 30.0);
  void reset();
  /// tau_ref_net is the applied torque with the gravity feedforward removed.
  JointVector update(const JointVector& tau_ref_net, const JointVector& dq_hat, double dt);
  const JointVector& estimate() const { return estimate_; }

 private:
  JointVector inertia_;
  JointVector viscous_;
  double cutoff_;
  JointVector lowpass_ = JointVector::Zero();
  JointVector estimate_ = JointVector::Zero();
};

struct JointGains {
  JointVector kp{100.0, 100.0, 100.0};
  JointVector kd{10.0, 10.0, 10.0};
  JointVector kf{1.0, 1.0, 1.0};
};

/// Hybrid position/force law with disturbance compensation:
///   tau_ref = Kp (theta_cmd - theta) + Kd (dtheta_cmd - dtheta)
///             - Kf (tau_cmd - tau_ext_hat) - tau_ext_hat + g_ff
/// The force objective is tau_ext_hat -> tau_cmd. Clamped to +-kTorqueLimit.
JointVector joint_controller(const Action& a, const State& s, const JointGains& gains,
                             const ArmParams& arm);

struct SensorNoise {
  double angle_std = 0.0;     // rad (and m for the prismatic joint)
  std::uint64_t seed = 0;
};

/// One simulated robot: physics plus encoders, velocity pseudo-differentiation
/// and the reaction force observer. tick() advances one control period.
class Robot {
 public:
  Robot(const ArmParams& arm, std::optional<BoardConfig> board, const JointVector& q0,
        SensorNoise noise = {});

  const RobotState& state() const { return state_; }
  const ArmParams& arm() const { return arm_; }
  const std::optional<BoardConfig>& board() const { return board_; }
  /// Measured response at the current tick.
  State response() const;
  std::size_t ticks() const { return ticks_; }
  const JointVector& last_tau_ref() const { return last_tau_ref_; }

  void tick(const JointVector& tau_ref, const TipForceField& external = {});

 private:
  ArmParams arm_;
  std::optional<BoardConfig> board_;
  RobotState state_;
  JointDifferentiator velocity_;
  ReactionForceObserver observer_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> noise_;
  double noise_std_;
  JointVector measured_q_ = JointVector::Zero();
  JointVector last_tau_ref_ = JointVector::Zero();
  std::size_t ticks_ = 0;
};

}  // namespace forcegen
