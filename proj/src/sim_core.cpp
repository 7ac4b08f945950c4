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

#include "forcegen/sim_core.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "forcegen/errors.hpp"

namespace forcegen {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kStrokeMax = 0.1;

bool all_finite(const JointVector& v) { return v.allFinite(); }

}  // namespace

void ArmParams::validate() const {
  if (!(link1 > 0 && link2 > 0 && mass1 > 0 && mass2 > 0 && mass3 > 0 && inertia1 > 0 &&
        inertia2 > 0)) {
    throw ConfigError("arm: masses, inertias and link lengths must be positive");
  }
  if ((rotor.array() < 0).any()) throw ConfigError("arm: rotor inertia must be >= 0");
  if (!(velocity_cutoff > 0 && observer_cutoff > 0)) throw ConfigError("arm: cutoffs must be > 0");
  if ((viscous.array() < 0).any()) throw ConfigError("arm: viscous friction must be >= 0");
  if (std::abs(dt_ctrl - kControlPeriod) > 1e-15) {
    throw ConfigError("arm: dt_ctrl must be exactly 0.002 s");
  }
  if (!(dt_phys > 0) || dt_phys > dt_ctrl) throw ConfigError("arm: dt_phys out of range");
  const double ratio = dt_ctrl / dt_phys;
  if (std::abs(ratio - std::round(ratio)) > 1e-9) {
    throw ConfigError("arm: dt_phys must divide dt_ctrl");
  }
}

int ArmParams::substeps() const { return static_cast<int>(std::lround(dt_ctrl / dt_phys)); }

JointVector ArmParams::nominal_inertia() const {
  const Eigen::Matrix2d m = planar_mass_matrix(kPi / 2.0, *this);
  return {m(0, 0), m(1, 1), mass3 + rotor[2]};
}

void BoardConfig::validate() const {
  if (!(normal_stiffness > 0)) throw ConfigError("board: k_n must be > 0");
  if (!(normal_damping >= 0)) throw ConfigError("board: d_n must be >= 0");
  if (!(friction >= 0 && friction < 1)) throw ConfigError("board: mu must be in [0, 1)");
  if (!(ink_threshold > 0)) throw ConfigError("board: ink_threshold must be > 0");
}

JointVector clamp_workspace(const JointVector& q) {
  return {std::clamp(q[0], -kPi, kPi), std::clamp(q[1], -kPi, kPi),
          std::clamp(q[2], 0.0, kStrokeMax)};
}

Vec3 forward_kinematics(const JointVector& q, const ArmParams& arm) {
  const double c1 = std::cos(q[0]);
  const double s1 = std::sin(q[0]);
  const double c12 = std::cos(q[0] + q[1]);
  const double s12 = std::sin(q[0] + q[1]);
  return {arm.link1 * c1 + arm.link2 * c12, arm.link1 * s1 + arm.link2 * s12,
          arm.tip_z0 - q[2]};
}

Mat3 jacobian(const JointVector& q, const ArmParams& arm) {
  const double s1 = std::sin(q[0]);
  const double c1 = std::cos(q[0]);
  const double s12 = std::sin(q[0] + q[1]);
  const double c12 = std::cos(q[0] + q[1]);
  Mat3 j;
  j << -arm.link1 * s1 - arm.link2 * s12, -arm.link2 * s12, 0.0,
       arm.link1 * c1 + arm.link2 * c12, arm.link2 * c12, 0.0,
       0.0, 0.0, -1.0;
  return j;
}

JointVector inverse_kinematics(const Vec3& tip, const ArmParams& arm) {
  const double r2 = tip.x() * tip.x() + tip.y() * tip.y();
  const double l1 = arm.link1;
  const double l2 = arm.link2;
  double c2 = (r2 - l1 * l1 - l2 * l2) / (2.0 * l1 * l2);
  c2 = std::clamp(c2, -1.0, 1.0);
  const double q2 = std::acos(c2);
  const double q1 = std::atan2(tip.y(), tip.x()) - std::atan2(l2 * std::sin(q2), l1 + l2 * c2);
  return clamp_workspace({q1, q2, arm.tip_z0 - tip.z()});
}

Eigen::Matrix2d planar_mass_matrix(double q2, const ArmParams& arm) {
  const double lc1 = arm.link1 / 2.0;
  const double lc2 = arm.link2 / 2.0;
  const double a1 = arm.inertia1 + arm.mass1 * lc1 * lc1 + arm.inertia2 +
                    arm.mass2 * (arm.link1 * arm.link1 + lc2 * lc2) +
                    arm.mass3 * (arm.link1 * arm.link1 + arm.link2 * arm.link2);
  const double a2 = arm.mass2 * arm.link1 * lc2 + arm.mass3 * arm.link1 * arm.link2;
  const double a3 = arm.inertia2 + arm.mass2 * lc2 * lc2 + arm.mass3 * arm.link2 * arm.link2;
  const double c2 = std::cos(q2);
  Eigen::Matrix2d m;
  m << a1 + 2.0 * a2 * c2 + arm.rotor[0], a3 + a2 * c2, a3 + a2 * c2, a3 + arm.rotor[1];
  return m;
}

double kinetic_energy(const RobotState& s, const ArmParams& arm) {
  const Eigen::Vector2d w = s.dq.head<2>();
  return 0.5 * w.dot(planar_mass_matrix(s.q[1], arm) * w) + 0.5 * (arm.mass3 + arm.rotor[2]) * s.dq[2] * s.dq[2];
}

ContactForce contact_force(const Vec3& tip, const Vec3& tip_vel, const BoardConfig& board) {
  ContactForce f;
  const double penetration = std::max(0.0, board.height - tip.z());
  if (penetration <= 0.0) return f;
  f.normal = std::max(0.0, board.normal_stiffness * penetration -
                               board.normal_damping * tip_vel.z());
  if (f.normal > 0.0) {
    const Eigen::Vector2d v = tip_vel.head<2>();
    f.tangential = -board.friction * f.normal * v / (v.norm() + 1e-3);
  }
  return f;
}

RobotState step_dynamics(const RobotState& state, const JointVector& tau_ref,
                         const BoardConfig* board, const ArmParams& arm,
                         const TipForceField& external) {
  if (!all_finite(tau_ref)) throw NonFinite("step_dynamics: non-finite torque reference", 0);
  const JointVector tau = tau_ref.cwiseMax(-kTorqueLimit).cwiseMin(kTorqueLimit);
  const int n = arm.substeps();
  const double h = arm.dt_phys;
  const double a2 = arm.mass2 * arm.link1 * arm.link2 / 2.0 + arm.mass3 * arm.link1 * arm.link2;

  RobotState s = state;
  for (int i = 0; i < n; ++i) {
    const Vec3 tip = forward_kinematics(s.q, arm);
    const Mat3 jac = jacobian(s.q, arm);
    const Vec3 tip_vel = jac * s.dq;
    Vec3 force = Vec3::Zero();
    if (board != nullptr) {
      const ContactForce c = contact_force(tip, tip_vel, *board);
      force << c.tangential.x(), c.tangential.y(), c.normal;
    }
    if (external) force += external(tip, tip_vel, s.t + i * h);
    const JointVector generalized = jac.transpose() * force;

    // Planar 2R block; the vertical joint is decoupled.
    const double hq = a2 * std::sin(s.q[1]);
    const Eigen::Vector2d coriolis(-hq * (2.0 * s.dq[0] * s.dq[1] + s.dq[1] * s.dq[1]),
                                   hq * s.dq[0] * s.dq[0]);
    const Eigen::Vector2d rhs = tau.head<2>() + generalized.head<2>() - coriolis -
                                arm.viscous.head<2>().cwiseProduct(s.dq.head<2>());
    const Eigen::Vector2d ddq12 = planar_mass_matrix(s.q[1], arm).inverse() * rhs;
    const double ddq3 = (tau[2] + generalized[2] + arm.mass3 * kGravity -
                         arm.viscous[2] * s.dq[2]) / (arm.mass3 + arm.rotor[2]);

    s.dq[0] += h * ddq12[0];
    s.dq[1] += h * ddq12[1];
    s.dq[2] += h * ddq3;
    s.q += h * s.dq;

    const JointVector clamped = clamp_workspace(s.q);
    for (int j = 0; j < kDof; ++j) {
      if (clamped[j] != s.q[j]) {
        s.q[j] = clamped[j];
        s.dq[j] = 0.0;
      }
    }
  }
  s.t = state.t + arm.dt_ctrl;
  s.tip = forward_kinematics(s.q, arm);
  s.fn = 0.0;
  if (board != nullptr) {
    s.fn = contact_force(s.tip, jacobian(s.q, arm) * s.dq, *board).normal;
  }
  if (!all_finite(s.q) || !all_finite(s.dq)) {
    throw NonFinite("step_dynamics: state diverged", 0);
  }
  return s;
}

double pseudo_diff(double input, FilterState& fs, double dt) {
  const double y = fs.cutoff * (input - fs.x);
  fs.x += dt * y;
  return y;
}

JointDifferentiator::JointDifferentiator(double cutoff) {
  for (auto& f : filters_) f.cutoff = cutoff;
}

void JointDifferentiator::reset(const JointVector& value) {
  for (int j = 0; j < kDof; ++j) filters_[j].x = value[j];
}

JointVector JointDifferentiator::update(const JointVector& value, double dt) {
  JointVector out;
  for (int j = 0; j < kDof; ++j) out[j] = pseudo_diff(value[j], filters_[j], dt);
  return out;
}

ReactionForceObserver::ReactionForceObserver(const JointVector& nominal_inertia,
                                             const JointVector& viscous, double cutoff)
    : inertia_(nominal_inertia), viscous_(viscous), cutoff_(cutoff) {}

void ReactionForceObserver::reset() {
  lowpass_.setZero();
  estimate_.setZero();
}

JointVector ReactionForceObserver::update(const JointVector& tau_ref_net,
                                          const JointVector& dq_hat, double dt) {
  // tau_ext = J ddq + b dq - tau; the acceleration is never formed explicitly:
  // LPF(J ddq) = g J dq - LPF(g J dq).
  const JointVector momentum = cutoff_ * inertia_.cwiseProduct(dq_hat);
  const JointVector input = tau_ref_net + momentum - viscous_.cwiseProduct(dq_hat);
  lowpass_ += dt * cutoff_ * (input - lowpass_);
  estimate_ = momentum - lowpass_;
  return estimate_;
}

JointVector joint_controller(const Action& a, const State& s, const JointGains& gains,
                             const ArmParams& arm) {
  const JointVector force_error = a.tau - s.tau;
  const JointVector tau = gains.kp.cwiseProduct(a.theta - s.theta) +
                          gains.kd.cwiseProduct(a.dtheta - s.dtheta) -
                          gains.kf.cwiseProduct(force_error) - s.tau +
                          arm.gravity_feedforward();
  return tau.cwiseMax(-kTorqueLimit).cwiseMin(kTorqueLimit);
}

Robot::Robot(const ArmParams& arm, std::optional<BoardConfig> board, const JointVector& q0,
             SensorNoise noise)
    : arm_(arm),
      board_(board),
      velocity_(arm.velocity_cutoff),
      observer_(arm.nominal_inertia(), arm.viscous, arm.observer_cutoff),
      rng_(noise.seed),
      noise_(0.0, 1.0),
      noise_std_(noise.angle_std) {
  arm_.validate();
  if (board_) board_->validate();
  state_.q = clamp_workspace(q0);
  state_.tip = forward_kinematics(state_.q, arm_);
  if (board_) state_.fn = contact_force(state_.tip, Vec3::Zero(), *board_).normal;
  measured_q_ = state_.q;
  velocity_.reset(measured_q_);
  last_tau_ref_ = arm_.gravity_feedforward();
}

State Robot::response() const { return {measured_q_, state_.dq_hat, state_.tau_ext_hat}; }

void Robot::tick(const JointVector& tau_ref, const TipForceField& external) {
  try {
    state_ = step_dynamics(state_, tau_ref, board_ ? &*board_ : nullptr, arm_, external);
  } catch (const NonFinite& e) {
    throw NonFinite("robot diverged", ticks_);
  }
  last_tau_ref_ = tau_ref.cwiseMax(-kTorqueLimit).cwiseMin(kTorqueLimit);
  measured_q_ = state_.q;
  if (noise_std_ > 0.0) {
    for (int j = 0; j < kDof; ++j) measured_q_[j] += noise_std_ * noise_(rng_);
  }
  state_.dq_hat = velocity_.update(measured_q_, arm_.dt_ctrl);
  state_.tau_ext_hat =
      observer_.update(last_tau_ref_ - arm_.gravity_feedforward(), state_.dq_hat, arm_.dt_ctrl);
  ++ticks_;
}

}  // namespace forcegen
