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

#include "forcegen/policy.hpp"

#include <algorithm>
#include <functional>

namespace forcegen {

UpperSample upper_at(const UpperTrajectory& traj, std::size_t index) {
  if (traj.size() == 0) throw EmptyTrajectory("upper trajectory is empty");
  const std::size_t i = std::min(index, traj.size() - 1);
  return {traj.theta[i], traj.dtheta[i]};
}

UpperWindow upper_provider(const UpperTrajectory& traj, std::size_t k) {
  UpperWindow w;
  const auto step = static_cast<std::size_t>(kLookahead);
  w.ref_index = std::min(k + 1, traj.size() == 0 ? 0 : traj.size() - 1);
  w.hold_index = std::min(step * (k / step + 1), traj.size() == 0 ? 0 : traj.size() - 1);
  w.ref = upper_at(traj, w.ref_index);
  w.hold = upper_at(traj, w.hold_index);
  return w;
}

void PidGains::validate() const {
  if (kp < 0 || kd < 0 || ki < 0) throw ConfigError("pid gains must be >= 0");
}

PidOutput pid_correct(const UpperSample& ref, const UpperSample& predicted, const PidGains& g,
                      PidState& st, double dt) {
  const JointVector e = ref.theta - predicted.theta;
  const JointVector de = ref.dtheta - predicted.dtheta;
  st.integral += 0.5 * dt * (st.prev_error + e);
  st.prev_error = e;
  PidOutput out;
  out.u = g.kp * e + g.kd * de + g.ki * st.integral;
  for (int j = 0; j < kDof; ++j) out.du[j] = pseudo_diff(out.u[j], st.u_filter[static_cast<std::size_t>(j)], dt);
  return out;
}

Eigen::VectorXd compose_input(const State& s, const UpperSample& hold, const PidOutput& pid,
                              const NormStats& norm) {
  const JointVector theta = clamp_workspace(hold.theta + pid.u);
  return norm.apply_input(lower_layer_input(s, theta, hold.dtheta + pid.du));
}

PolicyState make_policy_state(const Model& model) {
  PolicyState st;
  st.hidden = model.initial_hidden();
  return st;
}

PolicyOutput policy_step(const Model& model, const NormStats& norm, const State& s,
                         const UpperTrajectory& traj, const PidGains& gains, PolicyState& st) {
  const std::size_t k = st.tick;
  const UpperWindow w = upper_provider(traj, k);
  PidOutput pid;
  if (st.prediction) {
    const UpperSample ref = upper_at(traj, k);
    pid = pid_correct(ref, {st.prediction->theta, st.prediction->dtheta}, gains, st.pid);
  } else {
    pid = pid_correct({}, {}, gains, st.pid);
  }
  const Eigen::VectorXd x = compose_input(s, w.hold, pid, norm);
  const Eigen::VectorXd y = norm.invert_output(model.step(x, st.hidden));
  if (!y.allFinite()) throw NonFinite("policy output", k);

  PolicyOutput out;
  out.s_hat = {y.segment<3>(0), y.segment<3>(3), y.segment<3>(6)};
  out.a_hat = {y.segment<3>(9), y.segment<3>(12), y.segment<3>(15)};
  out.upper_input = {clamp_workspace(w.hold.theta + pid.u), w.hold.dtheta + pid.du};
  st.prediction = out.s_hat;
  ++st.tick;
  return out;
}

RateBridge parse_rate_bridge(std::string_view name) {
  if (name == "hold") return RateBridge::Hold;
  if (name == "linear") return RateBridge::Linear;
  throw ConfigError("unknown rate bridge '" + std::string(name) + "' (expected hold or linear)");
}

const char* rate_bridge_name(RateBridge b) { return b == RateBridge::Hold ? "hold" : "linear"; }

void RunConfig::validate() const {
  arm.validate();
  board.validate();
  gains.validate();
  if (!(state_cutoff >= 0) || state_cutoff * kControlPeriod >= 1.0) {
    throw ConfigError("state cutoff must be in [0, 500) rad/s");
  }
  if (!(sensor_noise >= 0)) throw ConfigError("sensor noise must be >= 0");
}

namespace {

using CommandSource = std::function<Action(std::size_t k, const State& s, RunResult& r)>;

RunResult run_loop(const UpperTrajectory& traj, const RunConfig& cfg, const CommandSource& next) {
  traj.validate();
  if (traj.size() == 0) throw EmptyTrajectory("upper trajectory is empty");
  cfg.validate();
  Robot robot(cfg.arm, cfg.board, traj.theta.front(), {cfg.sensor_noise, cfg.seed});

  RunResult r;
  r.policy_ticks = traj.size();
  const std::size_t n = r.policy_ticks * kRobotTicksPerPolicyTick;
  r.episode = Episode::with_length(n);
  r.tau_ref.resize(static_cast<Eigen::Index>(n), kDof);
  r.upper_input.resize(static_cast<Eigen::Index>(r.policy_ticks), 2 * kDof);
  r.hold.resize(static_cast<Eigen::Index>(r.policy_ticks), 2 * kDof);

  // Network-side view of the state, optionally smoothed like the training data.
  State seen = robot.response();
  const double c = cfg.state_cutoff * kControlPeriod;
  Action prev{seen.theta, seen.dtheta, JointVector::Zero()};
  std::size_t t = 0;
  for (std::size_t k = 0; k < r.policy_ticks; ++k) {
    const Action target = next(k, cfg.state_cutoff > 0 ? seen : robot.response(), r);
    for (int i = 0; i < kRobotTicksPerPolicyTick; ++i, ++t) {
      Action a = target;
      if (cfg.bridge == RateBridge::Linear) {
        const double w = static_cast<double>(i + 1) / kRobotTicksPerPolicyTick;
        a.theta = prev.theta + w * (target.theta - prev.theta);
        a.dtheta = prev.dtheta + w * (target.dtheta - prev.dtheta);
        a.tau = prev.tau + w * (target.tau - prev.tau);
      }
      const State s = robot.response();
      const JointVector tau = joint_controller(a, s, cfg.joint, cfg.arm);
      const auto row = static_cast<Eigen::Index>(t);
      r.episode.set_action(t, a);
      r.episode.set_state(t, s);
      const RobotState& rs = robot.state();
      r.episode.aux.row(row) << rs.tip.x(), rs.tip.y(), rs.tip.z(), rs.fn;
      if (rs.fn >= cfg.board.ink_threshold) r.ink.emplace_back(rs.tip.x(), rs.tip.y());
      r.tau_ref.row(row) = tau.transpose();
      robot.tick(tau);
      if (cfg.state_cutoff > 0) {
        const State m = robot.response();
        seen.theta += c * (m.theta - seen.theta);
        seen.dtheta += c * (m.dtheta - seen.dtheta);
        seen.tau += c * (m.tau - seen.tau);
      }
    }
    prev = target;
  }
  return r;
}

}  // namespace

RunResult run_autonomous(const Model& model, const NormStats& norm, const UpperTrajectory& traj,
                         const RunConfig& cfg) {
  PolicyState st = make_policy_state(model);
  RunResult r = run_loop(traj, cfg, [&](std::size_t k, const State& s, RunResult& res) {
    const PolicyOutput out = policy_step(model, norm, s, traj, cfg.gains, st);
    const UpperWindow w = upper_provider(traj, k);
    const auto row = static_cast<Eigen::Index>(k);
    res.hold.row(row) << w.hold.theta.transpose(), w.hold.dtheta.transpose();
    res.upper_input.row(row) << out.upper_input.theta.transpose(), out.upper_input.dtheta.transpose();
    return out.a_hat;
  });
  r.episode.meta = traj.meta;
  r.episode.meta["source"] = "autonomous";
  r.episode.meta["model"] = model_kind_name(model.spec().kind);
  return r;
}

RunResult run_playback(const UpperTrajectory& traj, const RunConfig& cfg) {
  RunResult r = run_loop(traj, cfg, [&](std::size_t k, const State&, RunResult& res) {
    const UpperSample u = upper_at(traj, k);
    const auto row = static_cast<Eigen::Index>(k);
    res.hold.row(row) << u.theta.transpose(), u.dtheta.transpose();
    res.upper_input.row(row) = res.hold.row(row);
    return Action{u.theta, u.dtheta, JointVector::Zero()};
  });
  r.episode.meta = traj.meta;
  r.episode.meta["source"] = "playback";
  return r;
}

}  // namespace forcegen
