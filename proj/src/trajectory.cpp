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

#include "forcegen/trajectory.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>

namespace forcegen {

void UpperTrajectory::validate() const {
  if (theta.size() != dtheta.size()) throw Error("upper trajectory: theta/dtheta lengths differ");
  for (std::size_t k = 0; k < theta.size(); ++k) {
    if (!theta[k].allFinite() || !dtheta[k].allFinite()) {
      throw Error("upper trajectory: non-finite sample at k=" + std::to_string(k));
    }
  }
}

UpperTrajectory UpperTrajectory::from_responses(const Episode& ep, int factor) {
  UpperTrajectory out;
  for (std::size_t k = 0; k < ep.length(); k += static_cast<std::size_t>(factor)) {
    out.theta.push_back(ep.get(k, Channel::ThetaRes));
    out.dtheta.push_back(ep.get(k, Channel::DthetaRes));
  }
  out.meta = ep.meta;
  return out;
}

void write_upper(const UpperTrajectory& traj, const std::filesystem::path& path) {
  traj.validate();
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "k,j,theta,dtheta\n";
  char buf[96];
  for (std::size_t k = 0; k < traj.size(); ++k) {
    for (int j = 0; j < kDof; ++j) {
      std::snprintf(buf, sizeof(buf), "%zu,%d,%.9g,%.9g\n", k, j + 1, traj.theta[k][j], traj.dtheta[k][j]);
      out << buf;
    }
  }
  auto meta_path = path;
  meta_path += ".meta";
  write_key_values(traj.meta, meta_path);
}

UpperTrajectory read_upper(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  const std::string file = path.string();
  std::string line;
  if (!std::getline(in, line) || line.rfind("k,j,theta,dtheta", 0) != 0) {
    throw ParseError(file, 1, "expected header 'k,j,theta,dtheta'");
  }
  UpperTrajectory traj;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    double v[4];
    const char* p = line.data();
    const char* end = line.data() + line.size();
    for (int i = 0; i < 4; ++i) {
      auto [ptr, ec] = std::from_chars(p, end, v[i]);
      if (ec != std::errc()) throw ParseError(file, lineno, "bad number");
      p = ptr;
      if (i < 3) {
        if (p == end || *p != ',') throw ParseError(file, lineno, "expected 4 columns");
        ++p;
      }
    }
    if (p != end) throw ParseError(file, lineno, "expected 4 columns");
    const auto k = static_cast<std::size_t>(v[0]);
    const int j = static_cast<int>(v[1]) - 1;
    if (j < 0 || j >= kDof) throw ParseError(file, lineno, "joint index out of range");
    if (k != traj.theta.size() - (j == 0 ? 0 : 1) || (j == 0) != (k == traj.theta.size())) {
      throw ParseError(file, lineno, "rows out of order");
    }
    if (j == 0) {
      traj.theta.emplace_back(JointVector::Zero());
      traj.dtheta.emplace_back(JointVector::Zero());
    }
    traj.theta.back()[j] = v[2];
    traj.dtheta.back()[j] = v[3];
  }
  auto meta_path = path;
  meta_path += ".meta";
  if (std::filesystem::exists(meta_path)) traj.meta = read_key_values(meta_path);
  traj.validate();
  return traj;
}

std::vector<bool> upper_pen_down(const UpperTrajectory& traj, const ArmParams& arm,
                                 const BoardConfig& board) {
  const double depth = board.ink_threshold / board.normal_stiffness;
  std::vector<bool> down(traj.size());
  for (std::size_t k = 0; k < traj.size(); ++k) {
    down[k] = forward_kinematics(traj.theta[k], arm).z() <= board.height - depth;
  }
  return down;
}

}  // namespace forcegen
