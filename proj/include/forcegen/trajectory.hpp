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

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "forcegen/dataset.hpp"
#include "forcegen/sim_core.hpp"

namespace forcegen {

class EmptyTrajectory : public Error {
 public:
  using Error::Error;
};

/// Upper-layer position reference sampled every 20 ms.
struct UpperTrajectory {
  std::vector<JointVector> theta;
  std::vector<JointVector> dtheta;
  std::map<std::string, std::string> meta;

  std::size_t size() const { return theta.size(); }
  void validate() const;

  /// Takes samples 0, factor, 2 factor, ... of an episode's responses.
  static UpperTrajectory from_responses(const Episode& ep, int factor = kLookahead);
};

/// CSV `k,j,theta,dtheta` plus a `<path>.meta` key=value sidecar.
void write_upper(const UpperTrajectory& traj, const std::filesystem::path& path);
UpperTrajectory read_upper(const std::filesystem::path& path);

/// Samples where the trajectory's pen tip is pressed into a board at
/// `board_h` far enough to ink (penetration * k_n >= ink threshold).
std::vector<bool> upper_pen_down(const UpperTrajectory& traj, const ArmParams& arm,
                                 const BoardConfig& board);

}  // namespace forcegen
