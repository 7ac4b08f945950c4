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

// Flat `key=value` configuration shared by the command-line tool and the
// acceptance harness. Keys are dotted (`board.h=0.01`); unknown keys are errors.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "forcegen/dataset.hpp"
#include "forcegen/eval.hpp"
#include "forcegen/nn.hpp"
#include "forcegen/policy.hpp"
#include "forcegen/teleop.hpp"

namespace forcegen {

struct AppConfig {
  std::uint64_t seed = 0;

  ArmParams arm;
  BoardConfig board;
  double sensor_noise = 0.0;

  BilateralGains bilateral;
  OperatorGains op;
  OperatorGains teach_op{800.0, 40.0};
  JitterConfig jitter;

  PipelineConfig pipeline;
  std::size_t n_train = 56;
  std::size_t n_val = 14;

  ModelSpec mlp = ModelSpec::mlp();
  ModelSpec lstm = ModelSpec::lstm();
  TrainConfig train_mlp = desk_training(ModelKind::Mlp);
  TrainConfig train_lstm = desk_training(ModelKind::Lstm);

  JointGains joint;
  PidGains pid{2.0, 0.2, 0.0};
  RateBridge bridge = RateBridge::Hold;
  double state_cutoff = 20.0;

  int repetitions = kProtocolTrials;
  std::uint64_t eval_seed = 1000;
  std::uint64_t seed_stride = 1;
  StrokeStyle style;

  /// Training schedule sized for a laptop CPU.
  static TrainConfig desk_training(ModelKind kind);

  TeleopConfig teleop() const;
  RunConfig run() const;
  CompareConfig compare() const;
  void validate() const;
};

struct ConfigKey {
  std::string name;
  std::string doc;
};

const std::vector<ConfigKey>& config_keys();

/// Throws ConfigError for an unknown key or a malformed value.
void set_config(AppConfig& cfg, std::string_view key, std::string_view value);
std::string get_config(const AppConfig& cfg, std::string_view key);

/// Every key with its current value, one `key=value` per line in registry order.
std::string format_config(const AppConfig& cfg, bool with_docs = false);

/// Applies a file of `key=value` lines (blank lines and `#` comments allowed).
void load_config(AppConfig& cfg, const std::filesystem::path& path);

}  // namespace forcegen
