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

// Episode container, its on-disk format, and the preprocessing pipeline that
// turns 2 ms demonstrations into normalized 20 ms training pairs:
//   filter -> resample -> pad -> normalize -> (noise, at training time only)

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "forcegen/errors.hpp"
#include "forcegen/sim_core.hpp"

namespace forcegen {

/// Joint channel groups; column of (channel, joint) is channel * 3 + joint.
enum class Channel : int { ThetaCmd = 0, DthetaCmd, TauCmd, ThetaRes, DthetaRes, TauRes };
inline constexpr int kChannelGroups = 6;
inline constexpr int kJointColumns = kChannelGroups * kDof;  // 18
inline constexpr int kAuxColumns = 4;                        // tip_x, tip_y, tip_z, fn
inline constexpr int kInputDim = 5 * kDof;                   // 15
inline constexpr int kOutputDim = 6 * kDof;                  // 18
inline constexpr int kLookahead = 10;
inline constexpr double kPolicyPeriod = 0.02;

inline int column(Channel c, int joint) { return static_cast<int>(c) * kDof + joint; }
const char* channel_name(Channel c);
/// "theta_cmd_j1" style names for all 18 joint columns.
std::string column_name(int col);

class CountMismatch : public Error {
 public:
  using Error::Error;
};
class TooShort : public Error {
 public:
  using Error::Error;
};
class MissingCommands : public Error {
 public:
  using Error::Error;
};

/// Time-indexed (action, state, aux) series. Rows are samples.
struct Episode {
  double dt = kControlPeriod;
  Eigen::MatrixXd joints;  // N x 18, see Channel
  Eigen::MatrixXd aux;     // N x 4 or N x 0
  bool has_commands = true;
  std::map<std::string, std::string> meta;

  static Episode with_length(std::size_t n, bool commands = true, bool aux = true);
  std::size_t length() const { return static_cast<std::size_t>(joints.rows()); }
  bool has_aux() const { return aux.cols() == kAuxColumns; }
  Action action(std::size_t k) const;
  State state(std::size_t k) const;
  void set_action(std::size_t k, const Action& a);
  void set_state(std::size_t k, const State& s);
  JointVector get(std::size_t k, Channel c) const;
  void set(std::size_t k, Channel c, const JointVector& v);
  /// Throws Error if the shape invariants do not hold.
  void validate() const;
};

bool operator==(const Episode& a, const Episode& b);

// Filtering and augmentation -------------------------------------------------

/// First-order bilinear low-pass run forward then backward, with odd
/// reflection padding of 1/cutoff seconds at both ends. Throws TooShort below 8 samples.
std::vector<double> zero_phase_lowpass(std::span<const double> series, double cutoff, double dt);
/// Applies zero_phase_lowpass to every joint and aux column.
Episode zero_phase_lowpass(const Episode& ep, double cutoff = 20.0);

std::vector<double> add_noise(std::span<const double> series, double variance, std::uint64_t seed);
/// In-place i.i.d. Gaussian noise on a block of values.
void add_noise(Eigen::Ref<Eigen::MatrixXd> values, double variance, std::uint64_t seed);

// Resampling and padding -----------------------------------------------------

/// Sequence p takes samples p, p + factor, p + 2 factor, ...
std::vector<Episode> resample_phase_shift(const Episode& ep, int factor = kLookahead);

struct PaddedSequence {
  Episode data;
  std::size_t valid = 0;  // samples before the copied tail
  bool padded(std::size_t k) const { return k >= valid; }
};

std::vector<PaddedSequence> pad_to_length(const std::vector<Episode>& sequences, std::size_t length);

// Normalization --------------------------------------------------------------

struct NormStats {
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(kJointColumns);
  Eigen::VectorXd std = Eigen::VectorXd::Ones(kJointColumns);
  std::vector<bool> degenerate = std::vector<bool>(kJointColumns, false);

  /// Column statistics over every sample of every sequence (population std).
  static NormStats compute(const std::vector<PaddedSequence>& sequences);
  Eigen::MatrixXd apply(const Eigen::MatrixXd& joints) const;
  Eigen::MatrixXd invert(const Eigen::MatrixXd& joints) const;
  /// Normalizes / denormalizes a 15-vector laid out like TrainingPair::input.
  Eigen::VectorXd apply_input(const Eigen::VectorXd& x) const;
  Eigen::VectorXd invert_output(const Eigen::VectorXd& y) const;
  Eigen::VectorXd apply_output(const Eigen::VectorXd& y) const;
};

void write_norm(const NormStats& stats, const std::filesystem::path& path);
NormStats read_norm(const std::filesystem::path& path);

// Training pairs -------------------------------------------------------------

struct TrainingPair {
  Eigen::VectorXd input;   // 15: theta_res, dtheta_res, tau_res at k; theta_cmd, dtheta_cmd at k + 10
  Eigen::VectorXd target;  // 18: responses then commands at k + 1
  std::size_t sequence_id = 0;
  std::size_t k = 0;
};

/// Input layout used by training and inference alike.
Eigen::VectorXd lower_layer_input(const State& s, const JointVector& upper_theta,
                                  const JointVector& upper_dtheta);
/// Columns of the 18-wide joint matrix that feed the 15 input slots.
const std::array<int, kInputDim>& input_columns();
/// Columns of the joint matrix in target order.
const std::array<int, kOutputDim>& output_columns();

std::vector<TrainingPair> build_training_pairs(const Episode& sequence, std::size_t sequence_id = 0);

// Splitting ------------------------------------------------------------------

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
};

/// Stratified by the (task, board_h) cell recorded in each episode's meta.
/// Throws CountMismatch when the requested totals cannot be met.
Split split(const std::vector<Episode>& episodes, std::size_t n_train, std::size_t n_val,
            std::uint64_t seed);

// Persistence ----------------------------------------------------------------

/// Writes <dir>/episode.csv, <dir>/aux.csv and <dir>/meta.txt.
void write_episode(const Episode& ep, const std::filesystem::path& dir);
Episode read_episode(const std::filesystem::path& dir);

std::map<std::string, std::string> read_key_values(const std::filesystem::path& path);
void write_key_values(const std::map<std::string, std::string>& kv,
                      const std::filesystem::path& path);

// Full pipeline --------------------------------------------------------------

struct PipelineConfig {
  double filter_cutoff = 20.0;
  int resample_factor = kLookahead;
  bool mask_padding = false;
};

/// Filtered, resampled and padded 20 ms sequences; `sources` maps each back to its episode.
struct PreparedSet {
  std::vector<PaddedSequence> sequences;
  std::vector<std::size_t> sources;
};

PreparedSet prepare_sequences(const std::vector<Episode>& episodes, const PipelineConfig& cfg,
                              std::size_t pad_length = 0);
std::size_t max_length(const PreparedSet& set);
/// Returns copies whose joint columns are normalized with `stats`.
PreparedSet normalize(const PreparedSet& set, const NormStats& stats);

}  // namespace forcegen
