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

// Lower-layer networks: a memoryless MLP and a stacked LSTM with an affine
// head, trained with Adam on mean squared error.

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include "forcegen/dataset.hpp"
#include "forcegen/errors.hpp"

namespace forcegen {

enum class ModelKind : std::uint32_t { Mlp = 0, Lstm = 1 };

const char* model_kind_name(ModelKind kind);
ModelKind parse_model_kind(std::string_view name);

struct ModelSpec {
  ModelKind kind = ModelKind::Mlp;
  int input = kInputDim;
  int output = kOutputDim;
  int hidden = 64;
  int layers = 6;  // hidden layers (MLP) or recurrent layers (LSTM)

  static ModelSpec mlp(int hidden = 64, int layers = 6);
  static ModelSpec lstm(int hidden = 64, int layers = 2);
  /// Layer widths from input to output.
  std::vector<int> widths() const;
  std::size_t parameter_count() const;
  void validate() const;
  bool operator==(const ModelSpec&) const = default;
};

class Model {
 public:
  struct Hidden {
    std::vector<Eigen::VectorXd> h;
    std::vector<Eigen::VectorXd> c;
  };

  Model() = default;
  /// All parameters zero.
  explicit Model(const ModelSpec& spec);
  /// Uniform +-1/sqrt(fan_in) initialization.
  static Model random(const ModelSpec& spec, std::uint64_t seed);

  const ModelSpec& spec() const { return spec_; }
  const Eigen::VectorXd& params() const { return params_; }
  Eigen::VectorXd& params() { return params_; }
  void set_params(const Eigen::VectorXd& p);

  /// MLP forward over a batch (columns are samples).
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x) const;
  Hidden initial_hidden() const;
  /// One inference step. The MLP ignores `hidden`.
  Eigen::VectorXd step(const Eigen::VectorXd& x, Hidden& hidden) const;

 private:
  ModelSpec spec_;
  Eigen::VectorXd params_;
};

/// Independent samples, one per column.
struct PairBatch {
  Eigen::MatrixXd inputs;   // input x N
  Eigen::MatrixXd targets;  // output x N
  Eigen::VectorXd weights;  // N, 0 masks a sample
  std::size_t size() const { return static_cast<std::size_t>(inputs.cols()); }
};

/// Equal-length sequences; column t * B + b holds step t of sequence b.
struct SequenceBatch {
  int steps = 0;
  int batch = 0;
  Eigen::MatrixXd inputs;
  Eigen::MatrixXd targets;
  Eigen::VectorXd weights;
};

/// Mean squared error over weighted samples and all outputs; fills `grad` when given.
double mlp_loss(const Model& model, const PairBatch& batch, Eigen::VectorXd* grad = nullptr);
double lstm_loss(const Model& model, const SequenceBatch& batch, Eigen::VectorXd* grad = nullptr);

struct AdamState {
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEpsilon = 1e-8;
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  std::int64_t step = 0;
};

void adam_step(Eigen::VectorXd& w, const Eigen::VectorXd& grad, AdamState& st, double lr);

/// Training data in network layout, built from normalized sequences.
struct TrainingData {
  std::vector<PairBatch> sequences;  // one block of pairs per sequence, k ascending
  bool empty() const { return sequences.empty(); }
};

TrainingData make_training_data(const PreparedSet& normalized, bool mask_padding);

struct TrainConfig {
  double lr = 1e-4;
  int batch = 128;
  int max_epochs = 5000;
  std::uint64_t seed = 0;
  double noise_variance = 0.01;
  void validate() const;
};

struct TrainLog {
  std::vector<double> train_mse;
  std::vector<double> val_mse;
  int best_epoch = -1;  // 1-based
};

struct TrainResult {
  Model best;
  TrainLog log;
};

using EpochCallback = std::function<void(int epoch, double train_mse, double val_mse)>;

TrainResult train(const ModelSpec& spec, const TrainingData& train_set, const TrainingData& val_set,
                  const TrainConfig& cfg, const EpochCallback& on_epoch = {});

/// Mean validation loss of `model` on `data` without noise.
double evaluate_loss(const Model& model, const TrainingData& data);

void write_training_log(const TrainLog& log, const std::filesystem::path& path);

/// FGW1 binary: magic, spec header, little-endian doubles, optional normalization block.
void save_weights(const Model& model, const std::optional<NormStats>& norm,
                  const std::filesystem::path& path);
Model load_weights(const std::filesystem::path& path, std::optional<NormStats>* norm = nullptr);

}  // namespace forcegen
