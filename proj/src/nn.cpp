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

#include "forcegen/nn.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>

namespace forcegen {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMat = Eigen::Map<const RowMat>;
using MutMat = Eigen::Map<RowMat>;
using ConstVec = Eigen::Map<const Eigen::VectorXd>;
using MutVec = Eigen::Map<Eigen::VectorXd>;

static_assert(std::endian::native == std::endian::little, "weight files assume a little-endian host");

struct Affine {
  std::size_t w = 0;  // offset of the row-major weight block
  std::size_t b = 0;  // offset of the bias
  int rows = 0;
  int cols = 0;
};

struct LstmLayer {
  std::size_t wx = 0;
  std::size_t wh = 0;
  std::size_t b = 0;
  int in = 0;
};

struct Layout {
  std::vector<Affine> dense;  // MLP layers, or the single LSTM head
  std::vector<LstmLayer> lstm;
  std::size_t total = 0;
};

Layout layout_of(const ModelSpec& spec) {
  Layout lay;
  std::size_t off = 0;
  auto affine = [&](int rows, int cols) {
    Affine a{off, off + static_cast<std::size_t>(rows) * cols, rows, cols};
    off = a.b + static_cast<std::size_t>(rows);
    return a;
  };
  if (spec.kind == ModelKind::Mlp) {
    const auto w = spec.widths();
    for (std::size_t i = 0; i + 1 < w.size(); ++i) lay.dense.push_back(affine(w[i + 1], w[i]));
  } else {
    const int h = spec.hidden;
    for (int l = 0; l < spec.layers; ++l) {
      LstmLayer layer;
      layer.in = l == 0 ? spec.input : h;
      layer.wx = off;
      layer.wh = layer.wx + static_cast<std::size_t>(4 * h) * layer.in;
      layer.b = layer.wh + static_cast<std::size_t>(4 * h) * h;
      off = layer.b + static_cast<std::size_t>(4 * h);
      lay.lstm.push_back(layer);
    }
    lay.dense.push_back(affine(spec.output, h));
  }
  lay.total = off;
  return lay;
}

ConstMat weights(const Eigen::VectorXd& p, const Affine& a) { return {p.data() + a.w, a.rows, a.cols}; }
ConstVec bias(const Eigen::VectorXd& p, const Affine& a) { return {p.data() + a.b, a.rows}; }

Eigen::MatrixXd sigmoid(const Eigen::MatrixXd& z) {
  return (1.0 + (-z.array()).exp()).inverse().matrix();
}

double weight_scale(const Eigen::VectorXd& w, int outputs) {
  const double s = w.sum();
  return s > 0.0 ? 1.0 / (s * outputs) : 0.0;
}

void check_batch(const ModelSpec& spec, const Eigen::MatrixXd& in, const Eigen::MatrixXd& target,
                 const Eigen::VectorXd& w) {
  if (in.rows() != spec.input || target.rows() != spec.output || in.cols() != target.cols() ||
      w.size() != in.cols()) {
    throw ShapeMismatch("batch shape does not match the model");
  }
}

// Forward pass of one LSTM layer over a time-major block; keeps what backward needs.
struct LstmTape {
  Eigen::MatrixXd gates;  // 4H x TB: i, f, g, o after activation
  Eigen::MatrixXd cell;   // H x TB
  Eigen::MatrixXd out;    // H x TB
};

LstmTape lstm_layer_forward(const Eigen::VectorXd& p, const LstmLayer& lay, int h,
                            const Eigen::MatrixXd& x, int steps, int batch) {
  const ConstMat wx(p.data() + lay.wx, 4 * h, lay.in);
  const ConstMat wh(p.data() + lay.wh, 4 * h, h);
  const ConstVec b(p.data() + lay.b, 4 * h);
  LstmTape tape;
  tape.gates.noalias() = wx * x;
  tape.gates.colwise() += b;
  tape.cell.resize(h, x.cols());
  tape.out.resize(h, x.cols());
  Eigen::MatrixXd h_prev = Eigen::MatrixXd::Zero(h, batch);
  Eigen::MatrixXd c_prev = Eigen::MatrixXd::Zero(h, batch);
  for (int t = 0; t < steps; ++t) {
    auto z = tape.gates.middleCols(static_cast<Eigen::Index>(t) * batch, batch);
    z.noalias() += wh * h_prev;
    z.topRows(2 * h) = sigmoid(z.topRows(2 * h));
    z.middleRows(2 * h, h) = z.middleRows(2 * h, h).array().tanh().matrix();
    z.bottomRows(h) = sigmoid(z.bottomRows(h));
    auto c = tape.cell.middleCols(static_cast<Eigen::Index>(t) * batch, batch);
    c = z.middleRows(h, h).cwiseProduct(c_prev) + z.topRows(h).cwiseProduct(z.middleRows(2 * h, h));
    auto out = tape.out.middleCols(static_cast<Eigen::Index>(t) * batch, batch);
    out = z.bottomRows(h).cwiseProduct(c.array().tanh().matrix());
    h_prev = out;
    c_prev = c;
  }
  return tape;
}

// Returns the gradient with respect to the layer input.
Eigen::MatrixXd lstm_layer_backward(const Eigen::VectorXd& p, Eigen::VectorXd& grad,
                                    const LstmLayer& lay, int h, const Eigen::MatrixXd& x,
                                    const LstmTape& tape, const Eigen::MatrixXd& d_out, int steps,
                                    int batch) {
  const ConstMat wx(p.data() + lay.wx, 4 * h, lay.in);
  const ConstMat wh(p.data() + lay.wh, 4 * h, h);
  Eigen::MatrixXd dz(4 * h, x.cols());
  Eigen::MatrixXd dh_next = Eigen::MatrixXd::Zero(h, batch);
  Eigen::MatrixXd dc_next = Eigen::MatrixXd::Zero(h, batch);
  for (int t = steps - 1; t >= 0; --t) {
    const Eigen::Index col = static_cast<Eigen::Index>(t) * batch;
    const auto g = tape.gates.middleCols(col, batch);
    const auto c = tape.cell.middleCols(col, batch);
    const Eigen::ArrayXXd ig = g.topRows(h).array();
    const Eigen::ArrayXXd fg = g.middleRows(h, h).array();
    const Eigen::ArrayXXd gg = g.middleRows(2 * h, h).array();
    const Eigen::ArrayXXd og = g.bottomRows(h).array();
    const Eigen::ArrayXXd tc = c.array().tanh();
    const Eigen::ArrayXXd dh = d_out.middleCols(col, batch).array() + dh_next.array();
    const Eigen::ArrayXXd dc = dh * og * (1.0 - tc * tc) + dc_next.array();
    const Eigen::ArrayXXd c_prev =
        t > 0 ? Eigen::ArrayXXd(tape.cell.middleCols(col - batch, batch).array())
              : Eigen::ArrayXXd::Zero(h, batch);
    auto dzt = dz.middleCols(col, batch);
    dzt.topRows(h) = (dc * gg * ig * (1.0 - ig)).matrix();
    dzt.middleRows(h, h) = (dc * c_prev * fg * (1.0 - fg)).matrix();
    dzt.middleRows(2 * h, h) = (dc * ig * (1.0 - gg * gg)).matrix();
    dzt.bottomRows(h) = (dh * tc * og * (1.0 - og)).matrix();
    dc_next = (dc * fg).matrix();
    dh_next.noalias() = wh.transpose() * dzt;
  }
  MutMat dwx(grad.data() + lay.wx, 4 * h, lay.in);
  MutMat dwh(grad.data() + lay.wh, 4 * h, h);
  MutVec db(grad.data() + lay.b, 4 * h);
  dwx.noalias() += dz * x.transpose();
  const Eigen::Index tb = x.cols();
  if (steps > 1) {
    dwh.noalias() += dz.rightCols(tb - batch) * tape.out.leftCols(tb - batch).transpose();
  }
  db += dz.rowwise().sum();
  return wx.transpose() * dz;
}

void write_u32(std::ostream& out, std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }
void write_u64(std::ostream& out, std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), 8); }

template <typename T>
T read_raw(std::istream& in, const std::string& file) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) throw TruncatedFile(file + ": unexpected end of file");
  return v;
}

}  // namespace

const char* model_kind_name(ModelKind kind) { return kind == ModelKind::Mlp ? "mlp" : "lstm"; }

ModelKind parse_model_kind(std::string_view name) {
  if (name == "mlp") return ModelKind::Mlp;
  if (name == "lstm") return ModelKind::Lstm;
  throw ConfigError("unknown model kind '" + std::string(name) + "'");
}

ModelSpec ModelSpec::mlp(int hidden, int layers) {
  return {ModelKind::Mlp, kInputDim, kOutputDim, hidden, layers};
}

ModelSpec ModelSpec::lstm(int hidden, int layers) {
  return {ModelKind::Lstm, kInputDim, kOutputDim, hidden, layers};
}

std::vector<int> ModelSpec::widths() const {
  std::vector<int> w{input};
  for (int l = 0; l < layers; ++l) w.push_back(hidden);
  w.push_back(output);
  return w;
}

std::size_t ModelSpec::parameter_count() const { return layout_of(*this).total; }

void ModelSpec::validate() const {
  if (input < 1 || output < 1) throw ConfigError("model: input/output width must be >= 1");
  if (layers < 0 || (layers > 0 && hidden < 1)) throw ConfigError("model: bad hidden size");
  if (kind == ModelKind::Lstm && layers < 1) throw ConfigError("model: LSTM needs at least one layer");
}

Model::Model(const ModelSpec& spec) : spec_(spec) {
  spec_.validate();
  params_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(spec_.parameter_count()));
}

Model Model::random(const ModelSpec& spec, std::uint64_t seed) {
  Model m(spec);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  auto fill = [&](std::size_t from, std::size_t count, int fan_in) {
    const double s = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (std::size_t i = 0; i < count; ++i) m.params_[static_cast<Eigen::Index>(from + i)] = s * unit(rng);
  };
  const Layout lay = layout_of(spec);
  for (const auto& l : lay.lstm) {
    const int h = spec.hidden;
    fill(l.wx, static_cast<std::size_t>(4 * h) * (l.in + h) + 4 * h, l.in + h);
  }
  for (const auto& a : lay.dense) fill(a.w, static_cast<std::size_t>(a.rows) * (a.cols + 1), a.cols);
  return m;
}

void Model::set_params(const Eigen::VectorXd& p) {
  if (p.size() != params_.size()) throw ShapeMismatch("parameter vector has the wrong length");
  params_ = p;
}

Eigen::MatrixXd Model::forward(const Eigen::MatrixXd& x) const {
  if (spec_.kind != ModelKind::Mlp) throw ShapeMismatch("batch forward is MLP only");
  if (x.rows() != spec_.input) throw ShapeMismatch("input width does not match the model");
  const Layout lay = layout_of(spec_);
  Eigen::MatrixXd a = x;
  for (std::size_t i = 0; i < lay.dense.size(); ++i) {
    Eigen::MatrixXd z = weights(params_, lay.dense[i]) * a;
    z.colwise() += bias(params_, lay.dense[i]);
    a = i + 1 < lay.dense.size() ? Eigen::MatrixXd(z.array().tanh()) : z;
  }
  return a;
}

Model::Hidden Model::initial_hidden() const {
  Hidden hs;
  if (spec_.kind == ModelKind::Lstm) {
    hs.h.assign(static_cast<std::size_t>(spec_.layers), Eigen::VectorXd::Zero(spec_.hidden));
    hs.c = hs.h;
  }
  return hs;
}

Eigen::VectorXd Model::step(const Eigen::VectorXd& x, Hidden& hidden) const {
  if (spec_.kind == ModelKind::Mlp) return forward(x);
  if (x.size() != spec_.input) throw ShapeMismatch("input width does not match the model");
  if (hidden.h.size() != static_cast<std::size_t>(spec_.layers) || hidden.c.size() != hidden.h.size()) {
    throw ShapeMismatch("hidden state does not match the model");
  }
  const Layout lay = layout_of(spec_);
  const int h = spec_.hidden;
  Eigen::VectorXd in = x;
  for (std::size_t l = 0; l < lay.lstm.size(); ++l) {
    const auto& L = lay.lstm[l];
    const ConstMat wx(params_.data() + L.wx, 4 * h, L.in);
    const ConstMat wh(params_.data() + L.wh, 4 * h, h);
    const ConstVec b(params_.data() + L.b, 4 * h);
    Eigen::VectorXd z = wx * in + wh * hidden.h[l] + b;
    const Eigen::ArrayXd ig = sigmoid(z.head(h)).array();
    const Eigen::ArrayXd fg = sigmoid(z.segment(h, h)).array();
    const Eigen::ArrayXd gg = z.segment(2 * h, h).array().tanh();
    const Eigen::ArrayXd og = sigmoid(z.tail(h)).array();
    hidden.c[l] = (fg * hidden.c[l].array() + ig * gg).matrix();
    hidden.h[l] = (og * hidden.c[l].array().tanh()).matrix();
    in = hidden.h[l];
  }
  return weights(params_, lay.dense[0]) * in + bias(params_, lay.dense[0]);
}

double mlp_loss(const Model& model, const PairBatch& batch, Eigen::VectorXd* grad) {
  const ModelSpec& spec = model.spec();
  if (spec.kind != ModelKind::Mlp) throw ShapeMismatch("mlp_loss needs an MLP");
  check_batch(spec, batch.inputs, batch.targets, batch.weights);
  const Layout lay = layout_of(spec);
  const Eigen::VectorXd& p = model.params();

  std::vector<Eigen::MatrixXd> acts{batch.inputs};
  for (std::size_t i = 0; i < lay.dense.size(); ++i) {
    Eigen::MatrixXd z = weights(p, lay.dense[i]) * acts.back();
    z.colwise() += bias(p, lay.dense[i]);
    if (i + 1 < lay.dense.size()) z = z.array().tanh();
    acts.push_back(std::move(z));
  }
  const double scale = weight_scale(batch.weights, spec.output);
  const Eigen::MatrixXd diff = acts.back() - batch.targets;
  const double loss = (diff.colwise().squaredNorm().transpose().cwiseProduct(batch.weights)).sum() * scale;
  if (grad == nullptr) return loss;

  grad->setZero(p.size());
  Eigen::MatrixXd d = 2.0 * scale * diff * batch.weights.asDiagonal();
  for (std::size_t i = lay.dense.size(); i-- > 0;) {
    const Affine& a = lay.dense[i];
    if (i + 1 < lay.dense.size()) d = d.cwiseProduct((1.0 - acts[i + 1].array().square()).matrix());
    MutMat(grad->data() + a.w, a.rows, a.cols).noalias() += d * acts[i].transpose();
    MutVec(grad->data() + a.b, a.rows) += d.rowwise().sum();
    if (i > 0) d = weights(p, a).transpose() * d;
  }
  return loss;
}

double lstm_loss(const Model& model, const SequenceBatch& batch, Eigen::VectorXd* grad) {
  const ModelSpec& spec = model.spec();
  if (spec.kind != ModelKind::Lstm) throw ShapeMismatch("lstm_loss needs an LSTM");
  check_batch(spec, batch.inputs, batch.targets, batch.weights);
  if (static_cast<Eigen::Index>(batch.steps) * batch.batch != batch.inputs.cols()) {
    throw ShapeMismatch("sequence batch: steps x batch does not match the column count");
  }
  const Layout lay = layout_of(spec);
  const Eigen::VectorXd& p = model.params();
  const int h = spec.hidden;

  std::vector<LstmTape> tapes;
  const Eigen::MatrixXd* in = &batch.inputs;
  for (const auto& l : lay.lstm) {
    tapes.push_back(lstm_layer_forward(p, l, h, *in, batch.steps, batch.batch));
    in = &tapes.back().out;
  }
  const Affine& head = lay.dense[0];
  Eigen::MatrixXd y = weights(p, head) * tapes.back().out;
  y.colwise() += bias(p, head);
  const double scale = weight_scale(batch.weights, spec.output);
  const Eigen::MatrixXd diff = y - batch.targets;
  const double loss = (diff.colwise().squaredNorm().transpose().cwiseProduct(batch.weights)).sum() * scale;
  if (grad == nullptr) return loss;

  grad->setZero(p.size());
  const Eigen::MatrixXd dy = 2.0 * scale * diff * batch.weights.asDiagonal();
  MutMat(grad->data() + head.w, head.rows, head.cols).noalias() += dy * tapes.back().out.transpose();
  MutVec(grad->data() + head.b, head.rows) += dy.rowwise().sum();
  Eigen::MatrixXd d = weights(p, head).transpose() * dy;
  for (std::size_t l = lay.lstm.size(); l-- > 0;) {
    const Eigen::MatrixXd& x = l == 0 ? batch.inputs : tapes[l - 1].out;
    d = lstm_layer_backward(p, *grad, lay.lstm[l], h, x, tapes[l], d, batch.steps, batch.batch);
  }
  return loss;
}

void adam_step(Eigen::VectorXd& w, const Eigen::VectorXd& grad, AdamState& st, double lr) {
  if (grad.size() != w.size()) throw ShapeMismatch("adam: gradient length differs from weights");
  if (st.m.size() != w.size()) {
    st.m = Eigen::VectorXd::Zero(w.size());
    st.v = Eigen::VectorXd::Zero(w.size());
  }
  ++st.step;
  st.m = AdamState::kBeta1 * st.m + (1.0 - AdamState::kBeta1) * grad;
  st.v = AdamState::kBeta2 * st.v + (1.0 - AdamState::kBeta2) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(AdamState::kBeta1, static_cast<double>(st.step));
  const double c2 = 1.0 - std::pow(AdamState::kBeta2, static_cast<double>(st.step));
  w.array() -= lr * (st.m.array() / c1) / ((st.v.array() / c2).sqrt() + AdamState::kEpsilon);
}

TrainingData make_training_data(const PreparedSet& normalized, bool mask_padding) {
  TrainingData data;
  for (std::size_t i = 0; i < normalized.sequences.size(); ++i) {
    const PaddedSequence& seq = normalized.sequences[i];
    const auto pairs = build_training_pairs(seq.data, i);
    PairBatch b;
    const auto n = static_cast<Eigen::Index>(pairs.size());
    b.inputs.resize(kInputDim, n);
    b.targets.resize(kOutputDim, n);
    b.weights = Eigen::VectorXd::Ones(n);
    for (Eigen::Index j = 0; j < n; ++j) {
      const auto& pr = pairs[static_cast<std::size_t>(j)];
      b.inputs.col(j) = pr.input;
      b.targets.col(j) = pr.target;
      if (mask_padding && seq.padded(pr.k + 1)) b.weights[j] = 0.0;
    }
    data.sequences.push_back(std::move(b));
  }
  return data;
}

void TrainConfig::validate() const {
  if (!(lr > 0)) throw ConfigError("train: lr must be > 0");
  if (batch < 1) throw ConfigError("train: batch must be >= 1");
  if (max_epochs < 1) throw ConfigError("train: max_epochs must be >= 1");
  if (noise_variance < 0) throw ConfigError("train: noise variance must be >= 0");
}

namespace {

PairBatch concat_pairs(const TrainingData& data) {
  Eigen::Index n = 0;
  for (const auto& s : data.sequences) n += s.inputs.cols();
  PairBatch all;
  if (data.sequences.empty()) return all;
  all.inputs.resize(data.sequences[0].inputs.rows(), n);
  all.targets.resize(data.sequences[0].targets.rows(), n);
  all.weights.resize(n);
  Eigen::Index at = 0;
  for (const auto& s : data.sequences) {
    all.inputs.middleCols(at, s.inputs.cols()) = s.inputs;
    all.targets.middleCols(at, s.inputs.cols()) = s.targets;
    all.weights.segment(at, s.inputs.cols()) = s.weights;
    at += s.inputs.cols();
  }
  return all;
}

SequenceBatch gather_sequences(const TrainingData& data, const std::vector<std::size_t>& ids) {
  SequenceBatch b;
  b.batch = static_cast<int>(ids.size());
  b.steps = static_cast<int>(data.sequences[ids[0]].inputs.cols());
  const Eigen::Index cols = static_cast<Eigen::Index>(b.steps) * b.batch;
  b.inputs.resize(data.sequences[ids[0]].inputs.rows(), cols);
  b.targets.resize(data.sequences[ids[0]].targets.rows(), cols);
  b.weights.resize(cols);
  for (std::size_t j = 0; j < ids.size(); ++j) {
    const PairBatch& s = data.sequences[ids[j]];
    if (s.inputs.cols() != b.steps) throw ShapeMismatch("LSTM training needs equal-length sequences");
    for (int t = 0; t < b.steps; ++t) {
      const Eigen::Index c = static_cast<Eigen::Index>(t) * b.batch + static_cast<Eigen::Index>(j);
      b.inputs.col(c) = s.inputs.col(t);
      b.targets.col(c) = s.targets.col(t);
      b.weights[c] = s.weights[t];
    }
  }
  return b;
}

}  // namespace

double evaluate_loss(const Model& model, const TrainingData& data) {
  if (data.empty()) throw ConfigError("evaluate_loss: empty data");
  if (model.spec().kind == ModelKind::Mlp) return mlp_loss(model, concat_pairs(data));
  constexpr std::size_t kChunk = 64;
  double acc = 0.0;
  double weight = 0.0;
  for (std::size_t from = 0; from < data.sequences.size(); from += kChunk) {
    std::vector<std::size_t> ids;
    for (std::size_t i = from; i < std::min(from + kChunk, data.sequences.size()); ++i) ids.push_back(i);
    const SequenceBatch b = gather_sequences(data, ids);
    const double w = b.weights.sum();
    acc += w * lstm_loss(model, b);
    weight += w;
  }
  return weight > 0 ? acc / weight : 0.0;
}

TrainResult train(const ModelSpec& spec, const TrainingData& train_set, const TrainingData& val_set,
                  const TrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  if (train_set.empty() || val_set.empty()) throw ConfigError("train: empty training or validation set");
  Model model = Model::random(spec, cfg.seed);
  std::mt19937_64 rng(cfg.seed + 1);
  std::normal_distribution<double> noise(0.0, std::sqrt(cfg.noise_variance));
  AdamState adam;
  Eigen::VectorXd grad;
  TrainResult result;
  double best = std::numeric_limits<double>::infinity();

  const bool mlp = spec.kind == ModelKind::Mlp;
  const PairBatch pool = mlp ? concat_pairs(train_set) : PairBatch{};
  const std::size_t units = mlp ? pool.size() : train_set.sequences.size();
  std::vector<std::size_t> order(units);

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    double acc = 0.0;
    double weight = 0.0;
    for (std::size_t from = 0; from < units; from += static_cast<std::size_t>(cfg.batch)) {
      const std::size_t to = std::min(units, from + static_cast<std::size_t>(cfg.batch));
      const std::vector<std::size_t> ids(order.begin() + static_cast<std::ptrdiff_t>(from),
                                         order.begin() + static_cast<std::ptrdiff_t>(to));
      double loss = 0.0;
      double w = 0.0;
      if (mlp) {
        PairBatch b;
        b.inputs = pool.inputs(Eigen::all, ids);
        b.targets = pool.targets(Eigen::all, ids);
        b.weights = pool.weights(ids);
        if (cfg.noise_variance > 0) b.inputs = b.inputs.unaryExpr([&](double v) { return v + noise(rng); });
        loss = mlp_loss(model, b, &grad);
        w = b.weights.sum();
      } else {
        SequenceBatch b = gather_sequences(train_set, ids);
        if (cfg.noise_variance > 0) b.inputs = b.inputs.unaryExpr([&](double v) { return v + noise(rng); });
        loss = lstm_loss(model, b, &grad);
        w = b.weights.sum();
      }
      if (!std::isfinite(loss) || !grad.allFinite()) {
        throw Diverged("training diverged at epoch " + std::to_string(epoch));
      }
      adam_step(model.params(), grad, adam, cfg.lr);
      acc += w * loss;
      weight += w;
    }
    const double train_mse = weight > 0 ? acc / weight : 0.0;
    const double val_mse = evaluate_loss(model, val_set);
    if (!std::isfinite(val_mse)) throw Diverged("validation loss is not finite at epoch " + std::to_string(epoch));
    result.log.train_mse.push_back(train_mse);
    result.log.val_mse.push_back(val_mse);
    if (val_mse < best) {
      best = val_mse;
      result.best = model;
      result.log.best_epoch = epoch;
    }
    if (on_epoch) on_epoch(epoch, train_mse, val_mse);
  }
  return result;
}

void write_training_log(const TrainLog& log, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "epoch,train_mse,val_mse\n";
  char buf[96];
  for (std::size_t i = 0; i < log.train_mse.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%zu,%.9g,%.9g\n", i + 1, log.train_mse[i], log.val_mse[i]);
    out << buf;
  }
}

void save_weights(const Model& model, const std::optional<NormStats>& norm,
                  const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  const ModelSpec& s = model.spec();
  out.write("FGW1", 4);
  write_u32(out, static_cast<std::uint32_t>(s.kind));
  write_u32(out, static_cast<std::uint32_t>(s.layers));
  write_u32(out, static_cast<std::uint32_t>(s.hidden));
  const auto widths = s.widths();
  write_u32(out, static_cast<std::uint32_t>(widths.size()));
  for (int w : widths) write_u32(out, static_cast<std::uint32_t>(w));
  write_u64(out, static_cast<std::uint64_t>(model.params().size()));
  out.write(reinterpret_cast<const char*>(model.params().data()),
            static_cast<std::streamsize>(sizeof(double) * model.params().size()));
  write_u32(out, norm ? 1u : 0u);
  if (norm) {
    const auto n = static_cast<std::uint32_t>(norm->mean.size());
    write_u32(out, n);
    out.write(reinterpret_cast<const char*>(norm->mean.data()), static_cast<std::streamsize>(8 * n));
    out.write(reinterpret_cast<const char*>(norm->std.data()), static_cast<std::streamsize>(8 * n));
    for (bool d : norm->degenerate) out.put(d ? 1 : 0);
  }
  if (!out) throw IoError("write failed: " + path.string());
}

Model load_weights(const std::filesystem::path& path, std::optional<NormStats>* norm) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  const std::string file = path.string();
  char magic[4] = {};
  if (!in.read(magic, 4)) throw TruncatedFile(file + ": unexpected end of file");
  if (std::memcmp(magic, "FGW1", 4) != 0) throw BadMagic(file + ": not an FGW1 weight file");
  ModelSpec spec;
  const auto kind = read_raw<std::uint32_t>(in, file);
  if (kind > 1) throw ParseError(file, 0, "unknown model type " + std::to_string(kind));
  spec.kind = static_cast<ModelKind>(kind);
  spec.layers = static_cast<int>(read_raw<std::uint32_t>(in, file));
  spec.hidden = static_cast<int>(read_raw<std::uint32_t>(in, file));
  const auto nw = read_raw<std::uint32_t>(in, file);
  if (nw < 2 || nw > 4096) throw ParseError(file, 0, "bad width count");
  std::vector<int> widths(nw);
  for (auto& w : widths) w = static_cast<int>(read_raw<std::uint32_t>(in, file));
  spec.input = widths.front();
  spec.output = widths.back();
  if (spec.widths() != widths) throw ParseError(file, 0, "width list disagrees with the header");
  Model model(spec);
  const auto count = read_raw<std::uint64_t>(in, file);
  if (count != static_cast<std::uint64_t>(model.params().size())) {
    throw ParseError(file, 0, "parameter count disagrees with the header");
  }
  if (!in.read(reinterpret_cast<char*>(model.params().data()), static_cast<std::streamsize>(8 * count))) {
    throw TruncatedFile(file + ": parameters truncated");
  }
  const auto has_norm = read_raw<std::uint32_t>(in, file);
  if (has_norm == 1) {
    NormStats st;
    const auto n = read_raw<std::uint32_t>(in, file);
    if (n != static_cast<std::uint32_t>(kJointColumns)) throw ParseError(file, 0, "normalization block has the wrong size");
    if (!in.read(reinterpret_cast<char*>(st.mean.data()), 8 * n) ||
        !in.read(reinterpret_cast<char*>(st.std.data()), 8 * n)) {
      throw TruncatedFile(file + ": normalization block truncated");
    }
    for (std::uint32_t i = 0; i < n; ++i) st.degenerate[i] = read_raw<char>(in, file) != 0;
    if (norm != nullptr) *norm = st;
  } else if (norm != nullptr) {
    norm->reset();
  }
  return model;
}

}  // namespace forcegen
