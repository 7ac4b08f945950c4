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

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "forcegen/nn.hpp"

using namespace forcegen;

namespace {

PairBatch random_pairs(const ModelSpec& s, int n, unsigned seed) {
  std::srand(seed);
  PairBatch b;
  b.inputs = Eigen::MatrixXd::Random(s.input, n);
  b.targets = Eigen::MatrixXd::Random(s.output, n);
  b.weights = Eigen::VectorXd::Ones(n);
  return b;
}

SequenceBatch random_sequences(const ModelSpec& s, int steps, int batch, unsigned seed) {
  std::srand(seed);
  SequenceBatch b;
  b.steps = steps;
  b.batch = batch;
  b.inputs = Eigen::MatrixXd::Random(s.input, steps * batch);
  b.targets = Eigen::MatrixXd::Random(s.output, steps * batch);
  b.weights = Eigen::VectorXd::Ones(steps * batch);
  return b;
}

// Straight-line MLP evaluation with explicit loops.
Eigen::VectorXd mlp_oracle(const Model& m, const Eigen::VectorXd& x) {
  const auto w = m.spec().widths();
  const Eigen::VectorXd& p = m.params();
  std::size_t off = 0;
  std::vector<double> a(x.data(), x.data() + x.size());
  for (std::size_t l = 0; l + 1 < w.size(); ++l) {
    const int in = w[l];
    const int out = w[l + 1];
    std::vector<double> z(static_cast<std::size_t>(out));
    for (int r = 0; r < out; ++r) {
      double acc = 0.0;
      for (int c = 0; c < in; ++c) acc += p[static_cast<Eigen::Index>(off + static_cast<std::size_t>(r * in + c))] * a[static_cast<std::size_t>(c)];
      z[static_cast<std::size_t>(r)] = acc;
    }
    off += static_cast<std::size_t>(in * out);
    for (int r = 0; r < out; ++r) z[static_cast<std::size_t>(r)] += p[static_cast<Eigen::Index>(off + static_cast<std::size_t>(r))];
    off += static_cast<std::size_t>(out);
    if (l + 2 < w.size()) {
      for (double& v : z) v = std::tanh(v);
    }
    a = z;
  }
  return Eigen::Map<Eigen::VectorXd>(a.data(), static_cast<Eigen::Index>(a.size()));
}

template <typename LossFn>
double worst_directional_error(const Model& model, LossFn loss, int directions, unsigned seed) {
  Eigen::VectorXd grad;
  loss(model, &grad);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  double worst = 0.0;
  const double eps = 1e-5;
  for (int i = 0; i < directions; ++i) {
    Eigen::VectorXd d(model.params().size());
    for (Eigen::Index j = 0; j < d.size(); ++j) d[j] = nd(rng);
    d.normalize();
    Model plus = model;
    Model minus = model;
    plus.params() += eps * d;
    minus.params() -= eps * d;
    const double numeric = (loss(plus, nullptr) - loss(minus, nullptr)) / (2 * eps);
    const double analytic = grad.dot(d);
    worst = std::max(worst, std::abs(numeric - analytic) / std::max({std::abs(numeric), std::abs(analytic), 1e-12}));
  }
  return worst;
}

std::filesystem::path tmp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("forcegen_nn_" + name);
}

TrainingData toy_data(int sequences, int steps, unsigned seed, double noise) {
  // Smooth target: y = tanh(A x) with a fixed random A, plus optional label noise.
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  Eigen::MatrixXd a(kOutputDim, kInputDim);
  std::mt19937_64 fixed(1234);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = 0.4 * nd(fixed);
  TrainingData data;
  for (int s = 0; s < sequences; ++s) {
    PairBatch b;
    b.inputs.resize(kInputDim, steps);
    for (Eigen::Index i = 0; i < b.inputs.size(); ++i) b.inputs.data()[i] = nd(rng);
    b.targets = (a * b.inputs).array().tanh();
    for (Eigen::Index i = 0; i < b.targets.size(); ++i) b.targets.data()[i] += noise * nd(rng);
    b.weights = Eigen::VectorXd::Ones(steps);
    data.sequences.push_back(b);
  }
  return data;
}

}  // namespace

TEST_CASE("model shapes") {
  CHECK(ModelSpec::mlp(400, 6).widths().size() == 8);  // seven affine layers
  CHECK(ModelSpec::mlp(2, 1).parameter_count() == (15 * 2 + 2) + (2 * 18 + 18));
  const ModelSpec l = ModelSpec::lstm(4, 2);
  CHECK(l.parameter_count() == (16 * 15 + 16 * 4 + 16) + (16 * 4 + 16 * 4 + 16) + (18 * 4 + 18));
  CHECK_THROWS_AS(ModelSpec::lstm(4, 0).validate(), ConfigError);
  Model m(ModelSpec::mlp(3, 1));
  CHECK_THROWS_AS(m.forward(Eigen::MatrixXd::Zero(14, 1)), ShapeMismatch);
}

TEST_CASE("MLP forward") {
  const Model m = Model::random(ModelSpec::mlp(7, 3), 5);
  std::srand(3);
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(kInputDim, 4);
  const Eigen::MatrixXd y = m.forward(x);
  for (int c = 0; c < 4; ++c) CHECK((y.col(c) - mlp_oracle(m, x.col(c))).cwiseAbs().maxCoeff() < 1e-12);

  SUBCASE("zero weights give the output bias") {
    Model z(ModelSpec::mlp(5, 2));
    z.params().tail(kOutputDim).setLinSpaced(-1.0, 1.0);
    const Eigen::VectorXd out = z.forward(x.col(0));
    CHECK(out == z.params().tail(kOutputDim));
  }
  SUBCASE("memoryless") {
    Model::Hidden h = m.initial_hidden();
    const Eigen::VectorXd a = m.step(x.col(0), h);
    m.step(x.col(1), h);
    CHECK(m.step(x.col(0), h) == a);
  }
}

TEST_CASE("LSTM forward") {
  SUBCASE("zero weights") {
    Model z(ModelSpec::lstm(3, 2));
    z.params().tail(kOutputDim).setConstant(0.25);
    Model::Hidden h = z.initial_hidden();
    const Eigen::VectorXd y = z.step(Eigen::VectorXd::Ones(kInputDim), h);
    CHECK(y.isConstant(0.25));
    // Gates sit at 0.5 and the candidate at tanh(0) = 0.
    for (const auto& c : h.c) CHECK(c.isZero(0.0));
    for (const auto& v : h.h) CHECK(v.isZero(0.0));
  }
  SUBCASE("single cell by hand") {
    ModelSpec s{ModelKind::Lstm, 1, 1, 1, 1};
    Model m(s);
    // Layout: Wx (4x1), Wh (4x1), b (4), head W (1x1), head b.
    m.params() << 0.5, -0.3, 0.8, 0.2,  0.1, 0.4, -0.6, 0.3,  0.05, -0.1, 0.2, 0.0,  1.5, -0.2;
    auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
    double h = 0.0;
    double c = 0.0;
    Model::Hidden hid = m.initial_hidden();
    for (double x : {0.7, -1.2, 0.3}) {
      const double i = sig(0.5 * x + 0.1 * h + 0.05);
      const double f = sig(-0.3 * x + 0.4 * h - 0.1);
      const double g = std::tanh(0.8 * x - 0.6 * h + 0.2);
      const double o = sig(0.2 * x + 0.3 * h);
      c = f * c + i * g;
      h = o * std::tanh(c);
      const Eigen::VectorXd y = m.step(Eigen::VectorXd::Constant(1, x), hid);
      CHECK(y[0] == doctest::Approx(1.5 * h - 0.2).epsilon(1e-14));
    }
  }
  SUBCASE("stateful and replayable") {
    const Model m = Model::random(ModelSpec::lstm(6, 2), 9);
    const Eigen::VectorXd x = Eigen::VectorXd::Constant(kInputDim, 0.3);
    Model::Hidden a = m.initial_hidden();
    Model::Hidden b = m.initial_hidden();
    b.h[0].setConstant(0.5);
    CHECK((m.step(x, a) - m.step(x, b)).norm() > 1e-6);
    Model::Hidden r1 = m.initial_hidden();
    Model::Hidden r2 = m.initial_hidden();
    for (int k = 0; k < 4; ++k) CHECK(m.step(x * k, r1) == m.step(x * k, r2));
  }
  SUBCASE("batched loss agrees with stepping") {
    const ModelSpec s = ModelSpec::lstm(5, 2);
    const Model m = Model::random(s, 4);
    const SequenceBatch b = random_sequences(s, 6, 3, 8);
    double acc = 0.0;
    for (int j = 0; j < 3; ++j) {
      Model::Hidden h = m.initial_hidden();
      for (int t = 0; t < 6; ++t) {
        const Eigen::Index c = t * 3 + j;
        acc += (m.step(b.inputs.col(c), h) - b.targets.col(c)).squaredNorm();
      }
    }
    CHECK(lstm_loss(m, b) == doctest::Approx(acc / (18.0 * kOutputDim)).epsilon(1e-12));
  }
}

TEST_CASE("gradients match finite differences") {
  SUBCASE("MLP") {
    const ModelSpec s = ModelSpec::mlp(9, 3);
    const Model m = Model::random(s, 21);
    PairBatch b = random_pairs(s, 7, 2);
    b.weights[3] = 0.0;
    auto loss = [&](const Model& mm, Eigen::VectorXd* g) { return mlp_loss(mm, b, g); };
    CHECK(worst_directional_error(m, loss, 24, 1) < 1e-4);
  }
  SUBCASE("one-layer LSTM, five steps") {
    const ModelSpec s = ModelSpec::lstm(6, 1);
    const Model m = Model::random(s, 22);
    const SequenceBatch b = random_sequences(s, 5, 2, 3);
    auto loss = [&](const Model& mm, Eigen::VectorXd* g) { return lstm_loss(mm, b, g); };
    CHECK(worst_directional_error(m, loss, 24, 2) < 1e-4);
  }
  SUBCASE("stacked LSTM") {
    const ModelSpec s = ModelSpec::lstm(5, 2);
    const Model m = Model::random(s, 23);
    const SequenceBatch b = random_sequences(s, 7, 3, 4);
    auto loss = [&](const Model& mm, Eigen::VectorXd* g) { return lstm_loss(mm, b, g); };
    CHECK(worst_directional_error(m, loss, 24, 3) < 1e-4);
  }
  SUBCASE("zero error gives zero gradient") {
    const ModelSpec s = ModelSpec::mlp(4, 2);
    const Model m = Model::random(s, 1);
    PairBatch b = random_pairs(s, 5, 1);
    b.targets = m.forward(b.inputs);
    Eigen::VectorXd g;
    CHECK(mlp_loss(m, b, &g) == 0.0);
    CHECK(g.isZero(0.0));
  }
}

TEST_CASE("Adam") {
  SUBCASE("first step closed form") {
    Eigen::VectorXd w(3);
    w << 1.0, -2.0, 0.5;
    const Eigen::VectorXd g = (Eigen::VectorXd(3) << 0.3, -4.0, 0.0).finished();
    AdamState st;
    const Eigen::VectorXd w0 = w;
    adam_step(w, g, st, 0.01);
    // Bias-corrected moments equal g and g^2 on the first step.
    for (int i = 0; i < 3; ++i) {
      const double expect = w0[i] - 0.01 * g[i] / (std::abs(g[i]) + 1e-8);
      CHECK(w[i] == doctest::Approx(expect).epsilon(1e-14));
    }
    CHECK(st.step == 1);
  }
  SUBCASE("zero gradient") {
    Eigen::VectorXd w = Eigen::VectorXd::Ones(4);
    AdamState st;
    adam_step(w, Eigen::VectorXd::Zero(4), st, 0.1);
    CHECK(w == Eigen::VectorXd::Ones(4));
    CHECK(st.step == 1);
  }
}

TEST_CASE("training") {
  const TrainingData tr = toy_data(6, 40, 1, 0.0);
  const TrainingData va = toy_data(3, 40, 2, 0.0);

  SUBCASE("MLP learns and is deterministic") {
    TrainConfig cfg;
    cfg.lr = 3e-3;
    cfg.batch = 32;
    cfg.max_epochs = 60;
    cfg.seed = 7;
    const ModelSpec s = ModelSpec::mlp(32, 2);
    const TrainResult a = train(s, tr, va, cfg);
    const TrainResult b = train(s, tr, va, cfg);
    CHECK(a.best.params() == b.best.params());
    CHECK(a.log.val_mse == b.log.val_mse);
    CHECK(a.log.train_mse.back() < 0.5 * a.log.train_mse.front());
    const auto it = std::min_element(a.log.val_mse.begin(), a.log.val_mse.end());
    CHECK(a.log.best_epoch == 1 + (it - a.log.val_mse.begin()));
    CHECK(evaluate_loss(a.best, va) == doctest::Approx(*it));
  }

  SUBCASE("LSTM learns") {
    TrainConfig cfg;
    cfg.lr = 1e-2;
    cfg.batch = 2;
    cfg.max_epochs = 30;
    const TrainResult r = train(ModelSpec::lstm(16, 1), tr, va, cfg);
    CHECK(r.log.val_mse[static_cast<std::size_t>(r.log.best_epoch - 1)] < 0.5 * r.log.val_mse.front());
  }

  SUBCASE("overfit probe stops before the last epoch") {
    // Few noisy samples, a wide net, no input noise: validation turns upward.
    const TrainingData small = toy_data(1, 12, 3, 0.5);
    const TrainingData held = toy_data(4, 40, 4, 0.5);
    TrainConfig cfg;
    cfg.lr = 1e-2;
    cfg.batch = 12;
    cfg.max_epochs = 400;
    cfg.noise_variance = 0.0;
    const TrainResult r = train(ModelSpec::mlp(64, 2), small, held, cfg);
    CHECK(r.log.best_epoch < cfg.max_epochs);
    CHECK(r.log.val_mse.back() > r.log.val_mse[static_cast<std::size_t>(r.log.best_epoch - 1)]);
    CHECK(r.log.train_mse.back() < r.log.train_mse.front());
  }

  SUBCASE("log file") {
    TrainLog log;
    log.train_mse = {0.5, 0.25};
    log.val_mse = {0.6, 0.125};
    const auto path = tmp_file("log.csv");
    write_training_log(log, path);
    std::ifstream in(path);
    std::string all((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    CHECK(all == "epoch,train_mse,val_mse\n1,0.5,0.6\n2,0.25,0.125\n");
  }
}

TEST_CASE("weight files") {
  SUBCASE("round trip with normalization") {
    const Model m = Model::random(ModelSpec::lstm(4, 2), 3);
    NormStats st;
    st.mean.setLinSpaced(-1, 1);
    st.std.setLinSpaced(0.5, 2);
    st.degenerate[4] = true;
    const auto path = tmp_file("w.fgw");
    save_weights(m, st, path);
    std::optional<NormStats> back;
    const Model r = load_weights(path, &back);
    CHECK(r.spec() == m.spec());
    CHECK(r.params() == m.params());
    REQUIRE(back.has_value());
    CHECK(back->mean == st.mean);
    CHECK(back->std == st.std);
    CHECK(back->degenerate == st.degenerate);
  }
  SUBCASE("bad magic and truncation") {
    const auto path = tmp_file("bad.fgw");
    std::ofstream(path, std::ios::binary) << "FGW2xxxxxxxx";
    CHECK_THROWS_AS(load_weights(path), BadMagic);
    const Model m = Model::random(ModelSpec::mlp(3, 1), 1);
    save_weights(m, std::nullopt, path);
    std::filesystem::resize_file(path, std::filesystem::file_size(path) - 12);
    CHECK_THROWS_AS(load_weights(path), TruncatedFile);
  }
  SUBCASE("golden two-parameter model") {
    // MLP 1 -> 1 with no hidden layer: y = w x + b.
    const unsigned char bytes[] = {
        'F', 'G', 'W', '1',
        0, 0, 0, 0,  0, 0, 0, 0,  0, 0, 0, 0,  // kind, layers, hidden
        2, 0, 0, 0,  1, 0, 0, 0,  1, 0, 0, 0,  // widths {1, 1}
        2, 0, 0, 0, 0, 0, 0, 0,                // parameter count
        0, 0, 0, 0, 0, 0, 0xf8, 0x3f,          // 1.5
        0, 0, 0, 0, 0, 0, 0x00, 0xc0,          // -2.0
        0, 0, 0, 0};                           // no normalization block
    const auto path = tmp_file("golden.fgw");
    std::ofstream(path, std::ios::binary).write(reinterpret_cast<const char*>(bytes), sizeof(bytes));
    std::optional<NormStats> norm = NormStats{};
    const Model m = load_weights(path, &norm);
    CHECK_FALSE(norm.has_value());
    REQUIRE(m.params().size() == 2);
    CHECK(m.params()[0] == 1.5);
    CHECK(m.params()[1] == -2.0);
    CHECK(m.forward(Eigen::MatrixXd::Constant(1, 1, 2.0))(0, 0) == 1.0);
  }
}
