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

#include "forcegen/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

namespace forcegen {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, const char* want) {
  throw ConfigError("config " + std::string(key) + ": '" + std::string(value) + "' is not " + want);
}

double to_double(std::string_view key, std::string_view v) {
  double out = 0.0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) bad_value(key, v, "a number");
  return out;
}

template <typename Int>
Int to_int(std::string_view key, std::string_view v) {
  Int out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) bad_value(key, v, "an integer");
  return out;
}

std::string show(double v) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, p);
}

struct Entry {
  ConfigKey key;
  std::function<void(AppConfig&, std::string_view)> set;
  std::function<std::string(const AppConfig&)> get;
};

template <typename Ref>
Entry real(const char* name, const char* doc, Ref ref) {
  return {{name, doc},
          [=](AppConfig& c, std::string_view v) { ref(c) = to_double(name, v); },
          [=](const AppConfig& c) { return show(ref(const_cast<AppConfig&>(c))); }};
}

template <typename Int, typename Ref>
Entry integer(const char* name, const char* doc, Ref ref) {
  return {{name, doc},
          [=](AppConfig& c, std::string_view v) { ref(c) = to_int<Int>(name, v); },
          [=](const AppConfig& c) { return std::to_string(ref(const_cast<AppConfig&>(c))); }};
}

template <typename Ref>
Entry flag(const char* name, const char* doc, Ref ref) {
  return {{name, doc},
          [=](AppConfig& c, std::string_view v) {
            if (v == "true" || v == "1") {
              ref(c) = true;
            } else if (v == "false" || v == "0") {
              ref(c) = false;
            } else {
              bad_value(name, v, "true or false");
            }
          },
          [=](const AppConfig& c) { return std::string(ref(const_cast<AppConfig&>(c)) ? "true" : "false"); }};
}

template <typename Ref>
Entry triple(const char* name, const char* doc, Ref ref) {
  return {{name, doc},
          [=](AppConfig& c, std::string_view v) {
            JointVector out;
            std::size_t start = 0;
            for (int j = 0; j < kDof; ++j) {
              const auto comma = v.find(',', start);
              if ((j < kDof - 1) == (comma == std::string_view::npos)) bad_value(name, v, "three comma-separated numbers");
              out[j] = to_double(name, trim(v.substr(start, comma - start)));
              start = comma + 1;
            }
            ref(c) = out;
          },
          [=](const AppConfig& c) {
            const JointVector& x = ref(const_cast<AppConfig&>(c));
            return show(x[0]) + "," + show(x[1]) + "," + show(x[2]);
          }};
}

#define FIELD(expr) [](AppConfig & c) -> auto& { return expr; }

const std::vector<Entry>& entries() {
  static const std::vector<Entry> all = [] {
    std::vector<Entry> e;
    e.push_back(integer<std::uint64_t>("seed", "master seed for collection and training", FIELD(c.seed)));

    e.push_back(real("arm.link1", "link 1 length (m)", FIELD(c.arm.link1)));
    e.push_back(real("arm.link2", "link 2 length (m)", FIELD(c.arm.link2)));
    e.push_back(real("arm.mass1", "link 1 mass (kg)", FIELD(c.arm.mass1)));
    e.push_back(real("arm.mass2", "link 2 mass (kg)", FIELD(c.arm.mass2)));
    e.push_back(real("arm.mass3", "pen carriage mass (kg)", FIELD(c.arm.mass3)));
    e.push_back(real("arm.inertia1", "link 1 inertia about its centre (kg m^2)", FIELD(c.arm.inertia1)));
    e.push_back(real("arm.inertia2", "link 2 inertia about its centre (kg m^2)", FIELD(c.arm.inertia2)));
    e.push_back(triple("arm.rotor", "reflected actuator inertia per joint", FIELD(c.arm.rotor)));
    e.push_back(triple("arm.viscous", "viscous friction per joint", FIELD(c.arm.viscous)));
    e.push_back(real("arm.gravity_comp", "gravity feedforward on the carriage (N)", FIELD(c.arm.gravity_comp)));
    e.push_back(real("arm.dt_phys", "physics substep (s)", FIELD(c.arm.dt_phys)));
    e.push_back(real("arm.tip_z0", "tip height at q3 = 0 (m)", FIELD(c.arm.tip_z0)));
    e.push_back(real("arm.velocity_cutoff", "velocity pseudo-differentiation cutoff (rad/s)", FIELD(c.arm.velocity_cutoff)));
    e.push_back(real("arm.observer_cutoff", "reaction force observer cutoff (rad/s)", FIELD(c.arm.observer_cutoff)));

    e.push_back(real("board.h", "board height for run, teach and sweep (m)", FIELD(c.board.height)));
    e.push_back(real("board.stiffness", "contact normal stiffness (N/m)", FIELD(c.board.normal_stiffness)));
    e.push_back(real("board.damping", "contact normal damping (N s/m)", FIELD(c.board.normal_damping)));
    e.push_back(real("board.friction", "Coulomb friction coefficient", FIELD(c.board.friction)));
    e.push_back(real("board.ink_threshold", "normal force that leaves ink (N)", FIELD(c.board.ink_threshold)));
    e.push_back(real("sensor.noise", "encoder noise std (rad, m on j3)", FIELD(c.sensor_noise)));

    e.push_back(real("bilateral.kp", "bilateral position gain", FIELD(c.bilateral.kp)));
    e.push_back(real("bilateral.kd", "bilateral velocity gain", FIELD(c.bilateral.kd)));
    e.push_back(real("bilateral.kf", "bilateral force gain", FIELD(c.bilateral.kf)));
    e.push_back(real("operator.stiffness", "scripted operator stiffness (N/m)", FIELD(c.op.stiffness)));
    e.push_back(real("operator.damping", "scripted operator damping (N s/m)", FIELD(c.op.damping)));
    e.push_back(real("teach.stiffness", "direct-teaching hand stiffness (N/m)", FIELD(c.teach_op.stiffness)));
    e.push_back(real("teach.damping", "direct-teaching hand damping (N s/m)", FIELD(c.teach_op.damping)));
    e.push_back(real("jitter.point", "per-trial stroke displacement (m)", FIELD(c.jitter.point_noise)));
    e.push_back(real("jitter.speed", "per-trial relative speed variation", FIELD(c.jitter.speed_noise)));
    e.push_back(real("jitter.press_depth", "how far below the board the operator aims (m)", FIELD(c.jitter.press_depth)));

    e.push_back(real("dataset.filter_cutoff", "zero-phase low-pass cutoff (rad/s)", FIELD(c.pipeline.filter_cutoff)));
    e.push_back(flag("dataset.mask_padding", "exclude padded samples from the loss", FIELD(c.pipeline.mask_padding)));
    e.push_back(integer<std::size_t>("dataset.train", "training episodes", FIELD(c.n_train)));
    e.push_back(integer<std::size_t>("dataset.val", "validation episodes", FIELD(c.n_val)));

    e.push_back(integer<int>("mlp.hidden", "MLP hidden width", FIELD(c.mlp.hidden)));
    e.push_back(integer<int>("mlp.layers", "MLP hidden layers", FIELD(c.mlp.layers)));
    e.push_back(integer<int>("lstm.hidden", "LSTM hidden width", FIELD(c.lstm.hidden)));
    e.push_back(integer<int>("lstm.layers", "LSTM recurrent layers", FIELD(c.lstm.layers)));
    e.push_back(real("train.mlp.lr", "MLP Adam learning rate", FIELD(c.train_mlp.lr)));
    e.push_back(integer<int>("train.mlp.batch", "MLP batch size (pairs)", FIELD(c.train_mlp.batch)));
    e.push_back(integer<int>("train.mlp.epochs", "MLP epochs", FIELD(c.train_mlp.max_epochs)));
    e.push_back(real("train.mlp.noise_variance", "MLP input noise variance (normalized units)", FIELD(c.train_mlp.noise_variance)));
    e.push_back(real("train.lstm.lr", "LSTM Adam learning rate", FIELD(c.train_lstm.lr)));
    e.push_back(integer<int>("train.lstm.batch", "LSTM batch size (sequences)", FIELD(c.train_lstm.batch)));
    e.push_back(integer<int>("train.lstm.epochs", "LSTM epochs", FIELD(c.train_lstm.max_epochs)));
    e.push_back(real("train.lstm.noise_variance", "LSTM input noise variance (normalized units)", FIELD(c.train_lstm.noise_variance)));

    e.push_back(triple("joint.kp", "follower joint position gains", FIELD(c.joint.kp)));
    e.push_back(triple("joint.kd", "follower joint velocity gains", FIELD(c.joint.kd)));
    e.push_back(triple("joint.kf", "follower joint force gains", FIELD(c.joint.kf)));
    e.push_back(real("pid.kp", "PID proportional gain around the network", FIELD(c.pid.kp)));
    e.push_back(real("pid.kd", "PID derivative gain", FIELD(c.pid.kd)));
    e.push_back(real("pid.ki", "PID integral gain", FIELD(c.pid.ki)));
    e.push_back({{"run.bridge", "hold or linear: how each 20 ms action reaches the 2 ms controller"},
                 [](AppConfig& c, std::string_view v) { c.bridge = parse_rate_bridge(v); },
                 [](const AppConfig& c) { return std::string(rate_bridge_name(c.bridge)); }});
    e.push_back(real("run.state_cutoff", "causal low-pass on the state fed to the network (rad/s, 0 = off)", FIELD(c.state_cutoff)));

    e.push_back(integer<int>("eval.repetitions", "repetitions per comparison cell", FIELD(c.repetitions)));
    e.push_back(integer<std::uint64_t>("eval.seed", "seed of the first demonstration", FIELD(c.eval_seed)));
    e.push_back(integer<std::uint64_t>("eval.seed_stride", "seed step between repetitions", FIELD(c.seed_stride)));
    e.push_back(real("eval.pen_radius", "raster pen radius (m)", FIELD(c.style.pen_radius)));
    e.push_back(real("eval.connect", "join ink points closer than this (m)", FIELD(c.style.connect_distance)));
    return e;
  }();
  return all;
}

#undef FIELD

const Entry& find(std::string_view key) {
  for (const auto& e : entries()) {
    if (e.key.name == key) return e;
  }
  throw ConfigError("unknown config key '" + std::string(key) + "'");
}

}  // namespace

TrainConfig AppConfig::desk_training(ModelKind kind) {
  TrainConfig t;
  t.lr = 1e-3;
  t.max_epochs = 100;
  t.batch = kind == ModelKind::Mlp ? 128 : 8;
  // Stronger input noise than 0.01 keeps closed-loop rollouts of the small
  // desk networks from drifting on their own prediction errors.
  t.noise_variance = 0.1;
  return t;
}

TeleopConfig AppConfig::teleop() const {
  TeleopConfig t;
  t.arm = arm;
  t.board = board;
  t.bilateral = bilateral;
  t.op = op;
  t.teach_op = teach_op;
  t.jitter = jitter;
  t.sensor_noise = sensor_noise;
  return t;
}

RunConfig AppConfig::run() const {
  RunConfig r;
  r.arm = arm;
  r.board = board;
  r.joint = joint;
  r.gains = pid;
  r.bridge = bridge;
  r.state_cutoff = state_cutoff;
  r.sensor_noise = sensor_noise;
  r.seed = seed;
  return r;
}

CompareConfig AppConfig::compare() const {
  CompareConfig c;
  c.repetitions = repetitions;
  c.seed = eval_seed;
  c.seed_stride = seed_stride;
  c.gains = pid;
  c.teleop = teleop();
  c.run = run();
  c.style = style;
  return c;
}

void AppConfig::validate() const {
  arm.validate();
  board.validate();
  run().validate();
  mlp.validate();
  lstm.validate();
  if (mlp.kind != ModelKind::Mlp || lstm.kind != ModelKind::Lstm) throw ConfigError("model kinds are fixed");
  train_mlp.validate();
  train_lstm.validate();
  if (!(pipeline.filter_cutoff > 0)) throw ConfigError("dataset.filter_cutoff must be > 0");
  if (repetitions < 1) throw ConfigError("eval.repetitions must be >= 1");
  if (!(style.pen_radius > 0) || !(style.connect_distance >= 0)) throw ConfigError("bad raster style");
  if (!(sensor_noise >= 0)) throw ConfigError("sensor.noise must be >= 0");
}

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> k;
    for (const auto& e : entries()) k.push_back(e.key);
    return k;
  }();
  return keys;
}

void set_config(AppConfig& cfg, std::string_view key, std::string_view value) {
  find(key).set(cfg, trim(value));
}

std::string get_config(const AppConfig& cfg, std::string_view key) { return find(key).get(cfg); }

std::string format_config(const AppConfig& cfg, bool with_docs) {
  std::ostringstream out;
  for (const auto& e : entries()) {
    if (with_docs) out << "# " << e.key.doc << '\n';
    out << e.key.name << '=' << e.get(cfg) << '\n';
  }
  return out.str();
}

void load_config(AppConfig& cfg, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError(path.string() + ":" + std::to_string(n) + ": expected key=value");
    try {
      set_config(cfg, trim(std::string_view(t).substr(0, eq)), std::string_view(t).substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(path.string() + ":" + std::to_string(n) + ": " + e.what());
    }
  }
}

}  // namespace forcegen
