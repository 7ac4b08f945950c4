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

#include "forcegen/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

namespace forcegen {

namespace {

constexpr const char* kChannelNames[kChannelGroups] = {"theta_cmd", "dtheta_cmd", "tau_cmd",
                                                       "theta_res", "dtheta_res", "tau_res"};
constexpr const char* kAuxNames[kAuxColumns] = {"tip_x", "tip_y", "tip_z", "fn"};

std::string fmt9(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double(const std::string& s, const std::string& file, std::size_t line) {
  double v = 0.0;
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) throw ParseError(file, line, "bad number '" + s + "'");
  return v;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

// Bilinear first-order low-pass with the state initialized to the first sample.
void lowpass_pass(std::vector<double>& x, double c) {
  const double b = c / (2.0 + c);
  const double a = (2.0 - c) / (2.0 + c);
  double x_prev = x.front();
  double y_prev = x.front();
  for (double& v : x) {
    const double y = b * (v + x_prev) + a * y_prev;
    x_prev = v;
    y_prev = y;
    v = y;
  }
}

}  // namespace

const char* channel_name(Channel c) { return kChannelNames[static_cast<int>(c)]; }

std::string column_name(int col) {
  return std::string(kChannelNames[col / kDof]) + "_j" + std::to_string(col % kDof + 1);
}

Episode Episode::with_length(std::size_t n, bool commands, bool aux) {
  Episode ep;
  ep.joints = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), kJointColumns);
  ep.aux = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), aux ? kAuxColumns : 0);
  ep.has_commands = commands;
  return ep;
}

JointVector Episode::get(std::size_t k, Channel c) const {
  return joints.row(static_cast<Eigen::Index>(k)).segment<kDof>(column(c, 0)).transpose();
}

void Episode::set(std::size_t k, Channel c, const JointVector& v) {
  joints.row(static_cast<Eigen::Index>(k)).segment<kDof>(column(c, 0)) = v.transpose();
}

Action Episode::action(std::size_t k) const {
  return {get(k, Channel::ThetaCmd), get(k, Channel::DthetaCmd), get(k, Channel::TauCmd)};
}

State Episode::state(std::size_t k) const {
  return {get(k, Channel::ThetaRes), get(k, Channel::DthetaRes), get(k, Channel::TauRes)};
}

void Episode::set_action(std::size_t k, const Action& a) {
  set(k, Channel::ThetaCmd, a.theta);
  set(k, Channel::DthetaCmd, a.dtheta);
  set(k, Channel::TauCmd, a.tau);
}

void Episode::set_state(std::size_t k, const State& s) {
  set(k, Channel::ThetaRes, s.theta);
  set(k, Channel::DthetaRes, s.dtheta);
  set(k, Channel::TauRes, s.tau);
}

void Episode::validate() const {
  if (joints.cols() != kJointColumns) throw Error("episode: expected 18 joint columns");
  if (aux.cols() != 0 && (aux.cols() != kAuxColumns || aux.rows() != joints.rows())) {
    throw Error("episode: aux series length differs from joint series");
  }
  if (!(dt > 0)) throw Error("episode: dt must be positive");
}

bool operator==(const Episode& a, const Episode& b) {
  return a.dt == b.dt && a.has_commands == b.has_commands && a.meta == b.meta &&
         a.joints.rows() == b.joints.rows() && a.joints == b.joints &&
         a.aux.rows() == b.aux.rows() && a.aux.cols() == b.aux.cols() && a.aux == b.aux;
}

std::vector<double> zero_phase_lowpass(std::span<const double> series, double cutoff, double dt) {
  const std::size_t n = series.size();
  if (n < 8) throw TooShort("zero_phase_lowpass: need at least 8 samples");
  if (!(cutoff > 0) || !(dt > 0)) throw ConfigError("zero_phase_lowpass: bad cutoff or dt");
  const std::size_t pad =
      std::min<std::size_t>(n - 1, static_cast<std::size_t>(std::lround(1.0 / cutoff / dt)));
  std::vector<double> x;
  x.reserve(n + 2 * pad);
  for (std::size_t i = pad; i >= 1; --i) x.push_back(2.0 * series[0] - series[i]);
  x.insert(x.end(), series.begin(), series.end());
  for (std::size_t i = 1; i <= pad; ++i) x.push_back(2.0 * series[n - 1] - series[n - 1 - i]);

  const double c = cutoff * dt;
  lowpass_pass(x, c);
  std::reverse(x.begin(), x.end());
  lowpass_pass(x, c);
  std::reverse(x.begin(), x.end());
  return {x.begin() + static_cast<std::ptrdiff_t>(pad),
          x.begin() + static_cast<std::ptrdiff_t>(pad + n)};
}

Episode zero_phase_lowpass(const Episode& ep, double cutoff) {
  Episode out = ep;
  const int first = ep.has_commands ? 0 : column(Channel::ThetaRes, 0);
  std::vector<double> col(ep.length());
  for (int c = first; c < kJointColumns; ++c) {
    for (std::size_t k = 0; k < ep.length(); ++k) col[k] = ep.joints(static_cast<Eigen::Index>(k), c);
    const auto f = zero_phase_lowpass(col, cutoff, ep.dt);
    for (std::size_t k = 0; k < ep.length(); ++k) out.joints(static_cast<Eigen::Index>(k), c) = f[k];
  }
  return out;
}

std::vector<double> add_noise(std::span<const double> series, double variance,
                              std::uint64_t seed) {
  std::vector<double> out(series.begin(), series.end());
  Eigen::Map<Eigen::MatrixXd> view(out.data(), static_cast<Eigen::Index>(out.size()), 1);
  add_noise(view, variance, seed);
  return out;
}

void add_noise(Eigen::Ref<Eigen::MatrixXd> values, double variance, std::uint64_t seed) {
  if (variance < 0) throw ConfigError("add_noise: negative variance");
  if (variance == 0) return;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, std::sqrt(variance));
  for (Eigen::Index c = 0; c < values.cols(); ++c) {
    for (Eigen::Index r = 0; r < values.rows(); ++r) values(r, c) += dist(rng);
  }
}

std::vector<Episode> resample_phase_shift(const Episode& ep, int factor) {
  if (factor < 1) throw ConfigError("resample_phase_shift: factor must be >= 1");
  const auto n = static_cast<Eigen::Index>(ep.length());
  if (n < factor) throw TooShort("resample_phase_shift: episode shorter than factor");
  std::vector<Episode> out;
  for (Eigen::Index p = 0; p < factor; ++p) {
    const Eigen::Index m = (n - p + factor - 1) / factor;
    Episode s = Episode::with_length(static_cast<std::size_t>(m), ep.has_commands, ep.has_aux());
    s.dt = ep.dt * factor;
    s.meta = ep.meta;
    s.meta["phase"] = std::to_string(p);
    for (Eigen::Index i = 0; i < m; ++i) {
      s.joints.row(i) = ep.joints.row(p + i * factor);
      if (ep.has_aux()) s.aux.row(i) = ep.aux.row(p + i * factor);
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<PaddedSequence> pad_to_length(const std::vector<Episode>& sequences,
                                          std::size_t length) {
  std::vector<PaddedSequence> out;
  out.reserve(sequences.size());
  for (const auto& s : sequences) {
    const std::size_t n = s.length();
    if (n == 0) throw TooShort("pad_to_length: empty sequence");
    if (n > length) throw ConfigError("pad_to_length: sequence longer than target length");
    PaddedSequence p{s, n};
    const auto rows = static_cast<Eigen::Index>(length);
    p.data.joints.conservativeResize(rows, Eigen::NoChange);
    if (s.has_aux()) p.data.aux.conservativeResize(rows, Eigen::NoChange);
    for (Eigen::Index r = static_cast<Eigen::Index>(n); r < rows; ++r) {
      p.data.joints.row(r) = s.joints.row(static_cast<Eigen::Index>(n) - 1);
      if (s.has_aux()) p.data.aux.row(r) = s.aux.row(static_cast<Eigen::Index>(n) - 1);
    }
    out.push_back(std::move(p));
  }
  return out;
}

NormStats NormStats::compute(const std::vector<PaddedSequence>& sequences) {
  NormStats st;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(kJointColumns);
  double count = 0;
  for (const auto& s : sequences) {
    sum += s.data.joints.colwise().sum().transpose();
    count += static_cast<double>(s.data.joints.rows());
  }
  if (count == 0) throw Error("NormStats: no samples");
  st.mean = sum / count;
  Eigen::VectorXd sq = Eigen::VectorXd::Zero(kJointColumns);
  for (const auto& s : sequences) {
    sq += (s.data.joints.rowwise() - st.mean.transpose()).array().square().colwise().sum().matrix().transpose();
  }
  st.std = (sq / count).array().sqrt();
  for (int c = 0; c < kJointColumns; ++c) {
    if (st.std[c] < 1e-8) {
      st.std[c] = 1.0;
      st.degenerate[static_cast<std::size_t>(c)] = true;
    }
  }
  return st;
}

Eigen::MatrixXd NormStats::apply(const Eigen::MatrixXd& joints) const {
  return (joints.rowwise() - mean.transpose()).array().rowwise() / std.transpose().array();
}

Eigen::MatrixXd NormStats::invert(const Eigen::MatrixXd& joints) const {
  return (joints.array().rowwise() * std.transpose().array()).matrix().rowwise() +
         mean.transpose();
}

Eigen::VectorXd NormStats::apply_input(const Eigen::VectorXd& x) const {
  Eigen::VectorXd out(kInputDim);
  const auto& cols = input_columns();
  for (int i = 0; i < kInputDim; ++i) out[i] = (x[i] - mean[cols[i]]) / std[cols[i]];
  return out;
}

Eigen::VectorXd NormStats::invert_output(const Eigen::VectorXd& y) const {
  Eigen::VectorXd out(kOutputDim);
  const auto& cols = output_columns();
  for (int i = 0; i < kOutputDim; ++i) out[i] = y[i] * std[cols[i]] + mean[cols[i]];
  return out;
}

Eigen::VectorXd NormStats::apply_output(const Eigen::VectorXd& y) const {
  Eigen::VectorXd out(kOutputDim);
  const auto& cols = output_columns();
  for (int i = 0; i < kOutputDim; ++i) out[i] = (y[i] - mean[cols[i]]) / std[cols[i]];
  return out;
}

void write_norm(const NormStats& stats, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "channel,mean,std\n";
  for (int c = 0; c < kJointColumns; ++c) {
    out << column_name(c) << ',' << fmt9(stats.mean[c]) << ',' << fmt9(stats.std[c]) << '\n';
  }
}

NormStats read_norm(const std::filesystem::path& path) {
  auto in = open_in(path);
  const std::string file = path.string();
  std::string line;
  std::size_t lineno = 1;
  if (!std::getline(in, line) || line.rfind("channel,mean,std", 0) != 0) {
    throw ParseError(file, 1, "expected header 'channel,mean,std'");
  }
  NormStats st;
  std::vector<bool> seen(kJointColumns, false);
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv(line);
    if (f.size() != 3) throw ParseError(file, lineno, "expected 3 columns, got " + std::to_string(f.size()));
    int col = -1;
    for (int c = 0; c < kJointColumns; ++c) {
      if (column_name(c) == f[0]) col = c;
    }
    if (col < 0) throw ParseError(file, lineno, "unknown channel '" + f[0] + "'");
    st.mean[col] = parse_double(f[1], file, lineno);
    st.std[col] = parse_double(f[2], file, lineno);
    if (!(st.std[col] > 0)) throw ParseError(file, lineno, "std must be positive");
    seen[static_cast<std::size_t>(col)] = true;
  }
  for (int c = 0; c < kJointColumns; ++c) {
    if (!seen[static_cast<std::size_t>(c)]) throw ParseError(file, lineno, "missing channel " + column_name(c));
  }
  return st;
}

const std::array<int, kInputDim>& input_columns() {
  static const std::array<int, kInputDim> cols = [] {
    std::array<int, kInputDim> c{};
    const Channel order[] = {Channel::ThetaRes, Channel::DthetaRes, Channel::TauRes,
                             Channel::ThetaCmd, Channel::DthetaCmd};
    for (int g = 0; g < 5; ++g) {
      for (int j = 0; j < kDof; ++j) c[static_cast<std::size_t>(g * kDof + j)] = column(order[g], j);
    }
    return c;
  }();
  return cols;
}

const std::array<int, kOutputDim>& output_columns() {
  static const std::array<int, kOutputDim> cols = [] {
    std::array<int, kOutputDim> c{};
    const Channel order[] = {Channel::ThetaRes, Channel::DthetaRes, Channel::TauRes,
                             Channel::ThetaCmd, Channel::DthetaCmd, Channel::TauCmd};
    for (int g = 0; g < 6; ++g) {
      for (int j = 0; j < kDof; ++j) c[static_cast<std::size_t>(g * kDof + j)] = column(order[g], j);
    }
    return c;
  }();
  return cols;
}

Eigen::VectorXd lower_layer_input(const State& s, const JointVector& upper_theta,
                                  const JointVector& upper_dtheta) {
  Eigen::VectorXd x(kInputDim);
  x << s.theta, s.dtheta, s.tau, upper_theta, upper_dtheta;
  return x;
}

std::vector<TrainingPair> build_training_pairs(const Episode& sequence, std::size_t sequence_id) {
  if (!sequence.has_commands) throw MissingCommands("build_training_pairs: sequence has no commands");
  const std::size_t n = sequence.length();
  std::vector<TrainingPair> pairs;
  if (n <= static_cast<std::size_t>(kLookahead)) return pairs;
  const auto& in_cols = input_columns();
  const auto& out_cols = output_columns();
  pairs.reserve(n - kLookahead);
  for (std::size_t k = 0; k + kLookahead < n; ++k) {
    TrainingPair p;
    p.input.resize(kInputDim);
    p.target.resize(kOutputDim);
    const auto rk = static_cast<Eigen::Index>(k);
    for (int i = 0; i < kInputDim; ++i) {
      const Eigen::Index row = i < 3 * kDof ? rk : rk + kLookahead;
      p.input[i] = sequence.joints(row, in_cols[static_cast<std::size_t>(i)]);
    }
    for (int i = 0; i < kOutputDim; ++i) {
      p.target[i] = sequence.joints(rk + 1, out_cols[static_cast<std::size_t>(i)]);
    }
    p.sequence_id = sequence_id;
    p.k = k;
    pairs.push_back(std::move(p));
  }
  return pairs;
}

Split split(const std::vector<Episode>& episodes, std::size_t n_train, std::size_t n_val,
            std::uint64_t seed) {
  if (episodes.size() != n_train + n_val) {
    throw CountMismatch("split: " + std::to_string(episodes.size()) + " episodes for " +
                        std::to_string(n_train) + " train + " + std::to_string(n_val) + " val");
  }
  std::map<std::string, std::vector<std::size_t>> cells;
  for (std::size_t i = 0; i < episodes.size(); ++i) {
    const auto& m = episodes[i].meta;
    const auto task = m.find("task");
    const auto h = m.find("board_h");
    const std::string key = (task == m.end() ? std::string("?") : task->second) + "@" +
                            (h == m.end() ? std::string("?") : h->second);
    cells[key].push_back(i);
  }
  std::mt19937_64 rng(seed);
  Split out;
  const double frac = static_cast<double>(n_val) / static_cast<double>(n_train + n_val);
  for (auto& [key, idx] : cells) {
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto nv = static_cast<std::size_t>(std::lround(frac * static_cast<double>(idx.size())));
    out.val.insert(out.val.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(nv));
    out.train.insert(out.train.end(), idx.begin() + static_cast<std::ptrdiff_t>(nv), idx.end());
  }
  if (out.val.size() != n_val || out.train.size() != n_train) {
    throw CountMismatch("split: stratification yields " + std::to_string(out.train.size()) +
                        "/" + std::to_string(out.val.size()));
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.val.begin(), out.val.end());
  return out;
}

std::map<std::string, std::string> read_key_values(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::map<std::string, std::string> kv;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(path.string(), lineno, "expected key=value");
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t");
      const auto e = s.find_last_not_of(" \t");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

void write_key_values(const std::map<std::string, std::string>& kv,
                      const std::filesystem::path& path) {
  auto out = open_out(path);
  for (const auto& [k, v] : kv) out << k << '=' << v << '\n';
}

void write_episode(const Episode& ep, const std::filesystem::path& dir) {
  ep.validate();
  std::filesystem::create_directories(dir);
  {
    auto out = open_out(dir / "episode.csv");
    out << "t,j,theta_cmd,dtheta_cmd,tau_cmd,theta_res,dtheta_res,tau_res\n";
    for (Eigen::Index k = 0; k < ep.joints.rows(); ++k) {
      const std::string t = fmt9(static_cast<double>(k) * ep.dt);
      for (int j = 0; j < kDof; ++j) {
        out << t << ',' << (j + 1);
        for (int g = 0; g < kChannelGroups; ++g) {
          out << ',';
          if (g >= 3 || ep.has_commands) out << fmt9(ep.joints(k, g * kDof + j));
        }
        out << '\n';
      }
    }
  }
  if (ep.has_aux()) {
    auto out = open_out(dir / "aux.csv");
    out << "t,tip_x,tip_y,tip_z,fn\n";
    for (Eigen::Index k = 0; k < ep.aux.rows(); ++k) {
      out << fmt9(static_cast<double>(k) * ep.dt);
      for (int c = 0; c < kAuxColumns; ++c) out << ',' << fmt9(ep.aux(k, c));
      out << '\n';
    }
  }
  auto meta = ep.meta;
  meta["dt"] = fmt9(ep.dt);
  meta["has_commands"] = ep.has_commands ? "1" : "0";
  write_key_values(meta, dir / "meta.txt");
}

Episode read_episode(const std::filesystem::path& dir) {
  Episode ep;
  ep.meta = read_key_values(dir / "meta.txt");
  if (auto it = ep.meta.find("dt"); it != ep.meta.end()) {
    ep.dt = parse_double(it->second, (dir / "meta.txt").string(), 0);
    ep.meta.erase(it);
  }
  if (auto it = ep.meta.find("has_commands"); it != ep.meta.end()) {
    ep.has_commands = it->second == "1";
    ep.meta.erase(it);
  }

  const std::string file = (dir / "episode.csv").string();
  auto in = open_in(dir / "episode.csv");
  std::string line;
  if (!std::getline(in, line) ||
      line.rfind("t,j,theta_cmd,dtheta_cmd,tau_cmd,theta_res,dtheta_res,tau_res", 0) != 0) {
    throw ParseError(file, 1, "unexpected header");
  }
  std::vector<std::array<double, kJointColumns>> rows;
  std::size_t lineno = 1;
  int expect_joint = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv(line);
    if (f.size() != 8) {
      throw ParseError(file, lineno, "row has " + std::to_string(f.size()) + " columns, expected 8");
    }
    const int j = static_cast<int>(parse_double(f[1], file, lineno));
    if (j != expect_joint) throw ParseError(file, lineno, "joint index out of sequence");
    if (j == 1) rows.emplace_back();
    for (int g = 0; g < kChannelGroups; ++g) {
      const auto& cell = f[static_cast<std::size_t>(2 + g)];
      double v = 0.0;
      if (g < 3 && !ep.has_commands) {
        if (!cell.empty()) throw ParseError(file, lineno, "command column present in response-only episode");
      } else {
        v = parse_double(cell, file, lineno);
      }
      rows.back()[static_cast<std::size_t>(g * kDof + j - 1)] = v;
    }
    expect_joint = j % kDof + 1;
  }
  if (expect_joint != 1) throw ParseError(file, lineno, "truncated joint block");
  ep.joints.resize(static_cast<Eigen::Index>(rows.size()), kJointColumns);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    for (int c = 0; c < kJointColumns; ++c) {
      ep.joints(static_cast<Eigen::Index>(k), c) = rows[k][static_cast<std::size_t>(c)];
    }
  }

  ep.aux.resize(static_cast<Eigen::Index>(rows.size()), 0);
  if (std::filesystem::exists(dir / "aux.csv")) {
    const std::string afile = (dir / "aux.csv").string();
    auto ain = open_in(dir / "aux.csv");
    if (!std::getline(ain, line) || line.rfind("t,tip_x,tip_y,tip_z,fn", 0) != 0) {
      throw ParseError(afile, 1, "unexpected header");
    }
    std::vector<std::array<double, kAuxColumns>> arows;
    lineno = 1;
    while (std::getline(ain, line)) {
      ++lineno;
      if (line.empty() || line == "\r") continue;
      const auto f = split_csv(line);
      if (f.size() != 5) {
        throw ParseError(afile, lineno, "row has " + std::to_string(f.size()) + " columns, expected 5");
      }
      std::array<double, kAuxColumns> r{};
      for (int c = 0; c < kAuxColumns; ++c) r[static_cast<std::size_t>(c)] = parse_double(f[static_cast<std::size_t>(c + 1)], afile, lineno);
      arows.push_back(r);
    }
    if (arows.size() != rows.size()) throw ParseError(afile, lineno, "aux length differs from episode length");
    ep.aux.resize(static_cast<Eigen::Index>(arows.size()), kAuxColumns);
    for (std::size_t k = 0; k < arows.size(); ++k) {
      for (int c = 0; c < kAuxColumns; ++c) ep.aux(static_cast<Eigen::Index>(k), c) = arows[k][static_cast<std::size_t>(c)];
    }
  }
  ep.validate();
  return ep;
}

PreparedSet prepare_sequences(const std::vector<Episode>& episodes, const PipelineConfig& cfg,
                              std::size_t pad_length) {
  std::vector<Episode> seqs;
  PreparedSet out;
  for (std::size_t i = 0; i < episodes.size(); ++i) {
    const Episode filtered = zero_phase_lowpass(episodes[i], cfg.filter_cutoff);
    for (auto& s : resample_phase_shift(filtered, cfg.resample_factor)) {
      pad_length = std::max(pad_length, s.length());
      seqs.push_back(std::move(s));
      out.sources.push_back(i);
    }
  }
  out.sequences = pad_to_length(seqs, pad_length);
  return out;
}

std::size_t max_length(const PreparedSet& set) {
  std::size_t n = 0;
  for (const auto& s : set.sequences) n = std::max(n, s.data.length());
  return n;
}

PreparedSet normalize(const PreparedSet& set, const NormStats& stats) {
  PreparedSet out = set;
  for (auto& s : out.sequences) s.data.joints = stats.apply(s.data.joints);
  return out;
}

}  // namespace forcegen
