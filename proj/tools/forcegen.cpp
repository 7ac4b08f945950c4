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


// forcegen: collect demonstrations, train the lower-layer networks, run them
// on the simulated arm and evaluate. Exit codes: 0 ok, 2 usage or config
// error, 3 runtime failure.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "forcegen/config.hpp"
#include "forcegen/eval.hpp"
#include "forcegen/nn.hpp"
#include "forcegen/policy.hpp"
#include "forcegen/teleop.hpp"
#include "forcegen/trajectory.hpp"

namespace fs = std::filesystem;
using namespace forcegen;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

// FNV-1a, 64 bit. Identifies content in manifests; not a security boundary.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot read " + p.string());
  return {std::istreambuf_iterator<char>(in), {}};
}

std::vector<fs::path> files_under(const fs::path& root) {
  std::vector<fs::path> out;
  if (fs::is_regular_file(root)) return {root};
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::string hash_path(const fs::path& p) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& f : files_under(p)) {
    h = fnv1a(fs::relative(f, fs::is_directory(p) ? p : p.parent_path()).generic_string(), h);
    h = fnv1a(read_file(f), h);
  }
  return hex(h);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<double> parse_numbers(const std::string& s, const char* what) {
  std::vector<double> out;
  for (const auto& item : split_list(s)) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError(std::string(what) + ": '" + item + "' is not a number");
    }
  }
  return out;
}

std::string fmt(const char* f, double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

/// Everything that determines a subcommand's output, plus hashes of what it wrote.
class Manifest {
 public:
  Manifest(std::string command, const AppConfig& cfg) {
    lines_.push_back("command=" + command);
    std::istringstream in(format_config(cfg));
    for (std::string l; std::getline(in, l);) lines_.push_back("config." + l);
  }
  void arg(const std::string& key, const std::string& value) { lines_.push_back("arg." + key + "=" + value); }
  void input(const std::string& key, const fs::path& p) {
    if (!fs::exists(p)) throw ConfigError(key + ": " + p.string() + " does not exist");
    lines_.push_back("input." + key + "=" + hash_path(p));
  }
  std::string input_hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& l : lines_) h = fnv1a(l + "\n", h);
    return hex(h);
  }
  void write(const fs::path& out_dir) const {
    std::ostringstream out;
    for (const auto& l : lines_) out << l << '\n';
    out << "input_hash=" << input_hash() << '\n';
    for (const auto& f : files_under(out_dir)) {
      if (f.filename() == "manifest.txt") continue;
      out << "output." << fs::relative(f, out_dir).generic_string() << '=' << hash_path(f) << '\n';
    }
    std::ofstream(out_dir / "manifest.txt") << out.str();
  }

 private:
  std::vector<std::string> lines_;
};

struct Globals {
  std::string workdir = ".";
  std::string config_file;
  std::vector<std::string> overrides;
  int jobs = 1;
  bool print_defaults = false;
  std::string expect_manifest;
};

fs::path resolve(const Globals& g, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : fs::path(g.workdir) / path;
}

AppConfig build_config(const Globals& g) {
  AppConfig cfg;
  if (!g.config_file.empty()) load_config(cfg, resolve(g, g.config_file));
  for (const auto& kv : g.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    set_config(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  cfg.validate();
  return cfg;
}

fs::path prepare_out(const Globals& g, const std::string& out) {
  const fs::path dir = resolve(g, out);
  fs::create_directories(dir);
  return dir;
}

void check_manifest(const Globals& g, const Manifest& m) {
  if (!g.expect_manifest.empty() && g.expect_manifest != m.input_hash()) {
    throw ConfigError("manifest hash " + m.input_hash() + " does not match --manifest " + g.expect_manifest);
  }
}

std::vector<fs::path> episode_dirs(const fs::path& data) {
  if (!fs::is_directory(data)) throw ConfigError("data directory " + data.string() + " does not exist");
  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(data)) {
    if (e.is_directory() && fs::exists(e.path() / "episode.csv")) dirs.push_back(e.path());
  }
  std::sort(dirs.begin(), dirs.end());
  if (dirs.empty()) throw ConfigError("no episodes under " + data.string());
  return dirs;
}

LoadedModel load_model(const fs::path& path) {
  std::optional<NormStats> norm;
  Model m = load_weights(path, &norm);
  if (!norm) throw ConfigError(path.string() + " carries no normalization statistics");
  return {std::move(m), *norm};
}

double meta_height(const std::map<std::string, std::string>& meta, double fallback) {
  const auto it = meta.find("board_h");
  return it == meta.end() ? fallback : std::stod(it->second);
}

void write_points(const std::vector<Eigen::Vector2d>& pts, const fs::path& path, const char* kind,
                  bool append = false) {
  std::ofstream out(path, append ? std::ios::app : std::ios::out);
  if (!append) out << "kind,x,y\n";
  for (const auto& p : pts) out << kind << ',' << fmt("%.9g", p.x()) << ',' << fmt("%.9g", p.y()) << '\n';
}

void write_overlay(const std::vector<Eigen::Vector2d>& drawn, const std::vector<Eigen::Vector2d>& ref,
                   const fs::path& svg, const std::string& title) {
  write_overlay_svg(drawn, ref, svg, title);
  fs::path csv = svg;
  csv.replace_extension(".csv");
  write_points(drawn, csv, "drawn");
  write_points(ref, csv, "reference", true);
}

std::vector<Eigen::Vector2d> episode_ink(const Episode& ep, double threshold) {
  if (ep.aux.cols() != kAuxColumns) throw MissingAux("episode has no tip channels");
  std::vector<Eigen::Vector2d> pts;
  for (Eigen::Index i = 0; i < ep.aux.rows(); ++i) {
    if (ep.aux(i, 3) >= threshold) pts.emplace_back(ep.aux(i, 0), ep.aux(i, 1));
  }
  return pts;
}

// Subcommands ------------------------------------------------------------------

struct CollectArgs {
  std::string tasks;
  std::string heights;
  int trials = kProtocolTrials;
  std::string out;
};

int cmd_collect(const Globals& g, const CollectArgs& a) {
  const AppConfig cfg = build_config(g);
  std::vector<TaskId> tasks;
  if (a.tasks.empty()) {
    tasks = protocol_tasks();
  } else {
    for (const auto& t : split_list(a.tasks)) tasks.push_back(parse_task(t));
  }
  const std::vector<double> heights = a.heights.empty() ? protocol_heights() : parse_numbers(a.heights, "--heights");
  if (a.trials < 1) throw ConfigError("--trials must be >= 1");

  Manifest m("collect", cfg);
  std::string task_list;
  for (TaskId t : tasks) task_list += std::string(task_list.empty() ? "" : ",") + std::string(task_name(t));
  m.arg("tasks", task_list);
  std::string h_list;
  for (double h : heights) h_list += (h_list.empty() ? "" : ",") + format_height(h);
  m.arg("heights", h_list);
  m.arg("trials", std::to_string(a.trials));
  check_manifest(g, m);

  const fs::path out = prepare_out(g, a.out);
  std::vector<TaskSpec> specs;
  for (TaskId t : tasks) {
    for (double h : heights) {
      for (int s = 0; s < a.trials; ++s) specs.push_back({t, h, cfg.seed + static_cast<std::uint64_t>(s)});
    }
  }
  const TeleopConfig tc = cfg.teleop();
  std::vector<std::string> names(specs.size());
  parallel_for(specs.size(), g.jobs, [&](std::size_t i) {
    const Episode ep = collect_bilateral(specs[i], tc);
    char name[96];
    std::snprintf(name, sizeof(name), "%s_h%s_t%d", std::string(task_name(specs[i].task)).c_str(),
                  format_height(specs[i].board_h).c_str(), static_cast<int>(i % static_cast<std::size_t>(a.trials)));
    names[i] = name;
    write_episode(ep, out / names[i]);
  });
  std::ofstream index(out / "index.csv");
  index << "episode,task,board_h,seed\n";
  for (std::size_t i = 0; i < specs.size(); ++i) {
    index << names[i] << ',' << task_name(specs[i].task) << ',' << format_height(specs[i].board_h) << ','
          << specs[i].seed << '\n';
  }
  index.close();
  m.write(out);
  std::cout << "collected " << specs.size() << " episodes into " << out.string() << '\n';
  return 0;
}

struct TeachArgs {
  std::string task = "circleA";
  std::optional<double> height;
  std::optional<std::uint64_t> trial;
  std::string out;
};

int cmd_teach(const Globals& g, const TeachArgs& a) {
  const AppConfig cfg = build_config(g);
  const TaskSpec spec{parse_task(a.task), a.height.value_or(cfg.board.height), a.trial.value_or(cfg.eval_seed)};
  Manifest m("teach", cfg);
  m.arg("task", a.task);
  m.arg("height", format_height(spec.board_h));
  m.arg("trial", std::to_string(spec.seed));
  check_manifest(g, m);

  const fs::path out = prepare_out(g, a.out);
  const auto [upper, ep] = direct_teach(spec, cfg.teleop());
  write_upper(upper, out / "upper.csv");
  write_episode(ep, out / "episode");
  m.write(out);
  std::cout << "upper trajectory with " << upper.size() << " samples in " << (out / "upper.csv").string() << '\n';
  return 0;
}

struct TrainArgs {
  std::string model = "mlp";
  std::string data;
  std::string out;
};

int cmd_train(const Globals& g, const TrainArgs& a) {
  const AppConfig cfg = build_config(g);
  const ModelKind kind = parse_model_kind(a.model);
  const fs::path data = resolve(g, a.data);
  const auto dirs = episode_dirs(data);

  Manifest m("train", cfg);
  m.arg("model", model_kind_name(kind));
  m.input("data", data);
  check_manifest(g, m);

  std::vector<Episode> episodes;
  for (const auto& d : dirs) episodes.push_back(read_episode(d));
  const Split sp = split(episodes, cfg.n_train, cfg.n_val, cfg.seed);
  std::vector<Episode> tr, va;
  for (auto i : sp.train) tr.push_back(episodes[i]);
  for (auto i : sp.val) va.push_back(episodes[i]);

  // One padding length for every sequence keeps LSTM batches rectangular.
  const std::size_t pad = max_length(prepare_sequences(episodes, cfg.pipeline));
  const PreparedSet ptr = prepare_sequences(tr, cfg.pipeline, pad);
  const PreparedSet pva = prepare_sequences(va, cfg.pipeline, pad);
  const NormStats norm = NormStats::compute(ptr.sequences);
  const TrainingData dtr = make_training_data(normalize(ptr, norm), cfg.pipeline.mask_padding);
  const TrainingData dva = make_training_data(normalize(pva, norm), cfg.pipeline.mask_padding);

  ModelSpec spec = kind == ModelKind::Mlp ? cfg.mlp : cfg.lstm;
  TrainConfig tc = kind == ModelKind::Mlp ? cfg.train_mlp : cfg.train_lstm;
  tc.seed = cfg.seed;
  const TrainResult res = train(spec, dtr, dva, tc, [](int epoch, double t, double v) {
    std::fprintf(stderr, "epoch %d train %.6f val %.6f\n", epoch, t, v);
  });

  const fs::path out = prepare_out(g, a.out);
  save_weights(res.best, norm, out / "weights.fgw");
  write_norm(norm, out / "norm.csv");
  write_training_log(res.log, out / "log.csv");
  m.write(out);
  std::cout << "selected epoch " << res.log.best_epoch << " val "
            << fmt("%.6g", res.log.val_mse[static_cast<std::size_t>(res.log.best_epoch - 1)]) << '\n';
  return 0;
}

struct RunArgs {
  std::string weights;
  std::string upper;
  std::string gains;
  std::optional<double> height;
  bool playback = false;
  std::string out;
};

int cmd_run(const Globals& g, const RunArgs& a) {
  const AppConfig cfg = build_config(g);
  RunConfig rc = cfg.run();
  if (!a.gains.empty()) {
    const auto v = parse_numbers(a.gains, "--gains");
    if (v.size() != 3) throw ConfigError("--gains expects Kp,Kd,Ki");
    rc.gains = {v[0], v[1], v[2]};
    rc.gains.validate();
  }
  if (!a.playback && a.weights.empty()) throw ConfigError("run needs --weights or --playback");
  const fs::path upper_path = resolve(g, a.upper);
  Manifest m("run", cfg);
  m.input("upper", upper_path);
  if (a.playback) {
    m.arg("mode", "playback");
  } else {
    m.input("weights", resolve(g, a.weights));
    m.arg("gains", fmt("%.9g", rc.gains.kp) + "," + fmt("%.9g", rc.gains.kd) + "," + fmt("%.9g", rc.gains.ki));
  }
  const UpperTrajectory upper = read_upper(upper_path);
  rc.board.height = a.height.value_or(meta_height(upper.meta, cfg.board.height));
  m.arg("height", format_height(rc.board.height));
  check_manifest(g, m);

  RunResult r;
  if (a.playback) {
    r = run_playback(upper, rc);
  } else {
    const LoadedModel lm = load_model(resolve(g, a.weights));
    r = run_autonomous(lm.model, lm.norm, upper, rc);
  }
  const RunMetrics met = run_metrics(r, upper, rc.arm, rc.board, cfg.style);

  const fs::path out = prepare_out(g, a.out);
  write_episode(r.episode, out / "episode");
  write_points(r.ink, out / "ink.csv", "drawn");
  {
    const TimeSeries px = decimate(pen_x_series(r.episode), kRobotTicksPerPolicyTick);
    const TimeSeries ux = upper_pen_x(upper, rc.arm);
    std::ofstream f(out / "pen_x.csv");
    f << "t,pen_x,upper_x\n";
    for (std::size_t k = 0; k < std::min(px.size(), ux.size()); ++k) {
      f << fmt("%.9g", px.t[k]) << ',' << fmt("%.9g", px.v[k]) << ',' << fmt("%.9g", ux.v[k]) << '\n';
    }
  }
  {
    std::ofstream f(out / "metrics.csv");
    f << "rmse,iou,oscillation,max_tau,ink_fraction,max_fn\n"
      << fmt("%.9g", met.rmse) << ',' << fmt("%.9g", met.iou) << ',' << fmt("%.9g", met.oscillation) << ','
      << fmt("%.9g", met.max_tau) << ',' << fmt("%.9g", met.contact.ink_fraction) << ','
      << fmt("%.9g", met.contact.max_fn) << '\n';
  }
  write_overlay(r.ink, upper_ink(upper, rc.arm, rc.board), out / "overlay.svg", a.playback ? "playback" : "autonomous");
  m.write(out);
  std::cout << "rmse " << fmt("%.6g", met.rmse) << " m, iou " << fmt("%.4f", met.iou) << ", ink "
            << fmt("%.3f", met.contact.ink_fraction) << '\n';
  return 0;
}

struct SweepArgs {
  std::string gain = "kp";
  std::string weights;
  std::string upper;
  std::string task = "circleA";
  std::optional<double> height;
  std::string out;
};

int cmd_sweep(const Globals& g, const SweepArgs& a) {
  const AppConfig cfg = build_config(g);
  const GainAxis axis = parse_gain_axis(a.gain);
  const fs::path weights = resolve(g, a.weights);
  Manifest m("sweep", cfg);
  m.arg("gain", gain_axis_name(axis));
  m.input("weights", weights);
  RunConfig rc = cfg.run();
  UpperTrajectory upper;
  if (!a.upper.empty()) {
    m.input("upper", resolve(g, a.upper));
    upper = read_upper(resolve(g, a.upper));
    rc.board.height = a.height.value_or(meta_height(upper.meta, cfg.board.height));
  } else {
    rc.board.height = a.height.value_or(cfg.board.height);
    m.arg("task", a.task);
    const TaskSpec spec{parse_task(a.task), rc.board.height, cfg.eval_seed};
    upper = direct_teach(spec, cfg.teleop()).first;
  }
  m.arg("height", format_height(rc.board.height));
  check_manifest(g, m);

  const LoadedModel lm = load_model(weights);
  const SweepReport rep = gain_sweep(lm.model, lm.norm, upper, rc, axis, g.jobs);
  const fs::path out = prepare_out(g, a.out);
  write_sweep_csv(rep, out / "sweep.csv");
  write_sweep_traces(rep, out / "traces.csv");
  write_sweep_svg(rep, out / "sweep.svg");
  m.write(out);
  for (const auto& row : rep.rows) {
    std::cout << gain_axis_name(axis) << " " << fmt("%.1f", axis == GainAxis::Kp ? row.gains.kp : axis == GainAxis::Kd ? row.gains.kd : row.gains.ki)
              << (row.completed ? " rmse " + fmt("%.6g", row.metrics.rmse) + " osc " + fmt("%.4f", row.metrics.oscillation)
                                : " failed: " + row.error)
              << '\n';
  }
  return 0;
}

struct EvaluateArgs {
  std::string mlp;
  std::string lstm;
  std::string heights = "0,1,2";
  std::string tasks = "char2,char3,stringABCD";
  std::string variants;
  std::string out;
};

int cmd_evaluate(const Globals& g, const EvaluateArgs& a) {
  const AppConfig cfg = build_config(g);
  CompareConfig cc = cfg.compare();
  cc.tasks.clear();
  for (const auto& t : split_list(a.tasks)) cc.tasks.push_back(parse_task(t));
  cc.heights.clear();
  for (double cm : parse_numbers(a.heights, "--heights")) cc.heights.push_back(cm / 100.0);
  if (cc.tasks.empty() || cc.heights.empty()) throw ConfigError("evaluate needs tasks and heights");

  Manifest m("evaluate", cfg);
  std::optional<LoadedModel> mlp, lstm;
  cc.variants.clear();
  if (!a.variants.empty()) {
    for (const auto& v : split_list(a.variants)) cc.variants.push_back(parse_variant(v));
  } else {
    cc.variants.push_back(Variant::Playback);
    if (!a.lstm.empty()) cc.variants.insert(cc.variants.end(), {Variant::Lstm, Variant::LstmPid});
    if (!a.mlp.empty()) cc.variants.insert(cc.variants.end(), {Variant::Mlp, Variant::MlpPid});
  }
  if (!a.mlp.empty()) m.input("mlp", resolve(g, a.mlp));
  if (!a.lstm.empty()) m.input("lstm", resolve(g, a.lstm));
  m.arg("tasks", a.tasks);
  m.arg("heights", a.heights);
  std::string vs;
  for (Variant v : cc.variants) vs += std::string(vs.empty() ? "" : ",") + variant_name(v);
  m.arg("variants", vs);
  check_manifest(g, m);
  if (!a.mlp.empty()) mlp = load_model(resolve(g, a.mlp));
  if (!a.lstm.empty()) lstm = load_model(resolve(g, a.lstm));

  const CompareReport rep = compare_models(cc, mlp, lstm, g.jobs);
  const fs::path out = prepare_out(g, a.out);
  write_compare_csv(rep, out / "runs.csv");
  const std::string table = format_compare_table(rep);
  std::ofstream(out / "table.md") << table;
  fs::create_directories(out / "overlays");
  for (const auto& run : rep.runs) {
    if (run.repetition != 0) continue;
    std::string name = std::string(variant_name(run.variant)) + "_" + std::string(task_name(run.task)) + "_" +
                       fmt("%g", run.height * 100.0) + "cm";
    std::replace(name.begin(), name.end(), '+', '_');
    write_overlay(run.ink, run.reference, out / "overlays" / (name + ".svg"), name);
  }
  m.write(out);
  std::cout << table;
  return 0;
}

struct RenderArgs {
  std::string episode;
  std::string upper;
  std::optional<double> height;
  std::string out;
};

int cmd_render(const Globals& g, const RenderArgs& a) {
  const AppConfig cfg = build_config(g);
  const fs::path ep_dir = resolve(g, a.episode);
  Manifest m("render", cfg);
  m.input("episode", ep_dir);
  if (!a.upper.empty()) m.input("upper", resolve(g, a.upper));
  check_manifest(g, m);

  const Episode ep = read_episode(ep_dir);
  BoardConfig board = cfg.board;
  board.height = a.height.value_or(meta_height(ep.meta, cfg.board.height));
  std::vector<Eigen::Vector2d> ref;
  if (!a.upper.empty()) ref = upper_ink(read_upper(resolve(g, a.upper)), cfg.arm, board);
  const fs::path svg = resolve(g, a.out);
  if (svg.has_parent_path()) fs::create_directories(svg.parent_path());
  const auto it = ep.meta.find("task");
  write_overlay(episode_ink(ep, board.ink_threshold), ref, svg, it == ep.meta.end() ? "" : it->second);
  std::cout << "wrote " << svg.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulated force-aware imitation learning: collect, train, run, evaluate"};
  app.require_subcommand(0, 1);
  app.fallthrough();
  Globals g;
  app.add_option("--workdir", g.workdir, "Base directory for relative paths");
  app.add_option("--config", g.config_file, "key=value configuration file");
  app.add_option("--set", g.overrides, "Override one key (repeatable), e.g. --set board.h=0.01");
  app.add_option("--jobs", g.jobs, "Parallel episodes")->check(CLI::PositiveNumber);
  app.add_option("--manifest", g.expect_manifest, "Refuse to run unless the input hash matches");
  app.add_flag("--print-defaults", g.print_defaults, "Print every config key with its default and exit");

  CollectArgs ca;
  auto* collect = app.add_subcommand("collect", "Record bilateral demonstrations");
  collect->add_option("--tasks", ca.tasks, "Comma-separated tasks (default: the 70-episode protocol)");
  collect->add_option("--heights", ca.heights, "Comma-separated board heights in m (default 0,0.02)");
  collect->add_option("--trials", ca.trials, "Trials per task and height");
  collect->add_option("--out", ca.out, "Output directory")->required();

  TeachArgs ta;
  auto* teach = app.add_subcommand("teach", "Direct teaching: record an upper-layer trajectory");
  teach->add_option("--task", ta.task, "Task name");
  teach->add_option("--height", ta.height, "Board height in m (default board.h)");
  teach->add_option("--trial", ta.trial, "Demonstration seed (default eval.seed)");
  teach->add_option("--out", ta.out, "Output directory")->required();

  TrainArgs tr;
  auto* trn = app.add_subcommand("train", "Train a lower-layer network");
  trn->add_option("--model", tr.model, "mlp or lstm");
  trn->add_option("--data", tr.data, "Directory written by collect")->required();
  trn->add_option("--out", tr.out, "Output directory")->required();

  RunArgs ra;
  auto* run = app.add_subcommand("run", "Run a trained network (or playback) on an upper trajectory");
  run->add_option("--weights", ra.weights, "weights.fgw written by train");
  run->add_option("--upper", ra.upper, "upper.csv written by teach")->required();
  run->add_option("--gains", ra.gains, "Kp,Kd,Ki (default from pid.*)");
  run->add_option("--height", ra.height, "Board height in m (default: the trajectory's)");
  run->add_flag("--playback", ra.playback, "Replay the trajectory as angle commands, no network");
  run->add_option("--out", ra.out, "Output directory")->required();

  SweepArgs sa;
  auto* sweep = app.add_subcommand("sweep", "Sweep one PID gain over its grid");
  sweep->add_option("--gain", sa.gain, "kp, kd or ki");
  sweep->add_option("--weights", sa.weights, "weights.fgw")->required();
  sweep->add_option("--upper", sa.upper, "upper.csv (default: teach --task)");
  sweep->add_option("--task", sa.task, "Task taught when --upper is absent");
  sweep->add_option("--height", sa.height, "Board height in m");
  sweep->add_option("--out", sa.out, "Output directory")->required();

  EvaluateArgs ea;
  auto* evaluate = app.add_subcommand("evaluate", "Compare playback, LSTM and MLP with and without PID");
  evaluate->add_option("--mlp", ea.mlp, "MLP weights.fgw");
  evaluate->add_option("--lstm", ea.lstm, "LSTM weights.fgw");
  evaluate->add_option("--heights", ea.heights, "Board heights in cm");
  evaluate->add_option("--tasks", ea.tasks, "Comma-separated tasks");
  evaluate->add_option("--variants", ea.variants, "Subset of playback,lstm,lstm+pid,mlp,mlp+pid");
  evaluate->add_option("--out", ea.out, "Output directory")->required();

  RenderArgs rn;
  auto* render = app.add_subcommand("render", "Draw an episode's ink over its upper trajectory");
  render->add_option("--episode", rn.episode, "Episode directory")->required();
  render->add_option("--upper", rn.upper, "upper.csv to overlay");
  render->add_option("--height", rn.height, "Board height in m (default: the episode's)");
  render->add_option("--out", rn.out, "SVG path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (g.print_defaults) {
      std::cout << format_config(build_config(g), true);
      return 0;
    }
    if (*collect) return cmd_collect(g, ca);
    if (*teach) return cmd_teach(g, ta);
    if (*trn) return cmd_train(g, tr);
    if (*run) return cmd_run(g, ra);
    if (*sweep) return cmd_sweep(g, sa);
    if (*evaluate) return cmd_evaluate(g, ea);
    if (*render) return cmd_render(g, rn);
    std::cout << app.help();
    return kExitConfig;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const RuntimeFailure& e) {
    std::cerr << "runtime failure: " << e.what() << '\n';
    return kExitRuntime;
  } catch (const Error& e) {
    // Bad inputs (unreadable or malformed files, wrong counts) are usage errors.
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "runtime failure: " << e.what() << '\n';
    return kExitRuntime;
  }
}
