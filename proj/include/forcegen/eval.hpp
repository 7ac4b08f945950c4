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

// Evaluation harness: ink rasters and IoU, pen-x tracking, torque oscillation,
// PID gain sweeps and the five-variant model comparison.

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "forcegen/nn.hpp"
#include "forcegen/policy.hpp"
#include "forcegen/teleop.hpp"

namespace forcegen {

class GridMismatch : public Error {
 public:
  using Error::Error;
};

class MissingAux : public Error {
 public:
  using Error::Error;
};

class LengthMismatch : public Error {
 public:
  using Error::Error;
};

// Rasters ----------------------------------------------------------------------

struct RasterGrid {
  int width = 0;
  int height = 0;
  double resolution = 0.0005;                       // m per pixel
  Eigen::Vector2d origin = Eigen::Vector2d::Zero();  // board (x, y) of pixel (0, 0)
  bool operator==(const RasterGrid&) const = default;
};

/// Smallest grid covering every point plus `margin` on each side.
RasterGrid grid_covering(const std::vector<std::vector<Eigen::Vector2d>>& point_sets,
                         double margin = 0.005, double resolution = 0.0005);

struct RasterImage {
  RasterGrid grid;
  std::vector<std::uint8_t> bits;  // row-major, 0 or 1

  explicit RasterImage(const RasterGrid& g = {});
  bool at(int col, int row) const { return bits[static_cast<std::size_t>(row * grid.width + col)] != 0; }
  void set(int col, int row) { bits[static_cast<std::size_t>(row * grid.width + col)] = 1; }
  std::size_t count() const;
};

struct StrokeStyle {
  double pen_radius = 0.001;
  double connect_distance = 0.002;  // consecutive points closer than this are joined
};

RasterImage rasterize(const std::vector<Eigen::Vector2d>& points, const RasterGrid& grid,
                      const StrokeStyle& style = {});

/// |a and b| / |a or b|, 0 when both are empty. Throws GridMismatch.
double iou(const RasterImage& a, const RasterImage& b);

/// Binary PBM (P4), rows top to bottom, MSB first. Row 0 of the file is the
/// largest board y so the image reads like the board seen from above.
void write_pbm(const RasterImage& img, const std::filesystem::path& path);

/// Board (x, y) of the upper trajectory's pen-down samples.
std::vector<Eigen::Vector2d> upper_ink(const UpperTrajectory& traj, const ArmParams& arm,
                                       const BoardConfig& board);

// Tracking -------------------------------------------------------------------

struct TimeSeries {
  std::vector<double> t;
  std::vector<double> v;
  std::size_t size() const { return v.size(); }
};

/// Pen x relative to its position at t = 0. Throws MissingAux.
TimeSeries pen_x_series(const Episode& ep);
/// Keeps every `factor`-th sample.
TimeSeries decimate(const TimeSeries& s, int factor);
/// Pen x of the upper trajectory through forward kinematics, relative to its first sample.
TimeSeries upper_pen_x(const UpperTrajectory& traj, const ArmParams& arm);

/// RMS difference. Series of lengths n and n + 1 are compared over n samples;
/// larger differences throw LengthMismatch.
double tracking_rmse(const TimeSeries& a, const TimeSeries& b);

/// Fraction of periodogram power above `cutoff_hz`, per column with the mean
/// removed, averaged over columns. Constant columns count as 0. Needs >= 512 rows.
double oscillation_index(const Eigen::MatrixXd& series, double dt = kControlPeriod,
                         double cutoff_hz = 10.0);

/// Contact during the upper trajectory's pen-down windows.
struct ContactStats {
  std::size_t pen_down_ticks = 0;
  double ink_fraction = 0.0;  // robot ticks inking / pen-down robot ticks
  double max_fn = 0.0;        // over the pen-down windows
};

ContactStats contact_stats(const RunResult& run, const UpperTrajectory& traj, const ArmParams& arm,
                           const BoardConfig& board);

struct RunMetrics {
  double rmse = 0.0;  // pen x vs upper trajectory, m
  double iou = 0.0;
  double oscillation = 0.0;
  double max_tau = 0.0;
  ContactStats contact;
};

RunMetrics run_metrics(const RunResult& run, const UpperTrajectory& traj, const ArmParams& arm,
                       const BoardConfig& board, const StrokeStyle& style = {});

// Gain sweeps ----------------------------------------------------------------

enum class GainAxis { Kp, Kd, Ki };

GainAxis parse_gain_axis(std::string_view name);
const char* gain_axis_name(GainAxis a);
/// Kp 0..2.4 step 0.4 (Kd = Ki = 0); Kd 0..1.0 step 0.2 (Kp = 1.6); Ki 0..10 step 2 (Kp = 1.6, Kd = 0.2).
std::vector<PidGains> sweep_grid(GainAxis axis);

struct SweepRow {
  PidGains gains;
  bool completed = false;
  RunMetrics metrics;      // NaN when the run failed
  std::string error;
  TimeSeries pen_x;        // 20 ms, empty when the run failed
};

struct SweepReport {
  GainAxis axis = GainAxis::Kp;
  TimeSeries reference;
  std::vector<SweepRow> rows;
};

SweepReport gain_sweep(const Model& model, const NormStats& norm, const UpperTrajectory& traj,
                       const RunConfig& base, GainAxis axis, int jobs = 1);

void write_sweep_csv(const SweepReport& r, const std::filesystem::path& path);
/// Pen-x traces, one column per grid point, reference first.
void write_sweep_traces(const SweepReport& r, const std::filesystem::path& path);
void write_sweep_svg(const SweepReport& r, const std::filesystem::path& path);

// Model comparison -----------------------------------------------------------

enum class Variant { Playback, Lstm, LstmPid, Mlp, MlpPid };

const std::vector<Variant>& all_variants();
const char* variant_name(Variant v);
Variant parse_variant(std::string_view name);

struct LoadedModel {
  Model model;
  NormStats norm;
};

struct CompareConfig {
  std::vector<TaskId> tasks{TaskId::Char2, TaskId::Char3, TaskId::StringABCD};
  std::vector<double> heights{0.0, 0.01, 0.02};
  std::vector<Variant> variants{Variant::Playback, Variant::Lstm, Variant::LstmPid, Variant::Mlp,
                                Variant::MlpPid};
  int repetitions = 5;
  std::uint64_t seed = 1000;
  std::uint64_t seed_stride = 1;  // 0 repeats the same demonstration and noise
  PidGains gains{2.0, 0.2, 0.0};
  TeleopConfig teleop;
  RunConfig run;  // board height and gains are set per cell
  StrokeStyle style;
};

struct CompareRun {
  Variant variant = Variant::Mlp;
  TaskId task = TaskId::Char2;
  double height = 0.0;
  int repetition = 0;
  bool completed = false;
  RunMetrics metrics;
  std::string error;
  std::vector<Eigen::Vector2d> ink;
  std::vector<Eigen::Vector2d> reference;
};

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // population
  std::size_t n = 0;
};

MeanStd mean_std(const std::vector<double>& xs);

struct CompareReport {
  CompareConfig config;
  std::vector<CompareRun> runs;  // variant, task, height, repetition order

  std::vector<double> ious(Variant v, std::optional<TaskId> task = {},
                           std::optional<double> height = {}) const;
};

/// Direct-teaching demonstration used as the upper trajectory for one repetition.
UpperTrajectory demonstration(const CompareConfig& cfg, TaskId task, double height, int rep);

CompareReport compare_models(const CompareConfig& cfg, const std::optional<LoadedModel>& mlp,
                             const std::optional<LoadedModel>& lstm, int jobs = 1);

/// One line per run.
void write_compare_csv(const CompareReport& r, const std::filesystem::path& path);
/// Mean +- std IoU per (variant, height) row and task column, with row
/// averages and per-variant totals.
std::string format_compare_table(const CompareReport& r);
/// Drawn ink in black over the reference in cyan.
void write_overlay_svg(const std::vector<Eigen::Vector2d>& drawn,
                       const std::vector<Eigen::Vector2d>& reference,
                       const std::filesystem::path& path, const std::string& title = {});

/// Runs `n` independent jobs on up to `jobs` threads; results land by index.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

}  // namespace forcegen
