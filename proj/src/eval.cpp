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

#include "forcegen/eval.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <cstdio>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

namespace forcegen {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::ofstream open_out(const std::filesystem::path& path, bool binary = false) {
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

std::string fmt(const char* f, double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

double distance_to_segment(const Eigen::Vector2d& p, const Eigen::Vector2d& a,
                           const Eigen::Vector2d& b) {
  const Eigen::Vector2d ab = b - a;
  const double len2 = ab.squaredNorm();
  double t = len2 > 0 ? (p - a).dot(ab) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

void stamp_segment(RasterImage& img, const Eigen::Vector2d& a, const Eigen::Vector2d& b, double r) {
  const RasterGrid& g = img.grid;
  const auto to_px = [&](double v, double o) { return (v - o) / g.resolution - 0.5; };
  const int c0 = std::max(0, static_cast<int>(std::floor(to_px(std::min(a.x(), b.x()) - r, g.origin.x()))));
  const int c1 = std::min(g.width - 1, static_cast<int>(std::ceil(to_px(std::max(a.x(), b.x()) + r, g.origin.x()))));
  const int r0 = std::max(0, static_cast<int>(std::floor(to_px(std::min(a.y(), b.y()) - r, g.origin.y()))));
  const int r1 = std::min(g.height - 1, static_cast<int>(std::ceil(to_px(std::max(a.y(), b.y()) + r, g.origin.y()))));
  for (int row = r0; row <= r1; ++row) {
    for (int col = c0; col <= c1; ++col) {
      const Eigen::Vector2d center = g.origin + g.resolution * Eigen::Vector2d(col + 0.5, row + 0.5);
      if (distance_to_segment(center, a, b) <= r) img.set(col, row);
    }
  }
}

RunMetrics failed_metrics() {
  RunMetrics m;
  m.rmse = m.iou = m.oscillation = m.max_tau = kNaN;
  m.contact.ink_fraction = m.contact.max_fn = kNaN;
  return m;
}

// Polylines of consecutive points closer than `gap`, in SVG coordinates.
std::string svg_paths(const std::vector<Eigen::Vector2d>& pts, double gap, double x0, double y1,
                      double scale, const char* style) {
  std::ostringstream out;
  std::size_t i = 0;
  while (i < pts.size()) {
    std::size_t j = i + 1;
    while (j < pts.size() && (pts[j] - pts[j - 1]).norm() <= gap) ++j;
    out << "<polyline " << style << " points=\"";
    for (std::size_t k = i; k < j; ++k) {
      out << fmt("%.2f", (pts[k].x() - x0) * scale) << ',' << fmt("%.2f", (y1 - pts[k].y()) * scale);
      out << (k + 1 < j ? " " : "");
    }
    if (j == i + 1) {
      out << ' ' << fmt("%.2f", (pts[i].x() - x0) * scale) << ',' << fmt("%.2f", (y1 - pts[i].y()) * scale);
    }
    out << "\"/>\n";
    i = j;
  }
  return out.str();
}

}  // namespace

// Rasters ----------------------------------------------------------------------

RasterImage::RasterImage(const RasterGrid& g)
    : grid(g), bits(static_cast<std::size_t>(std::max(0, g.width) * std::max(0, g.height)), 0) {}

std::size_t RasterImage::count() const {
  return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

RasterGrid grid_covering(const std::vector<std::vector<Eigen::Vector2d>>& point_sets, double margin,
                         double resolution) {
  if (!(resolution > 0)) throw ConfigError("raster resolution must be positive");
  Eigen::Vector2d lo = Eigen::Vector2d::Constant(std::numeric_limits<double>::infinity());
  Eigen::Vector2d hi = -lo;
  for (const auto& set : point_sets) {
    for (const auto& p : set) {
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
  }
  RasterGrid g;
  g.resolution = resolution;
  if (!(lo.x() <= hi.x())) return g;
  g.origin = lo.array() - margin;
  g.width = static_cast<int>(std::ceil((hi.x() - lo.x() + 2 * margin) / resolution));
  g.height = static_cast<int>(std::ceil((hi.y() - lo.y() + 2 * margin) / resolution));
  return g;
}

RasterImage rasterize(const std::vector<Eigen::Vector2d>& points, const RasterGrid& grid,
                      const StrokeStyle& style) {
  RasterImage img(grid);
  if (grid.width <= 0 || grid.height <= 0) return img;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const bool joined = i > 0 && (points[i] - points[i - 1]).norm() <= style.connect_distance;
    stamp_segment(img, joined ? points[i - 1] : points[i], points[i], style.pen_radius);
  }
  return img;
}

double iou(const RasterImage& a, const RasterImage& b) {
  if (!(a.grid == b.grid)) throw GridMismatch("iou: rasters are on different grids");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.bits.size(); ++i) {
    inter += a.bits[i] & b.bits[i];
    uni += a.bits[i] | b.bits[i];
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

void write_pbm(const RasterImage& img, const std::filesystem::path& path) {
  auto out = open_out(path, true);
  out << "P4\n" << img.grid.width << ' ' << img.grid.height << '\n';
  const int stride = (img.grid.width + 7) / 8;
  std::vector<char> row(static_cast<std::size_t>(stride));
  for (int r = img.grid.height - 1; r >= 0; --r) {
    std::fill(row.begin(), row.end(), 0);
    for (int c = 0; c < img.grid.width; ++c) {
      if (img.at(c, r)) row[static_cast<std::size_t>(c / 8)] |= static_cast<char>(0x80 >> (c % 8));
    }
    out.write(row.data(), stride);
  }
}

std::vector<Eigen::Vector2d> upper_ink(const UpperTrajectory& traj, const ArmParams& arm,
                                       const BoardConfig& board) {
  const auto down = upper_pen_down(traj, arm, board);
  std::vector<Eigen::Vector2d> pts;
  for (std::size_t k = 0; k < traj.size(); ++k) {
    if (down[k]) pts.push_back(forward_kinematics(traj.theta[k], arm).head<2>());
  }
  return pts;
}

// Tracking -------------------------------------------------------------------

TimeSeries pen_x_series(const Episode& ep) {
  if (ep.aux.cols() != kAuxColumns) throw MissingAux("episode has no tip channels");
  TimeSeries s;
  const double x0 = ep.length() > 0 ? ep.aux(0, 0) : 0.0;
  for (std::size_t k = 0; k < ep.length(); ++k) {
    s.t.push_back(static_cast<double>(k) * ep.dt);
    s.v.push_back(ep.aux(static_cast<Eigen::Index>(k), 0) - x0);
  }
  return s;
}

TimeSeries decimate(const TimeSeries& s, int factor) {
  if (factor < 1) throw ConfigError("decimation factor must be >= 1");
  TimeSeries out;
  for (std::size_t k = 0; k < s.size(); k += static_cast<std::size_t>(factor)) {
    out.t.push_back(s.t[k]);
    out.v.push_back(s.v[k]);
  }
  return out;
}

TimeSeries upper_pen_x(const UpperTrajectory& traj, const ArmParams& arm) {
  TimeSeries s;
  if (traj.size() == 0) return s;
  const double x0 = forward_kinematics(traj.theta[0], arm).x();
  for (std::size_t k = 0; k < traj.size(); ++k) {
    s.t.push_back(static_cast<double>(k) * kPolicyPeriod);
    s.v.push_back(forward_kinematics(traj.theta[k], arm).x() - x0);
  }
  return s;
}

double tracking_rmse(const TimeSeries& a, const TimeSeries& b) {
  const std::size_t n = std::min(a.size(), b.size());
  if (std::max(a.size(), b.size()) - n > 1) {
    throw LengthMismatch("tracking_rmse: series lengths " + std::to_string(a.size()) + " and " +
                         std::to_string(b.size()));
  }
  if (n == 0) throw LengthMismatch("tracking_rmse: empty series");
  double sq = 0.0;
  for (std::size_t k = 0; k < n; ++k) sq += (a.v[k] - b.v[k]) * (a.v[k] - b.v[k]);
  return std::sqrt(sq / static_cast<double>(n));
}

double oscillation_index(const Eigen::MatrixXd& series, double dt, double cutoff_hz) {
  const auto n = static_cast<std::size_t>(series.rows());
  if (n < 512) throw TooShort("oscillation_index needs at least 512 samples, got " + std::to_string(n));
  Eigen::FFT<double> fft;
  double total = 0.0;
  for (Eigen::Index j = 0; j < series.cols(); ++j) {
    std::vector<double> x(n);
    const double mean = series.col(j).mean();
    for (std::size_t k = 0; k < n; ++k) x[k] = series(static_cast<Eigen::Index>(k), j) - mean;
    std::vector<std::complex<double>> spec;
    fft.fwd(spec, x);
    double all = 0.0, high = 0.0;
    for (std::size_t k = 1; k <= n / 2; ++k) {
      const double p = std::norm(spec[k]);
      all += p;
      if (static_cast<double>(k) / (static_cast<double>(n) * dt) > cutoff_hz) high += p;
    }
    // Relative floor so rounding noise on a constant column reads as silence.
    const double scale = series.col(j).cwiseAbs().maxCoeff();
    if (all > 1e-24 * static_cast<double>(n * n) * std::max(scale * scale, 1e-300)) total += high / all;
  }
  return series.cols() > 0 ? total / static_cast<double>(series.cols()) : 0.0;
}

ContactStats contact_stats(const RunResult& run, const UpperTrajectory& traj, const ArmParams& arm,
                           const BoardConfig& board) {
  const auto down = upper_pen_down(traj, arm, board);
  ContactStats cs;
  std::size_t inked = 0;
  const auto rows = static_cast<std::size_t>(run.episode.aux.rows());
  for (std::size_t k = 0; k < traj.size(); ++k) {
    if (!down[k]) continue;
    for (std::size_t t = k * kRobotTicksPerPolicyTick;
         t < std::min(rows, (k + 1) * kRobotTicksPerPolicyTick); ++t) {
      const double fn = run.episode.aux(static_cast<Eigen::Index>(t), 3);
      ++cs.pen_down_ticks;
      if (fn >= board.ink_threshold) ++inked;
      cs.max_fn = std::max(cs.max_fn, fn);
    }
  }
  cs.ink_fraction = cs.pen_down_ticks ? static_cast<double>(inked) / static_cast<double>(cs.pen_down_ticks) : 0.0;
  return cs;
}

RunMetrics run_metrics(const RunResult& run, const UpperTrajectory& traj, const ArmParams& arm,
                       const BoardConfig& board, const StrokeStyle& style) {
  RunMetrics m;
  m.rmse = tracking_rmse(decimate(pen_x_series(run.episode), kRobotTicksPerPolicyTick),
                         upper_pen_x(traj, arm));
  const auto ref = upper_ink(traj, arm, board);
  const RasterGrid grid = grid_covering({run.ink, ref});
  m.iou = iou(rasterize(run.ink, grid, style), rasterize(ref, grid, style));
  m.oscillation = oscillation_index(run.tau_ref);
  m.max_tau = run.tau_ref.size() ? run.tau_ref.cwiseAbs().maxCoeff() : 0.0;
  m.contact = contact_stats(run, traj, arm, board);
  return m;
}

// Gain sweeps ----------------------------------------------------------------

GainAxis parse_gain_axis(std::string_view name) {
  if (name == "kp") return GainAxis::Kp;
  if (name == "kd") return GainAxis::Kd;
  if (name == "ki") return GainAxis::Ki;
  throw ConfigError("unknown gain '" + std::string(name) + "' (expected kp, kd or ki)");
}

const char* gain_axis_name(GainAxis a) {
  switch (a) {
    case GainAxis::Kp: return "kp";
    case GainAxis::Kd: return "kd";
    case GainAxis::Ki: return "ki";
  }
  return "?";
}

std::vector<PidGains> sweep_grid(GainAxis axis) {
  std::vector<PidGains> grid;
  switch (axis) {
    case GainAxis::Kp:
      for (int i = 0; i <= 6; ++i) grid.push_back({0.4 * i, 0.0, 0.0});
      break;
    case GainAxis::Kd:
      for (int i = 0; i <= 5; ++i) grid.push_back({1.6, 0.2 * i, 0.0});
      break;
    case GainAxis::Ki:
      for (int i = 0; i <= 5; ++i) grid.push_back({1.6, 0.2, 2.0 * i});
      break;
  }
  return grid;
}

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, jobs)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(mu);
          if (!first) first = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first) std::rethrow_exception(first);
}

SweepReport gain_sweep(const Model& model, const NormStats& norm, const UpperTrajectory& traj,
                       const RunConfig& base, GainAxis axis, int jobs) {
  SweepReport rep;
  rep.axis = axis;
  rep.reference = upper_pen_x(traj, base.arm);
  const auto grid = sweep_grid(axis);
  rep.rows.resize(grid.size());
  parallel_for(grid.size(), jobs, [&](std::size_t i) {
    SweepRow& row = rep.rows[i];
    row.gains = grid[i];
    RunConfig cfg = base;
    cfg.gains = grid[i];
    try {
      const RunResult r = run_autonomous(model, norm, traj, cfg);
      row.metrics = run_metrics(r, traj, cfg.arm, cfg.board);
      row.pen_x = decimate(pen_x_series(r.episode), kRobotTicksPerPolicyTick);
      row.completed = true;
    } catch (const Error& e) {
      row.metrics = failed_metrics();
      row.error = e.what();
    }
  });
  return rep;
}

void write_sweep_csv(const SweepReport& r, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "kp,kd,ki,completed,rmse,iou,oscillation,max_tau,ink_fraction,max_fn\n";
  for (const auto& row : r.rows) {
    const RunMetrics& m = row.metrics;
    out << fmt("%.9g", row.gains.kp) << ',' << fmt("%.9g", row.gains.kd) << ','
        << fmt("%.9g", row.gains.ki) << ',' << (row.completed ? 1 : 0) << ',' << fmt("%.9g", m.rmse)
        << ',' << fmt("%.9g", m.iou) << ',' << fmt("%.9g", m.oscillation) << ','
        << fmt("%.9g", m.max_tau) << ',' << fmt("%.9g", m.contact.ink_fraction) << ','
        << fmt("%.9g", m.contact.max_fn) << '\n';
  }
}

void write_sweep_traces(const SweepReport& r, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "t,reference";
  for (const auto& row : r.rows) {
    out << ',' << gain_axis_name(r.axis) << '='
        << fmt("%.9g", r.axis == GainAxis::Kp ? row.gains.kp
                       : r.axis == GainAxis::Kd ? row.gains.kd
                                                : row.gains.ki);
  }
  out << '\n';
  for (std::size_t k = 0; k < r.reference.size(); ++k) {
    out << fmt("%.9g", r.reference.t[k]) << ',' << fmt("%.9g", r.reference.v[k]);
    for (const auto& row : r.rows) {
      out << ',' << (k < row.pen_x.size() ? fmt("%.9g", row.pen_x.v[k]) : std::string("nan"));
    }
    out << '\n';
  }
}

void write_sweep_svg(const SweepReport& r, const std::filesystem::path& path) {
  static const char* palette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                  "#9467bd", "#8c564b", "#e377c2", "#17becf"};
  constexpr double w = 800, h = 400, pad = 40;
  double lo = 0, hi = 0;
  const auto extend = [&](const TimeSeries& s) {
    for (double v : s.v) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  };
  extend(r.reference);
  for (const auto& row : r.rows) extend(row.pen_x);
  if (hi - lo < 1e-6) hi = lo + 1e-6;
  const double t_end = r.reference.size() ? std::max(r.reference.t.back(), 1e-6) : 1.0;
  const auto line = [&](const TimeSeries& s, const char* color, double width) {
    std::ostringstream o;
    o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"" << width << "\" points=\"";
    for (std::size_t k = 0; k < s.size(); ++k) {
      o << fmt("%.2f", pad + (w - 2 * pad) * s.t[k] / t_end) << ','
        << fmt("%.2f", h - pad - (h - 2 * pad) * (s.v[k] - lo) / (hi - lo)) << (k + 1 < s.size() ? " " : "");
    }
    o << "\"/>\n";
    return o.str();
  };
  auto out = open_out(path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << pad << "\" y=\"20\" font-size=\"14\">pen x (" << fmt("%.1f", lo * 1e3) << " to "
      << fmt("%.1f", hi * 1e3) << " mm), sweep " << gain_axis_name(r.axis) << "</text>\n";
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    if (r.rows[i].completed) out << line(r.rows[i].pen_x, palette[i % 8], 1.0);
  }
  out << line(r.reference, "black", 2.0);
  out << "</svg>\n";
}

// Model comparison -----------------------------------------------------------

const std::vector<Variant>& all_variants() {
  static const std::vector<Variant> v{Variant::Playback, Variant::Lstm, Variant::LstmPid,
                                      Variant::Mlp, Variant::MlpPid};
  return v;
}

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::Playback: return "playback";
    case Variant::Lstm: return "lstm";
    case Variant::LstmPid: return "lstm+pid";
    case Variant::Mlp: return "mlp";
    case Variant::MlpPid: return "mlp+pid";
  }
  return "?";
}

Variant parse_variant(std::string_view name) {
  for (Variant v : all_variants()) {
    if (name == variant_name(v)) return v;
  }
  throw ConfigError("unknown variant '" + std::string(name) + "'");
}

MeanStd mean_std(const std::vector<double>& xs) {
  MeanStd m;
  m.n = xs.size();
  if (xs.empty()) return {kNaN, kNaN, 0};
  for (double x : xs) m.mean += x;
  m.mean /= static_cast<double>(xs.size());
  for (double x : xs) m.std += (x - m.mean) * (x - m.mean);
  m.std = std::sqrt(m.std / static_cast<double>(xs.size()));
  return m;
}

std::vector<double> CompareReport::ious(Variant v, std::optional<TaskId> task,
                                        std::optional<double> height) const {
  std::vector<double> out;
  for (const auto& r : runs) {
    if (r.variant != v || !r.completed) continue;
    if (task && r.task != *task) continue;
    if (height && r.height != *height) continue;
    out.push_back(r.metrics.iou);
  }
  return out;
}

UpperTrajectory demonstration(const CompareConfig& cfg, TaskId task, double height, int rep) {
  const std::uint64_t seed = cfg.seed + cfg.seed_stride * static_cast<std::uint64_t>(rep);
  return direct_teach({task, height, seed}, cfg.teleop).first;
}

CompareReport compare_models(const CompareConfig& cfg, const std::optional<LoadedModel>& mlp,
                             const std::optional<LoadedModel>& lstm, int jobs) {
  if (cfg.repetitions < 1) throw ConfigError("repetitions must be >= 1");
  for (Variant v : cfg.variants) {
    const bool wants_mlp = v == Variant::Mlp || v == Variant::MlpPid;
    const bool wants_lstm = v == Variant::Lstm || v == Variant::LstmPid;
    if ((wants_mlp && !mlp) || (wants_lstm && !lstm)) {
      throw ConfigError(std::string("variant ") + variant_name(v) + " needs weights");
    }
  }
  const auto reps = static_cast<std::size_t>(cfg.repetitions);
  const std::size_t nh = cfg.heights.size();

  // Demonstrations are shared by every variant.
  std::vector<UpperTrajectory> demos(cfg.tasks.size() * nh * reps);
  parallel_for(demos.size(), jobs, [&](std::size_t i) {
    const std::size_t t = i / (nh * reps), h = (i / reps) % nh, r = i % reps;
    demos[i] = demonstration(cfg, cfg.tasks[t], cfg.heights[h], static_cast<int>(r));
  });

  CompareReport rep;
  rep.config = cfg;
  rep.runs.resize(cfg.variants.size() * demos.size());
  parallel_for(rep.runs.size(), jobs, [&](std::size_t i) {
    const std::size_t v = i / demos.size(), d = i % demos.size();
    const std::size_t t = d / (nh * reps), h = (d / reps) % nh, r = d % reps;
    CompareRun& run = rep.runs[i];
    run.variant = cfg.variants[v];
    run.task = cfg.tasks[t];
    run.height = cfg.heights[h];
    run.repetition = static_cast<int>(r);

    RunConfig rc = cfg.run;
    rc.board.height = run.height;
    rc.seed = cfg.seed + cfg.seed_stride * r;
    const UpperTrajectory& upper = demos[d];
    run.reference = upper_ink(upper, rc.arm, rc.board);
    try {
      RunResult res;
      switch (run.variant) {
        case Variant::Playback:
          res = run_playback(upper, rc);
          break;
        case Variant::Lstm:
        case Variant::LstmPid:
          rc.gains = run.variant == Variant::LstmPid ? cfg.gains : PidGains{};
          res = run_autonomous(lstm->model, lstm->norm, upper, rc);
          break;
        case Variant::Mlp:
        case Variant::MlpPid:
          rc.gains = run.variant == Variant::MlpPid ? cfg.gains : PidGains{};
          res = run_autonomous(mlp->model, mlp->norm, upper, rc);
          break;
      }
      run.metrics = run_metrics(res, upper, rc.arm, rc.board, cfg.style);
      run.ink = std::move(res.ink);
      run.completed = true;
    } catch (const Error& e) {
      run.metrics = failed_metrics();
      run.error = e.what();
    }
  });
  return rep;
}

void write_compare_csv(const CompareReport& r, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "variant,task,height,repetition,completed,iou,rmse,ink_fraction,max_fn,oscillation,max_tau\n";
  for (const auto& run : r.runs) {
    const RunMetrics& m = run.metrics;
    out << variant_name(run.variant) << ',' << task_name(run.task) << ',' << format_height(run.height)
        << ',' << run.repetition << ',' << (run.completed ? 1 : 0) << ',' << fmt("%.9g", m.iou) << ','
        << fmt("%.9g", m.rmse) << ',' << fmt("%.9g", m.contact.ink_fraction) << ','
        << fmt("%.9g", m.contact.max_fn) << ',' << fmt("%.9g", m.oscillation) << ','
        << fmt("%.9g", m.max_tau) << '\n';
  }
}

std::string format_compare_table(const CompareReport& r) {
  const auto cell = [](const std::vector<double>& xs) {
    const MeanStd m = mean_std(xs);
    return m.n ? fmt("%.3f", m.mean) + " ± " + fmt("%.3f", m.std) : std::string("n/a");
  };
  std::ostringstream out;
  out << "| model | height |";
  for (TaskId t : r.config.tasks) out << ' ' << task_name(t) << " |";
  out << " average | total |\n|---|---|";
  for (std::size_t i = 0; i < r.config.tasks.size(); ++i) out << "---|";
  out << "---|---|\n";
  for (Variant v : r.config.variants) {
    for (std::size_t h = 0; h < r.config.heights.size(); ++h) {
      const double height = r.config.heights[h];
      out << "| " << variant_name(v) << " | " << fmt("%g", height * 100.0) << " cm |";
      for (TaskId t : r.config.tasks) out << ' ' << cell(r.ious(v, t, height)) << " |";
      out << ' ' << cell(r.ious(v, std::nullopt, height)) << " | "
          << (h == 0 ? cell(r.ious(v)) : std::string()) << " |\n";
    }
  }
  return out.str();
}

void write_overlay_svg(const std::vector<Eigen::Vector2d>& drawn,
                       const std::vector<Eigen::Vector2d>& reference,
                       const std::filesystem::path& path, const std::string& title) {
  const RasterGrid g = grid_covering({drawn, reference}, 0.005, 0.001);
  const double scale = 8000.0;  // px per m
  const double x0 = g.origin.x(), y1 = g.origin.y() + g.height * g.resolution;
  const double w = std::max(1, g.width) * g.resolution * scale;
  const double h = std::max(1, g.height) * g.resolution * scale + 20;
  auto out = open_out(path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt("%.0f", w) << "\" height=\""
      << fmt("%.0f", h) << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<g transform=\"translate(0,20)\">\n";
  const std::string pen = "fill=\"none\" stroke=\"black\" stroke-linecap=\"round\" stroke-width=\"" +
                          fmt("%.1f", 0.002 * scale) + "\"";
  const std::string ref = "fill=\"none\" stroke=\"cyan\" stroke-linecap=\"round\" stroke-width=\"" +
                          fmt("%.1f", 0.0005 * scale) + "\"";
  out << svg_paths(drawn, 0.002, x0, y1, scale, pen.c_str());
  out << svg_paths(reference, 0.002, x0, y1, scale, ref.c_str());
  out << "</g>\n";
  if (!title.empty()) out << "<text x=\"4\" y=\"14\" font-size=\"12\">" << title << "</text>\n";
  out << "</svg>\n";
}

}  // namespace forcegen
