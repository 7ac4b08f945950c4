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
#include <iterator>
#include <limits>
#include <numbers>

#include "forcegen/eval.hpp"

using namespace forcegen;
namespace fs = std::filesystem;

namespace {

RasterGrid square_grid(int n, double res = 0.0005) {
  RasterGrid g;
  g.width = g.height = n;
  g.resolution = res;
  return g;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

TimeSeries series(const std::vector<double>& v) {
  TimeSeries s;
  for (std::size_t k = 0; k < v.size(); ++k) {
    s.t.push_back(0.02 * static_cast<double>(k));
    s.v.push_back(v[k]);
  }
  return s;
}

UpperTrajectory arc_trajectory(std::size_t n) {
  UpperTrajectory t;
  for (std::size_t i = 0; i < n; ++i) {
    const double s = static_cast<double>(i) / static_cast<double>(n);
    t.theta.push_back(JointVector(-0.75 + 0.1 * s, 1.55 + 0.05 * s, 0.04));
    t.dtheta.push_back(JointVector::Zero());
  }
  return t;
}

}  // namespace

TEST_CASE("rasterize") {
  const RasterGrid g = square_grid(80);
  const StrokeStyle style;
  const double px = style.pen_radius / g.resolution;

  SUBCASE("empty") { CHECK(rasterize({}, g).count() == 0); }
  SUBCASE("single point is a disc") {
    const auto img = rasterize({{0.02, 0.02}}, g);
    CHECK(static_cast<double>(img.count()) == doctest::Approx(std::numbers::pi * px * px).epsilon(0.15));
    const auto off = rasterize({{0.02013, 0.01991}}, g);
    CHECK(static_cast<double>(off.count()) == doctest::Approx(std::numbers::pi * px * px).epsilon(0.15));
  }
  SUBCASE("dense points form a stroke") {
    std::vector<Eigen::Vector2d> pts;
    const double len = 0.02;
    for (int i = 0; i <= 100; ++i) pts.emplace_back(0.01 + len * i / 100.0, 0.013 + 0.3 * len * i / 100.0);
    const double ell = len * std::sqrt(1.0 + 0.09);
    const double area = (2 * style.pen_radius * ell + std::numbers::pi * style.pen_radius * style.pen_radius) /
                        (g.resolution * g.resolution);
    CHECK(static_cast<double>(rasterize(pts, g).count()) == doctest::Approx(area).epsilon(0.10));
  }
  SUBCASE("points farther apart than the connect distance stay separate") {
    const auto one = rasterize({{0.01, 0.02}}, g).count();
    const auto two = rasterize({{0.01, 0.02}, {0.0125, 0.02}}, g).count();
    CHECK(two == 2 * one);
    const auto joined = rasterize({{0.01, 0.02}, {0.0115, 0.02}}, g).count();
    CHECK(joined > one + 4);
  }
  SUBCASE("points off the grid are clipped") {
    CHECK(rasterize({{-1.0, -1.0}, {1.0, 1.0}}, g).count() == 0);
  }
  SUBCASE("covering grid") {
    const RasterGrid c = grid_covering({{{0.1, 0.2}}, {{0.13, 0.21}}}, 0.005, 0.0005);
    CHECK(c.origin.x() == doctest::Approx(0.095));
    CHECK(c.width == 80);
    CHECK(c.height == 40);
    CHECK(grid_covering({{}, {}}).width == 0);
  }
}

TEST_CASE("iou") {
  const RasterGrid g = square_grid(40);
  RasterImage a(g), b(g);
  SUBCASE("counting oracle") {
    for (int r = 0; r < 10; ++r) {
      for (int c = 0; c < 20; ++c) a.set(c, r);
      for (int c = 10; c < 30; ++c) b.set(c, r);
    }
    CHECK(iou(a, b) == doctest::Approx(100.0 / 300.0).epsilon(1e-12));
    CHECK(iou(a, b) == iou(b, a));
    RasterImage a2 = a, b2 = b;
    for (int c = 30; c < 35; ++c) {
      a2.set(c, 20);
      b2.set(c, 20);
    }
    CHECK(iou(a2, b2) > iou(a, b));
  }
  SUBCASE("identical and disjoint") {
    a.set(3, 3);
    CHECK(iou(a, a) == 1.0);
    b.set(5, 5);
    CHECK(iou(a, b) == 0.0);
    CHECK(iou(RasterImage(g), RasterImage(g)) == 0.0);
  }
  SUBCASE("grid mismatch") { CHECK_THROWS_AS(iou(a, RasterImage(square_grid(41))), GridMismatch); }
}

TEST_CASE("pbm export") {
  RasterGrid g;
  g.width = 10;
  g.height = 2;
  RasterImage img(g);
  img.set(0, 1);
  img.set(9, 1);
  img.set(1, 0);
  const fs::path p = fs::temp_directory_path() / "forcegen_test.pbm";
  write_pbm(img, p);
  // Top row of the file is the highest board y (row 1).
  const std::string want = std::string("P4\n10 2\n") + '\x80' + '\x40' + '\x40' + '\x00';
  CHECK(slurp(p) == want);
  fs::remove(p);
}

TEST_CASE("pen x and tracking") {
  SUBCASE("from an episode") {
    const ArmParams arm;
    Episode ep = Episode::with_length(50);
    for (std::size_t k = 0; k < 50; ++k) {
      const JointVector q(-0.7 + 0.001 * static_cast<double>(k), 1.5, 0.03);
      ep.set(k, Channel::ThetaRes, q);
      const Vec3 tip = forward_kinematics(q, arm);
      ep.aux.row(static_cast<Eigen::Index>(k)) << tip.x(), tip.y(), tip.z(), 0.0;
    }
    const TimeSeries s = pen_x_series(ep);
    CHECK(s.v.front() == 0.0);
    const double x0 = forward_kinematics(ep.get(0, Channel::ThetaRes), arm).x();
    for (std::size_t k = 0; k < 50; ++k) {
      CHECK(std::abs(s.v[k] - (forward_kinematics(ep.get(k, Channel::ThetaRes), arm).x() - x0)) < 1e-9);
    }
    CHECK(decimate(s, 10).size() == 5);
    CHECK(decimate(s, 10).v[2] == s.v[20]);
    ep.aux.setConstant(0.25);
    for (double v : pen_x_series(ep).v) CHECK(v == 0.0);
    CHECK_THROWS_AS(pen_x_series(Episode::with_length(5, true, false)), MissingAux);
  }
  SUBCASE("rmse oracles") {
    const TimeSeries a = series({0.1, 0.2, -0.3, 0.4});
    CHECK(tracking_rmse(a, a) == 0.0);
    CHECK(tracking_rmse(a, series({0.1 + 0.01, 0.2 + 0.01, -0.3 + 0.01, 0.4 + 0.01})) ==
          doctest::Approx(0.01).epsilon(1e-9));
    // Whole periods of sin against a shifted copy: sqrt(2) * |sin(phi / 2)|.
    std::vector<double> s1, s2;
    const double phi = 0.4;
    for (int k = 0; k < 400; ++k) {
      const double w = 2 * std::numbers::pi * k / 100.0;
      s1.push_back(std::sin(w));
      s2.push_back(std::sin(w + phi));
    }
    CHECK(tracking_rmse(series(s1), series(s2)) ==
          doctest::Approx(std::sqrt(2.0) * std::sin(phi / 2)).epsilon(1e-9));
  }
  SUBCASE("length handling") {
    CHECK(tracking_rmse(series({1, 2, 3}), series({1, 2, 3, 9})) == 0.0);
    CHECK_THROWS_AS(tracking_rmse(series({1, 2}), series({1, 2, 3, 4})), LengthMismatch);
    CHECK_THROWS_AS(tracking_rmse(series({}), series({})), LengthMismatch);
  }
  SUBCASE("upper trajectory through kinematics") {
    const ArmParams arm;
    const UpperTrajectory t = arc_trajectory(20);
    const TimeSeries s = upper_pen_x(t, arm);
    CHECK(s.size() == 20);
    CHECK(s.v[0] == 0.0);
    CHECK(s.t[3] == doctest::Approx(0.06));
  }
}

TEST_CASE("oscillation index") {
  const auto signal = [](double hz, int n) {
    Eigen::MatrixXd m(n, 1);
    for (int k = 0; k < n; ++k) m(k, 0) = 1.5 + std::sin(2 * std::numbers::pi * hz * k * kControlPeriod);
    return m;
  };
  CHECK(oscillation_index(Eigen::MatrixXd::Constant(600, 3, 2.0)) == 0.0);
  CHECK(oscillation_index(signal(25.0, 1000)) > 0.98);
  CHECK(oscillation_index(signal(1.0, 1000)) < 0.02);
  Eigen::MatrixXd mixed(1000, 2);
  mixed.col(0) = signal(25.0, 1000).col(0);
  mixed.col(1) = signal(1.0, 1000).col(0);
  CHECK(oscillation_index(mixed) == doctest::Approx(0.5).epsilon(0.05));
  CHECK_THROWS_AS(oscillation_index(signal(1.0, 511)), TooShort);
}

TEST_CASE("sweep grids") {
  const auto kp = sweep_grid(GainAxis::Kp);
  REQUIRE(kp.size() == 7);
  CHECK(kp.back().kp == doctest::Approx(2.4));
  for (const auto& g : kp) CHECK((g.kd == 0.0 && g.ki == 0.0));
  const auto kd = sweep_grid(GainAxis::Kd);
  REQUIRE(kd.size() == 6);
  CHECK(kd.back().kd == doctest::Approx(1.0));
  for (const auto& g : kd) CHECK((g.kp == 1.6 && g.ki == 0.0));
  const auto ki = sweep_grid(GainAxis::Ki);
  REQUIRE(ki.size() == 6);
  CHECK(ki.back().ki == doctest::Approx(10.0));
  for (const auto& g : ki) CHECK((g.kp == 1.6 && g.kd == 0.2));
  CHECK(parse_gain_axis("kd") == GainAxis::Kd);
  CHECK_THROWS_AS(parse_gain_axis("kx"), ConfigError);
}

TEST_CASE("gain sweep") {
  const UpperTrajectory traj = arc_trajectory(80);
  RunConfig base;
  base.board.height = -1.0;
  NormStats norm;
  const Model model = Model::random(ModelSpec::mlp(8, 2), 5);

  SUBCASE("deterministic and independent of the job count") {
    const SweepReport a = gain_sweep(model, norm, traj, base, GainAxis::Kp, 1);
    const SweepReport b = gain_sweep(model, norm, traj, base, GainAxis::Kp, 3);
    CHECK(a.rows.size() == 7);
    const fs::path pa = fs::temp_directory_path() / "forcegen_sweep_a.csv";
    const fs::path pb = fs::temp_directory_path() / "forcegen_sweep_b.csv";
    write_sweep_csv(a, pa);
    write_sweep_csv(b, pb);
    CHECK(slurp(pa) == slurp(pb));
    write_sweep_traces(a, pa);
    const std::string traces = slurp(pa);
    CHECK(traces.rfind("t,reference,kp=0,kp=0.4,", 0) == 0);
    write_sweep_svg(a, pb);
    const std::string svg = slurp(pb);
    CHECK(svg.rfind("<svg", 0) == 0);
    CHECK(svg.find("</svg>") != std::string::npos);
    fs::remove(pa);
    fs::remove(pb);
  }
  SUBCASE("failed rows are kept") {
    Model bad = model;
    Eigen::VectorXd p = bad.params();
    p.setConstant(std::numeric_limits<double>::infinity());
    bad.set_params(p);
    const SweepReport r = gain_sweep(bad, norm, traj, base, GainAxis::Ki, 2);
    REQUIRE(r.rows.size() == 6);
    for (const auto& row : r.rows) {
      CHECK_FALSE(row.completed);
      CHECK(std::isnan(row.metrics.rmse));
      CHECK(std::isnan(row.metrics.iou));
      CHECK(row.error.find("tick") != std::string::npos);
    }
  }
}

TEST_CASE("direct teaching draws its own reference") {
  const TeleopConfig tc;
  for (TaskId task : {TaskId::Char2, TaskId::CircleA}) {
    const auto [upper, ep] = direct_teach({task, 0.01, 3}, tc);
    BoardConfig board = tc.board;
    board.height = 0.01;
    std::vector<Eigen::Vector2d> ink;
    for (Eigen::Index i = 0; i < ep.aux.rows(); ++i) {
      if (ep.aux(i, 3) >= board.ink_threshold) ink.emplace_back(ep.aux(i, 0), ep.aux(i, 1));
    }
    const auto ref = upper_ink(upper, tc.arm, board);
    const RasterGrid g = grid_covering({ink, ref});
    CHECK(iou(rasterize(ink, g), rasterize(ref, g)) >= 0.8);
  }
}

TEST_CASE("model comparison") {
  CompareConfig cfg;
  cfg.tasks = {TaskId::Char2};
  cfg.heights = {0.0, 0.01};
  cfg.variants = {Variant::Playback, Variant::Mlp};
  cfg.repetitions = 3;
  LoadedModel mlp{Model::random(ModelSpec::mlp(8, 2), 2), NormStats{}};

  CHECK_THROWS_AS(compare_models(cfg, std::nullopt, std::nullopt), ConfigError);

  SUBCASE("identical seeds give zero spread") {
    cfg.seed_stride = 0;
    const CompareReport r = compare_models(cfg, mlp, std::nullopt, 2);
    REQUIRE(r.runs.size() == 2 * 2 * 3);
    const MeanStd m = mean_std(r.ious(Variant::Playback, TaskId::Char2, 0.0));
    CHECK(m.n == 3);
    CHECK(m.std == 0.0);
  }
  SUBCASE("cells are plain means of their runs") {
    const CompareReport r = compare_models(cfg, mlp, std::nullopt, 2);
    const auto xs = r.ious(Variant::Playback, TaskId::Char2, 0.01);
    REQUIRE(xs.size() == 3);
    CHECK(mean_std(xs).mean == doctest::Approx((xs[0] + xs[1] + xs[2]) / 3.0).epsilon(1e-12));
    const std::string table = format_compare_table(r);
    CHECK(table.find("| playback | 0 cm |") != std::string::npos);
    CHECK(table.find("| mlp | 1 cm |") != std::string::npos);
    const fs::path p = fs::temp_directory_path() / "forcegen_compare.csv";
    write_compare_csv(r, p);
    const std::string csv = slurp(p);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 13);
    write_overlay_svg(r.runs[0].ink, r.runs[0].reference, p, "playback");
    CHECK(slurp(p).find("stroke=\"cyan\"") != std::string::npos);
    fs::remove(p);
  }
  SUBCASE("mean and population std") {
    const MeanStd m = mean_std({1.0, 2.0, 3.0, 4.0});
    CHECK(m.mean == 2.5);
    CHECK(m.std == doctest::Approx(std::sqrt(1.25)));
    CHECK(std::isnan(mean_std({}).mean));
  }
}
