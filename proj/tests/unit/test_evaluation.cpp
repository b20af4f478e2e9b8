#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "oracles.hpp"
#include "tracklabel/evaluation.hpp"
#include "tracklabel/io.hpp"

using namespace tracklabel;
namespace fs = std::filesystem;

namespace {

PointSet points(std::initializer_list<Point> ps, int frame = 1) {
  PointSet s;
  s.frame = frame;
  s.points = ps;
  return s;
}

}  // namespace

TEST_SUITE("evaluation") {

TEST_CASE("identical sets score perfectly") {
  const PointSet p = points({{1, 1}, {10, 10}, {20, 5}});
  const auto c = match_detections_to_gt(p, p, 3.0);
  CHECK(c == DetectionCounts{3, 0, 0});
  CHECK(score_counts(c).f1 == 1.0);
}

TEST_CASE("no detections against five ground-truth points") {
  const PointSet gt = points({{1, 1}, {10, 10}, {20, 5}, {30, 30}, {40, 2}});
  const auto c = match_detections_to_gt({}, gt, 3.0);
  CHECK(c == DetectionCounts{0, 0, 5});
  const auto s = score_counts(c);
  CHECK(s.precision == 0.0);
  CHECK(s.recall == 0.0);
  CHECK(s.f1 == 0.0);
}

TEST_CASE("crossing configuration beats greedy matching") {
  // Greedy nearest-first takes d0-g0 (distance 1) and leaves d1 with nothing in reach.
  const PointSet det = points({{0, 0}, {2, 0}});
  const PointSet gt = points({{1, 0}, {-2, 0}});
  const auto c = match_detections_to_gt(det, gt, 3.0);
  CHECK(c.tp == 2);
  CHECK(c.tp == oracle::best_matching(det, gt, 3.0).count);
}

TEST_CASE("count identities and optimality on random instances") {
  std::mt19937_64 rng(19);
  std::uniform_int_distribution<int> n(0, 6);
  for (int trial = 0; trial < 200; ++trial) {
    const PointSet det = oracle::random_points(rng, n(rng), 25.0);
    const PointSet gt = oracle::random_points(rng, n(rng), 25.0);
    const double gate = 2.0 + trial % 9;
    const auto c = match_detections_to_gt(det, gt, gate);
    REQUIRE(c.tp + c.fn == static_cast<int>(gt.size()));
    REQUIRE(c.tp + c.fp == static_cast<int>(det.size()));
    REQUIRE(c.tp == oracle::best_matching(det, gt, gate).count);
    const auto s = score_counts(c);
    REQUIRE(s.f1 >= 0.0);
    REQUIRE(s.f1 <= 1.0);
    REQUIRE((s.f1 == 1.0) == (c.fp == 0 && c.fn == 0 && c.tp > 0));
  }
}

TEST_CASE("sequence score: all perfect, one frame missed") {
  Sequence gt{points({{1, 1}, {5, 5}}, 1), points({{2, 2}, {6, 6}}, 2)};
  const auto perfect = score_sequence(gt, gt, 1.0);
  CHECK(perfect.total.f1 == 1.0);
  for (const auto& f : perfect.per_frame) CHECK(f.f1 == 1.0);

  Sequence det{gt[0], points({}, 2)};
  const auto half = score_sequence(det, gt, 1.0);
  CHECK(half.total.recall == 0.5);
  REQUIRE(half.per_frame.size() == 2);
  CHECK(half.per_frame[0].f1 == 1.0);
  CHECK(half.per_frame[1].f1 == 0.0);
  CHECK(half.frames == std::vector<int>{1, 2});
}

TEST_CASE("micro-averaging differs from the mean of per-frame F1") {
  // Frame 1: 1 of 1 found. Frame 2: 1 of 9 found.
  Sequence gt{points({{0, 0}}, 1), points({}, 2)};
  Sequence det{points({{0, 0}}, 1), points({{0, 0}}, 2)};
  for (int k = 0; k < 9; ++k) gt[1].points.push_back({10.0 * k, 50});
  det[1].points = {{0, 50}};
  const auto s = score_sequence(det, gt, 1.0);
  const double micro = 2.0 * 2 / (2.0 * 2 + 0 + 8);
  const double macro = 0.5 * (s.per_frame[0].f1 + s.per_frame[1].f1);
  CHECK(s.total.f1 == doctest::Approx(micro).epsilon(1e-12));
  CHECK(std::abs(s.total.f1 - macro) > 0.1);
}

TEST_CASE("mismatched sequence lengths are rejected") {
  CHECK_THROWS(score_sequence(Sequence(2), Sequence(3), 1.0));
}

TEST_CASE("evaluation CSV has per-frame rows and a total") {
  Sequence gt{points({{1, 1}}, 1), points({{2, 2}}, 2)};
  Sequence det{points({{1, 1}}, 1), points({}, 2)};
  const fs::path path = fs::temp_directory_path() / "tracklabel_eval.csv";
  io::write_evaluation_csv(path, score_sequence(det, gt, 1.0));
  std::ifstream in(path);
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  REQUIRE(lines.size() == 4);
  CHECK(lines[0] == "frame,tp,fp,fn,f1");
  CHECK(lines[1] == "1,1,0,0,1");
  CHECK(lines[2] == "2,0,0,1,0");
  CHECK(lines[3].rfind("total,1,0,1,", 0) == 0);
  fs::remove(path);
}

TEST_CASE("F1 plot has the requested size and draws on white") {
  Sequence gt{points({{1, 1}}, 1), points({{2, 2}}, 2), points({{3, 3}}, 3)};
  const RgbImage img = plot_f1_curve(score_sequence(gt, gt, 1.0), 200, 100);
  CHECK(img.width() == 200);
  CHECK(img.height() == 100);
  std::size_t non_white = 0;
  for (const auto& px : img.values()) non_white += !(px[0] == 255 && px[1] == 255 && px[2] == 255);
  CHECK(non_white > 0);
}

}  // TEST_SUITE
