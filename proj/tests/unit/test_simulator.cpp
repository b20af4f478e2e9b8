#include <doctest.h>

#include <filesystem>

#include "tracklabel/error.hpp"
#include "tracklabel/io.hpp"
#include "tracklabel/pseudolabel.hpp"
#include "tracklabel/simulator.hpp"

using namespace tracklabel;
namespace fs = std::filesystem;

TEST_SUITE("simulator") {

TEST_CASE("frozen dynamics give identical frames and constant ground truth") {
  SimConfig c;
  c.width = 48;
  c.height = 40;
  c.frames = 6;
  c.initial_cells = 3;
  c.division_rate = 0.0;
  c.motion_step_sigma = 0.0;
  c.contrast_decay = 0.0;
  c.noise_growth = 0.0;
  c.noise_sigma = 0.0;
  const auto s = simulate(c);
  REQUIRE(s.images.size() == 6);
  for (int t = 1; t < 6; ++t) {
    CHECK(s.images[t] == s.images[0]);
    CHECK(s.gt_points[t].points == s.gt_points[0].points);
    CHECK(s.gt_points[t].frame == t + 1);
  }
}

TEST_CASE("same seed reproduces the sequence bit for bit, another seed does not") {
  SimConfig c;
  c.width = 64;
  c.height = 64;
  c.frames = 10;
  c.seed = 77;
  const auto a = simulate(c);
  const auto b = simulate(c);
  CHECK(a.images == b.images);
  CHECK(a.gt_points == b.gt_points);
  c.seed = 78;
  CHECK(simulate(c).images != a.images);
}

TEST_CASE("cell count is constant without division and non-decreasing with it") {
  SimConfig c;
  c.width = 96;
  c.height = 96;
  c.frames = 30;
  c.initial_cells = 8;
  c.division_rate = 0.0;
  auto s = simulate(c);
  for (const auto& p : s.gt_points) CHECK(p.size() == 8);

  c.division_rate = 0.05;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    c.seed = seed;
    s = simulate(c);
    for (std::size_t t = 1; t < s.gt_points.size(); ++t)
      REQUIRE(s.gt_points[t].size() >= s.gt_points[t - 1].size());
    CHECK(s.gt_points.back().size() > 8);
  }
}

TEST_CASE("ground truth stays in bounds and tracks link daughters to parents") {
  SimConfig c;
  c.width = 50;
  c.height = 30;
  c.frames = 40;
  c.initial_cells = 6;
  c.division_rate = 0.04;
  c.motion_step_sigma = 2.0;
  c.seed = 3;
  const auto s = simulate(c);
  for (const auto& p : s.gt_points)
    for (const auto& q : p.points) {
      REQUIRE(q.x >= 0.0);
      REQUIRE(q.y >= 0.0);
      REQUIRE(q.x < 50.0);
      REQUIRE(q.y < 30.0);
    }
  for (const auto& g : s.gt_tracks) {
    CHECK(g.last_frame() == c.frames);
    if (g.parent < 0) {
      CHECK(g.first_frame == 1);
      continue;
    }
    const auto& parent = s.gt_tracks[static_cast<std::size_t>(g.parent)];
    REQUIRE(parent.first_frame < g.first_frame);
    const Point at_split = parent.positions[static_cast<std::size_t>(g.first_frame - parent.first_frame)];
    CHECK(distance(at_split, g.positions.front()) <= c.cell_radius + 1e-9);
  }
}

TEST_CASE("drift lowers contrast and raises noise in later frames") {
  SimConfig c;
  c.width = 64;
  c.height = 64;
  c.frames = 60;
  c.initial_cells = 1;
  c.motion_step_sigma = 0.0;
  c.division_rate = 0.0;
  c.noise_sigma = 0.0;
  c.noise_growth = 0.0;
  c.contrast_decay = 0.01;
  auto s = simulate(c);
  const Point p = s.gt_points[0].points[0];
  const int px = static_cast<int>(std::round(p.x)), py = static_cast<int>(std::round(p.y));
  CHECK(s.images[59].at(px, py) < s.images[0].at(px, py));
  CHECK(s.images[59].at(px, py) > static_cast<float>(c.background));

  c.contrast_decay = 0.0;
  c.noise_growth = 0.004;
  s = simulate(c);
  auto spread = [&](int t) {
    double sum = 0, sq = 0;
    int n = 0;
    const auto& img = s.images[t - 1];
    for (int y = 0; y < 64; ++y)
      for (int x = 0; x < 64; ++x)
        if (std::hypot(x - p.x, y - p.y) > 20) {
          sum += img.at(x, y);
          sq += img.at(x, y) * img.at(x, y);
          ++n;
        }
    return std::sqrt(sq / n - (sum / n) * (sum / n));
  };
  CHECK(spread(60) > 0.15);
  CHECK(spread(60) > 5 * spread(5));
}

TEST_CASE("invalid configurations are rejected") {
  SimConfig c;
  c.frames = 0;
  CHECK_THROWS_AS(simulate(c), Error);
  c = {};
  c.division_rate = 1.5;
  CHECK_THROWS_AS(simulate(c), Error);
  c = {};
  c.noise_sigma = -1;
  CHECK_THROWS_AS(simulate(c), Error);
}

TEST_CASE("simulator settings parse from key/value pairs") {
  SimConfig c;
  CHECK(apply_setting(c, "sim_frames", "12"));
  CHECK(apply_setting(c, "seed", "99"));
  CHECK_FALSE(apply_setting(c, "beta", "12"));
  CHECK(c.frames == 12);
  CHECK(c.seed == 99u);
  CHECK_THROWS_AS(apply_setting(c, "sim_frames", "twelve"), Error);
}

TEST_CASE("dataset layout on disk") {
  SimConfig c;
  c.width = 32;
  c.height = 32;
  c.frames = 4;
  c.initial_cells = 2;
  const auto s = simulate(c);
  const fs::path root = fs::temp_directory_path() / "tracklabel_sim_layout";
  fs::remove_all(root);
  io::write_synthetic_sequence(root, s, 2);
  CHECK(fs::exists(root / "images" / "000001.pgm"));
  CHECK(fs::exists(root / "images" / "000004.pgm"));
  CHECK(fs::exists(root / "gt" / "tracks.csv"));
  CHECK(io::read_pgm(root / "images" / "000003.pgm") == s.images[2]);
  CHECK(io::read_points_csv(root / "gt" / "points.csv", 4) == s.gt_points);
  CHECK(io::read_label_csv(root / "labels" / "000002.csv", 2) == s.gt_points[1]);
  fs::remove_all(root);
}

TEST_CASE("overlay: plain image, tinted disk, centred markers") {
  GrayImage img(40, 40, 0.5f);
  const RgbImage plain = render_overlay(img, {}, {});
  for (const auto& px : plain.values()) REQUIRE((px[0] == 128 && px[1] == 128 && px[2] == 128));

  UnreliableRegions r;
  r.unassociated.push_back({{20, 20}, 3});
  const Mask m = build_mask(40, 40, r, 3, 1, 6.0);
  const RgbImage tinted = render_overlay(img, {}, {}, &m);
  std::size_t changed = 0;
  for (const auto& px : tinted.values()) changed += px[1] != 128;
  CHECK(changed == count_masked(m));

  PointSet det;
  det.points = {{10, 12}};
  PointSet gt;
  gt.points = {{30, 25}};
  const RgbImage marks = render_overlay(img, det, gt);
  CHECK(marks.at(10, 12) == std::array<std::uint8_t, 3>{0, 220, 0});
  CHECK(marks.at(12, 12) == std::array<std::uint8_t, 3>{0, 220, 0});
  CHECK(marks.at(30, 25) == std::array<std::uint8_t, 3>{40, 80, 255});
  CHECK(marks.at(30, 27) == std::array<std::uint8_t, 3>{40, 80, 255});
}

}  // TEST_SUITE
