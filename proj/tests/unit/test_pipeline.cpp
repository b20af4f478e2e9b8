#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "perfect_detector.hpp"
#include "tracklabel/error.hpp"
#include "tracklabel/heatmap.hpp"
#include "tracklabel/io.hpp"
#include "tracklabel/pipeline.hpp"
#include "tracklabel/simulator.hpp"

using namespace tracklabel;
namespace fs = std::filesystem;

namespace {

struct Fixture {
  fs::path root;
  SyntheticSequence sim;
};

Fixture make_fixture(const std::string& name, SimConfig c, int labeled_frame) {
  Fixture f{fs::temp_directory_path() / ("tracklabel_pipeline_" + name), simulate(c)};
  fs::remove_all(f.root);
  io::write_synthetic_sequence(f.root / "data", f.sim, labeled_frame);
  return f;
}

SimConfig small_sim() {
  SimConfig c;
  c.width = 64;
  c.height = 64;
  c.frames = 12;
  c.initial_cells = 4;
  c.seed = 5;
  return c;
}

PipelineConfig config_for(const Fixture& f, int labeled_frame, int gamma) {
  PipelineConfig c;
  c.data_root = f.root / "data";
  c.output_root = f.root / "out";
  c.labeled_frame = labeled_frame;
  c.gamma = gamma;
  c.beta = 12;
  c.log = false;
  return c;
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    files[fs::relative(e.path(), dir).string()] = s.str();
  }
  return files;
}

std::vector<std::vector<std::string>> read_rows(const fs::path& csv) {
  std::ifstream in(csv);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    std::vector<std::string> row;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) row.push_back(cell);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("perfect detector: full range at iteration 1, exact pseudo-heatmaps, early stop") {
  SimConfig s = small_sim();
  s.division_rate = 0.0;
  const int l = 6;
  const Fixture f = make_fixture("perfect", s, l);
  PipelineConfig c = config_for(f, l, 3);
  c.output_root.clear();
  const Dataset data = load_dataset(c.data_root, l);
  oracle::PerfectDetector detector(f.sim, c.resolved_sigma());
  const auto result = run_pipeline(c, data, detector);

  REQUIRE(result.iterations.size() == 2);
  const auto& first = result.iterations[0];
  CHECK(first.range == FrameRange{1, s.frames});
  CHECK(first.n_pseudo_labels == static_cast<std::size_t>(s.frames));
  CHECK(first.n_masked_pixels == 0);
  CHECK(first.score->total.f1 == 1.0);
  CHECK(result.final_score->total.f1 == 1.0);
  CHECK(detector.version() == 3);

  const TrackSet tracks = build_tracks(data.gt.value(), l, c.resolved_gate());
  const auto labels = build_pseudo_labels({tracks, *data.gt, first.range, data.labeled_points, 64, 64,
                                           c.resolved_sigma(), c.beta});
  for (const auto& frame : labels.frames)
    CHECK(frame.heatmap == encode_heatmap(f.sim.gt_points[frame.frame - 1], 64, 64, c.resolved_sigma()));
  fs::remove_all(f.root);
}

TEST_CASE("gamma = 1 runs exactly one round") {
  SimConfig s = small_sim();
  s.division_rate = 0.0;
  const Fixture f = make_fixture("gamma1", s, 3);
  PipelineConfig c = config_for(f, 3, 1);
  c.output_root.clear();
  oracle::PerfectDetector detector(f.sim, c.resolved_sigma());
  const auto result = run_pipeline(c, load_dataset(c.data_root, 3), detector);
  CHECK(result.iterations.size() == 1);
  CHECK(result.iterations[0].range == FrameRange{1, s.frames});
  fs::remove_all(f.root);
}

TEST_CASE("no detections at the labeled frame limit the range with a warning") {
  SimConfig s = small_sim();
  const Fixture f = make_fixture("blind", s, 4);
  SimConfig other = s;
  other.seed = 999;
  const auto unrelated = simulate(other);
  PipelineConfig c = config_for(f, 4, 1);
  c.output_root.clear();
  oracle::PerfectDetector detector(unrelated, c.resolved_sigma());
  const auto result = run_pipeline(c, load_dataset(c.data_root, 4), detector);
  const auto& r = result.iterations.at(0);
  CHECK(r.range == FrameRange{4, 4});
  CHECK(r.n_pseudo_labels == 1);
  REQUIRE_FALSE(r.warnings.empty());
  CHECK(r.warnings[0].frame == 4);
  fs::remove_all(f.root);
}

TEST_CASE("report counts match the persisted artifacts") {
  const Fixture f = make_fixture("artifacts", small_sim(), 6);
  const PipelineConfig c = config_for(f, 6, 2);
  const auto result = run_pipeline(c);
  const fs::path out = c.output_root;
  CHECK(fs::exists(out / "config.cfg"));
  CHECK(fs::exists(out / "iter_0" / "model.tmpl"));
  CHECK(fs::exists(out / "final" / "f1.ppm"));

  const auto rows = read_rows(out / "report.csv");
  REQUIRE(rows.size() == result.iterations.size() + 1);
  for (const auto& r : result.iterations) {
    const fs::path dir = out / ("iter_" + std::to_string(r.iteration));
    const auto bundle = io::read_pseudo_label_bundle(dir / "pseudolabels" / "manifest.csv");
    CHECK(bundle.size() == r.n_pseudo_labels);
    std::size_t masked = 0;
    for (const auto& frame : bundle) {
      masked += count_masked(frame.mask);
      CHECK(frame.frame >= r.range.a);
      CHECK(frame.frame <= r.range.b);
    }
    CHECK(masked == r.n_masked_pixels);
    const auto& row = rows[static_cast<std::size_t>(r.iteration - 1)];
    CHECK(row[1] == std::to_string(r.range.a));
    CHECK(row[2] == std::to_string(r.range.b));
    CHECK(row[3] == std::to_string(r.n_pseudo_labels));
    CHECK(row[4] == std::to_string(r.n_masked_pixels));
    CHECK(fs::exists(dir / "model.tmpl"));
    CHECK(io::read_heatmap(dir / "heatmaps" / "000001.hmap").width() == 64);
  }
  CHECK(io::read_points_csv(out / "final" / "detections.csv", 12) == result.final_detections);
  CHECK(rows.back()[0] == "final");
  fs::remove_all(f.root);
}

TEST_CASE("first-round detections equal the one-frame supervised baseline") {
  const Fixture f = make_fixture("baseline", small_sim(), 6);
  const PipelineConfig c = config_for(f, 6, 1);
  const auto result = run_pipeline(c);
  const Dataset data = load_dataset(c.data_root, 6);
  auto baseline = make_detector(c, f.root / "work");
  fit_on_labeled_frame(*baseline, data, c);
  const Sequence expected = detect_sequence(predict_sequence(*baseline, data.images, 1),
                                            c.peak_threshold, c.resolved_min_separation());
  CHECK(io::read_points_csv(c.output_root / "iter_1" / "detections.csv", 12) == expected);
  CHECK(result.iterations[0].score->total.f1 == score_sequence(expected, *data.gt, c.resolved_eval_gate()).total.f1);
  fs::remove_all(f.root);
}

TEST_CASE("reruns produce bit-identical artifact trees") {
  const Fixture f = make_fixture("determinism", small_sim(), 6);
  PipelineConfig c = config_for(f, 6, 2);
  c.threads = 2;
  run_pipeline(c);
  const auto first = snapshot(c.output_root);
  fs::remove_all(c.output_root);
  run_pipeline(c);
  const auto second = snapshot(c.output_root);
  CHECK(first.size() > 20);
  CHECK(first == second);
  fs::remove_all(f.root);
}

TEST_CASE("configuration and dataset errors") {
  const Fixture f = make_fixture("errors", small_sim(), 6);
  PipelineConfig c = config_for(f, 6, 1);
  c.labeled_frame = 13;
  CHECK_THROWS_AS(run_pipeline(c), Error);
  c.labeled_frame = 7;
  CHECK_THROWS_AS(run_pipeline(c), Error);
  c = config_for(f, 6, 1);
  c.data_root = f.root / "missing";
  CHECK_THROWS_AS(run_pipeline(c), Error);
  fs::remove_all(f.root);
}

}  // TEST_SUITE
