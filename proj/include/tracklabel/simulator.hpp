#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "tracklabel/grid.hpp"
#include "tracklabel/io.hpp"
#include "tracklabel/types.hpp"

namespace tracklabel {

/// Synthetic time-lapse parameters. Frame t (1-based) is rendered with
/// contrast max(0, 1 - contrast_decay * t) and noise standard deviation
/// noise_sigma + noise_growth * t.
struct SimConfig {
  int width = 128;
  int height = 128;
  int frames = 60;
  int initial_cells = 12;
  double cell_radius = 4.0;
  double motion_step_sigma = 0.7;
  double division_rate = 0.005;
  double contrast_decay = 0.008;
  double noise_growth = 0.003;
  double noise_sigma = 0.02;
  double background = 0.2;
  double cell_amplitude = 0.6;
  std::uint64_t seed = 1;
};

void validate(const SimConfig& config);

/// Config-file keys: sim_width, sim_height, sim_frames, sim_cells,
/// sim_cell_radius, sim_motion_sigma, sim_division_rate, sim_contrast_decay,
/// sim_noise_growth, sim_noise_sigma, sim_background, sim_amplitude and the
/// shared `seed`. Returns false for any other key; malformed values raise a
/// usage error.
bool apply_setting(SimConfig& config, const std::string& key, const std::string& value);

/// Ground-truth trajectory of one cell; parent is -1 for founders.
struct GtTrack {
  int id = 0;
  int parent = -1;
  int first_frame = 1;
  std::vector<Point> positions;

  int last_frame() const { return first_frame + static_cast<int>(positions.size()) - 1; }
};

struct SyntheticSequence {
  std::vector<GrayImage> images;  // element i is frame i + 1, 8-bit quantised
  Sequence gt_points;             // per frame, in track-id order
  std::vector<GtTrack> gt_tracks;
};

/// Deterministic in `seed`. Cells take Gaussian random-walk steps reflected at
/// the borders; each cell divides with probability division_rate per frame,
/// placing a daughter one cell radius away. Cells are rendered as Gaussian
/// blobs over a flat background with additive Gaussian noise.
///
/// Randomness comes from SplitMix64 run in counter mode: draw k of stream s is
/// splitmix64(seed ^ mix(s) + k * golden), so trajectories and every frame's
/// noise are independent streams and reproducible on any platform.
SyntheticSequence simulate(const SimConfig& config);

namespace io {
/// images/{frame:06}.pgm, gt/points.csv, gt/tracks.csv and, when a labeled
/// frame is given, labels/{l:06}.csv.
void write_synthetic_sequence(const std::filesystem::path& root, const SyntheticSequence& seq,
                              std::optional<int> labeled_frame = std::nullopt);
}  // namespace io

/// Grayscale image with masked-out pixels tinted red, ground truth drawn as
/// blue crosses and detections as green crosses (detections on top).
RgbImage render_overlay(const GrayImage& image, const PointSet& detections, const PointSet& gt,
                        const Mask* mask = nullptr);

}  // namespace tracklabel
