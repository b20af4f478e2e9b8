#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "tracklabel/config.hpp"
#include "tracklabel/detector.hpp"
#include "tracklabel/evaluation.hpp"
#include "tracklabel/pseudolabel.hpp"
#include "tracklabel/tracking.hpp"

namespace tracklabel {

/// A time-lapse sequence with one annotated frame, read from
/// `<root>/images/{frame:06}.pgm|png` and `<root>/labels/{l:06}.csv`.
/// `<root>/gt/points.csv`, when present, enables scoring.
struct Dataset {
  std::vector<std::string> image_paths;
  std::vector<GrayImage> images;
  int labeled_frame = 1;
  PointSet labeled_points;
  std::optional<Sequence> gt;

  int frames() const { return static_cast<int>(images.size()); }
  int width() const { return images.front().width(); }
  int height() const { return images.front().height(); }
};

/// Image files of a directory ordered by frame number; the stems must be the
/// frame numbers 1..T.
std::vector<std::filesystem::path> list_frame_images(const std::filesystem::path& dir);

Dataset load_dataset(const std::filesystem::path& root, int labeled_frame);

struct IterationReport {
  int iteration = 1;
  FrameRange range;
  std::vector<double> ratios;           // tracked ratio per frame
  std::size_t n_pseudo_labels = 0;      // N
  std::size_t n_masked_pixels = 0;      // summed over the pseudo-labeled frames
  double loss_before = 0.0;
  double loss_after = 0.0;
  std::optional<SequenceScore> score;   // detections this iteration started from
  std::vector<PseudoLabelWarning> warnings;
};

struct PipelineResult {
  std::vector<IterationReport> iterations;
  Sequence final_detections;
  std::optional<SequenceScore> final_score;
};

/// Builds the configured detector. External detectors exchange files under
/// `work_dir`.
std::unique_ptr<Detector> make_detector(const PipelineConfig& config,
                                        const std::filesystem::path& work_dir);

/// Heatmaps for every frame (fanned out over `threads` for in-process detectors).
std::vector<Heatmap> predict_sequence(const Detector& detector, std::span<const GrayImage> images,
                                      int threads);
Sequence detect_sequence(std::span<const Heatmap> heatmaps, double peak_threshold,
                         double min_separation);

/// Step 1 only: fits `detector` on the labeled frame.
void fit_on_labeled_frame(Detector& detector, const Dataset& data, const PipelineConfig& config);

/// Full loop: fit on the labeled frame, then up to gamma rounds of
/// predict / detect / track / pseudo-label / fit, then a final prediction.
/// Everything is persisted under config.output_root when it is non-empty:
///   config.cfg, report.csv, iter_0/model.*,
///   iter_k/{heatmaps/, detections.csv, tracks.csv, terminations.csv,
///           ratios.csv, pseudolabels/, warnings.csv, evaluation.csv, model.*},
///   final/{heatmaps/, detections.csv, evaluation.csv, f1.ppm}
PipelineResult run_pipeline(const PipelineConfig& config, const Dataset& data, Detector& detector);
PipelineResult run_pipeline(const PipelineConfig& config);

}  // namespace tracklabel
