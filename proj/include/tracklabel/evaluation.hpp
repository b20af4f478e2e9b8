#pragma once

#include <filesystem>
#include <vector>

#include "tracklabel/io.hpp"
#include "tracklabel/types.hpp"

namespace tracklabel {

struct DetectionCounts {
  int tp = 0;
  int fp = 0;
  int fn = 0;

  DetectionCounts& operator+=(const DetectionCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
  friend bool operator==(const DetectionCounts&, const DetectionCounts&) = default;
};

struct DetectionScore {
  DetectionCounts counts;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Precision, recall and F1 from counts; each ratio is 0 when undefined.
DetectionScore score_counts(const DetectionCounts& counts);

/// tp = optimally associated pairs within `gate`; fp/fn = leftovers.
DetectionCounts match_detections_to_gt(const PointSet& detections, const PointSet& gt,
                                       double gate);

struct SequenceScore {
  DetectionScore total;                 // micro-averaged over frames
  std::vector<int> frames;
  std::vector<DetectionScore> per_frame;
};

SequenceScore score_sequence(const Sequence& detections, const Sequence& gt, double gate);

namespace io {
/// "frame,tp,fp,fn,f1" rows followed by a "total" row with the summed counts.
void write_evaluation_csv(const std::filesystem::path& path, const SequenceScore& score);
}  // namespace io

/// Line plot of per-frame F1 (x = frame, y = F1 in [0, 1]) on a white canvas.
RgbImage plot_f1_curve(const SequenceScore& score, int width = 480, int height = 240);

}  // namespace tracklabel
