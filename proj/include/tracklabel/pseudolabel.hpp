#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "tracklabel/grid.hpp"
#include "tracklabel/tracking.hpp"
#include "tracklabel/types.hpp"

namespace tracklabel {

/// A detection that no labeled-frame chain claims at its frame.
struct UnassociatedDetection {
  Point position;
  int frame = 1;

  friend bool operator==(const UnassociatedDetection&, const UnassociatedDetection&) = default;
};

struct UnreliableRegions {
  std::vector<UnassociatedDetection> unassociated;
  std::vector<Termination> terminations;
};

/// Positions of chains alive at t, in track-id order.
PointSet collect_tracked_positions(const TrackSet& tracks, int t);

/// Detections outside every chain, frame by frame in detection order.
std::vector<UnassociatedDetection> collect_unassociated(const Sequence& detections,
                                                        const TrackSet& tracks);

UnreliableRegions collect_unreliable_regions(const Sequence& detections, const TrackSet& tracks);

/// Reliability mask for frame t. A pixel is 0 when its centre lies within
///  - beta of an unassociated detection of frame t, only for t > labeled_frame;
///  - beta + |t_end - t| of a termination, for frames past the end in the
///    chain's tracking direction (forward: t > t_end, backward: t < t_end).
/// Every other pixel is 1.
Mask build_mask(int width, int height, const UnreliableRegions& regions, int t,
                int labeled_frame, double beta);

struct PseudoLabeledFrame {
  int frame = 1;
  std::string image_path;
  Heatmap heatmap;
  Mask mask;
  std::size_t n_tracked = 0;
};

struct PseudoLabelWarning {
  int frame = 1;
  std::string message;
};

struct PseudoLabelSet {
  std::vector<PseudoLabeledFrame> frames;
  std::vector<PseudoLabelWarning> warnings;
};

struct PseudoLabelInputs {
  const TrackSet& tracks;
  const Sequence& detections;
  FrameRange range;
  const PointSet& labeled_points;  // human annotation of the labeled frame
  int width = 0;
  int height = 0;
  double sigma = 6.0;
  double beta = 18.0;
  std::span<const std::string> image_paths = {};  // optional, element i is frame i + 1
};

/// Pseudo-heatmaps and masks for every frame of the range. The labeled frame
/// keeps its human annotation with an all-ones mask. Frames whose mask ends up
/// fully zero are dropped and reported in `warnings`.
PseudoLabelSet build_pseudo_labels(const PseudoLabelInputs& in);

std::size_t count_masked(const Mask& mask);

namespace io {
/// Writes {frame:06}.hmap, {frame:06}.mask and manifest.csv into `dir`.
/// Heatmap and mask paths in the manifest are relative to `dir`.
void write_pseudo_label_bundle(const std::filesystem::path& dir, const PseudoLabelSet& set);
/// Loads a bundle; relative heatmap/mask paths resolve against the manifest's
/// directory. Image paths are returned as written.
std::vector<PseudoLabeledFrame> read_pseudo_label_bundle(const std::filesystem::path& manifest);
std::string frame_stem(int frame);
}  // namespace io

}  // namespace tracklabel
