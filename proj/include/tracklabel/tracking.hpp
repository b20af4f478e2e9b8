#pragma once

#include <filesystem>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "tracklabel/types.hpp"

namespace tracklabel {

/// One-by-one association between two point sets. Pairs are (left, right)
/// indices sorted by left index.
struct Matching {
  std::vector<std::pair<int, int>> pairs;
  std::vector<int> unmatched_left;
  std::vector<int> unmatched_right;
  double total_cost = 0.0;
};

/// Gated optimal matching: maximises the number of pairs with distance <= gate,
/// then minimises their summed Euclidean distance. Ties resolve to the
/// lexicographically smallest assignment of left points (left 0 first, lower
/// right index preferred, unmatched last).
Matching associate_frames(const PointSet& left, const PointSet& right, double gate);

enum class Direction { Forward, Backward };
std::string_view to_string(Direction d) noexcept;
Direction parse_direction(std::string_view text);

/// Contiguous run of detections rooted at the labeled frame.
struct Chain {
  int first_frame = 1;
  std::vector<Point> positions;       // positions[k] belongs to first_frame + k
  std::vector<int> detection_index;   // index into that frame's PointSet

  int last_frame() const { return first_frame + static_cast<int>(positions.size()) - 1; }
  bool alive_at(int t) const { return t >= first_frame && t <= last_frame(); }
  const Point& at(int t) const { return positions[static_cast<std::size_t>(t - first_frame)]; }
  int index_at(int t) const { return detection_index[static_cast<std::size_t>(t - first_frame)]; }

  friend bool operator==(const Chain&, const Chain&) = default;
};

/// Where a chain stopped extending: last tracked position and frame.
struct Termination {
  int track_id = 0;
  Point position;
  int frame = 1;
  Direction direction = Direction::Forward;

  friend bool operator==(const Termination&, const Termination&) = default;
};

struct TrackSet {
  int labeled_frame = 1;
  int frames = 0;
  std::vector<Chain> chains;  // chain i has track_id i
  std::vector<Termination> terminations;

  friend bool operator==(const TrackSet&, const TrackSet&) = default;
};

/// Seeds one chain per detection at the labeled frame, in (y, x) order, and
/// extends all chains forward to the last frame and backward to frame 1 by
/// repeated associate_frames. A chain that finds no partner is closed and its
/// end recorded as a termination.
TrackSet build_tracks(const Sequence& detections, int labeled_frame, double gate);

/// Chains alive at t divided by max(1, detections at t).
double tracked_ratio(const TrackSet& tracks, const Sequence& detections, int t);
/// tracked_ratio for every frame; element i is frame i + 1.
std::vector<double> tracked_ratios(const TrackSet& tracks, const Sequence& detections);

struct FrameRange {
  int a = 1;
  int b = 1;

  bool contains(int t) const { return t >= a && t <= b; }
  int length() const { return b - a + 1; }
  friend bool operator==(const FrameRange&, const FrameRange&) = default;
};

/// Largest interval around the labeled frame whose every ratio is >= alpha.
/// `ratios[i]` is frame i + 1.
FrameRange select_frame_range(std::span<const double> ratios, double alpha, int labeled_frame);

/// Frame t becomes frame T - t + 1 and directions swap.
Sequence reverse_time(const Sequence& detections);
TrackSet reverse_time(const TrackSet& tracks);

namespace io {
void write_tracks_csv(const std::filesystem::path& path, const TrackSet& tracks);
void write_terminations_csv(const std::filesystem::path& path, const TrackSet& tracks);
/// Rebuilds a TrackSet from its CSV files. Detection indices are recovered by
/// exact position lookup in `detections`.
TrackSet read_tracks(const std::filesystem::path& tracks_csv,
                     const std::filesystem::path& terminations_csv,
                     const Sequence& detections, int labeled_frame);
void write_ratios_csv(const std::filesystem::path& path, std::span<const double> ratios);
}  // namespace io

}  // namespace tracklabel
