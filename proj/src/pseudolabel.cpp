#include "tracklabel/pseudolabel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "tracklabel/error.hpp"
#include "tracklabel/heatmap.hpp"
#include "tracklabel/io.hpp"

namespace tracklabel {

PointSet collect_tracked_positions(const TrackSet& tracks, int t) {
  PointSet out;
  out.frame = t;
  for (const Chain& c : tracks.chains)
    if (c.alive_at(t)) out.points.push_back(c.at(t));
  return out;
}

std::vector<UnassociatedDetection> collect_unassociated(const Sequence& detections,
                                                        const TrackSet& tracks) {
  std::vector<UnassociatedDetection> out;
  for (std::size_t i = 0; i < detections.size(); ++i) {
    const int t = static_cast<int>(i) + 1;
    std::vector<char> claimed(detections[i].size(), 0);
    for (const Chain& c : tracks.chains)
      if (c.alive_at(t)) claimed[static_cast<std::size_t>(c.index_at(t))] = 1;
    for (std::size_t k = 0; k < claimed.size(); ++k)
      if (!claimed[k]) out.push_back({detections[i].points[k], t});
  }
  return out;
}

UnreliableRegions collect_unreliable_regions(const Sequence& detections, const TrackSet& tracks) {
  return {collect_unassociated(detections, tracks), tracks.terminations};
}

namespace {

void clear_disk(Mask& mask, const Point& c, double radius) {
  const int x0 = std::max(0, static_cast<int>(std::floor(c.x - radius)) - 1);
  const int x1 = std::min(mask.width() - 1, static_cast<int>(std::ceil(c.x + radius)) + 1);
  const int y0 = std::max(0, static_cast<int>(std::floor(c.y - radius)) - 1);
  const int y1 = std::min(mask.height() - 1, static_cast<int>(std::ceil(c.y + radius)) + 1);
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x)
      if (std::hypot(x - c.x, y - c.y) <= radius) mask.at(x, y) = 0;
}

}  // namespace

Mask build_mask(int width, int height, const UnreliableRegions& regions, int t,
                int labeled_frame, double beta) {
  require(beta > 0.0, ErrorKind::InvalidParameter, "beta must be positive");
  Mask mask(width, height, 1);
  if (t > labeled_frame) {
    for (const auto& u : regions.unassociated)
      if (u.frame == t) clear_disk(mask, u.position, beta);
  }
  for (const Termination& end : regions.terminations) {
    const bool applies = end.direction == Direction::Forward ? t > end.frame : t < end.frame;
    if (applies) clear_disk(mask, end.position, beta + std::abs(end.frame - t));
  }
  return mask;
}

std::size_t count_masked(const Mask& mask) { return mask.size() - count_valid(mask); }

PseudoLabelSet build_pseudo_labels(const PseudoLabelInputs& in) {
  const int frames = static_cast<int>(in.detections.size());
  require(in.range.a >= 1 && in.range.a <= in.tracks.labeled_frame &&
              in.tracks.labeled_frame <= in.range.b && in.range.b <= frames,
          ErrorKind::InvalidParameter, "frame range must contain the labeled frame");
  require(in.image_paths.empty() || static_cast<int>(in.image_paths.size()) == frames,
          ErrorKind::InvalidInput, "image path list does not cover the sequence");

  const UnreliableRegions regions = collect_unreliable_regions(in.detections, in.tracks);
  const int l = in.tracks.labeled_frame;
  PseudoLabelSet out;
  for (int t = in.range.a; t <= in.range.b; ++t) {
    PseudoLabeledFrame f;
    f.frame = t;
    if (!in.image_paths.empty()) f.image_path = in.image_paths[static_cast<std::size_t>(t - 1)];
    if (t == l) {
      f.heatmap = encode_heatmap(in.labeled_points, in.width, in.height, in.sigma);
      f.mask = all_ones_mask(in.width, in.height);
      f.n_tracked = in.labeled_points.size();
    } else {
      const PointSet tracked = collect_tracked_positions(in.tracks, t);
      f.heatmap = encode_heatmap(tracked, in.width, in.height, in.sigma);
      f.mask = build_mask(in.width, in.height, regions, t, l, in.beta);
      f.n_tracked = tracked.size();
    }
    if (count_valid(f.mask) == 0) {
      out.warnings.push_back({t, "frame fully masked; excluded from pseudo-labels"});
      continue;
    }
    out.frames.push_back(std::move(f));
  }
  return out;
}

namespace io {

std::string frame_stem(int frame) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%06d", frame);
  return buf;
}

void write_pseudo_label_bundle(const std::filesystem::path& dir, const PseudoLabelSet& set) {
  std::filesystem::create_directories(dir);
  std::ofstream manifest(dir / "manifest.csv");
  require(manifest.good(), ErrorKind::Io, "cannot write manifest in " + dir.string());
  manifest << "frame,image_path,heatmap_path,mask_path,n_tracked,n_masked_pixels\n";
  for (const PseudoLabeledFrame& f : set.frames) {
    const std::string stem = frame_stem(f.frame);
    write_heatmap(dir / (stem + ".hmap"), f.heatmap);
    write_mask(dir / (stem + ".mask"), f.mask);
    manifest << f.frame << ',' << f.image_path << ',' << stem << ".hmap," << stem << ".mask,"
             << f.n_tracked << ',' << count_masked(f.mask) << '\n';
  }
}

std::vector<PseudoLabeledFrame> read_pseudo_label_bundle(const std::filesystem::path& manifest) {
  std::ifstream in(manifest);
  require(in.good(), ErrorKind::Io, "cannot open: " + manifest.string());
  std::string line;
  std::getline(in, line);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  require(line == "frame,image_path,heatmap_path,mask_path,n_tracked,n_masked_pixels",
          ErrorKind::InvalidInput, "unexpected manifest header in " + manifest.string());
  const auto base = manifest.parent_path();
  auto resolve = [&](const std::string& p) {
    const std::filesystem::path path(p);
    return path.is_absolute() ? path : base / path;
  };
  std::vector<PseudoLabeledFrame> frames;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto f = split_csv(line);
    require(f.size() == 6, ErrorKind::InvalidInput, "bad manifest row: " + line);
    PseudoLabeledFrame frame;
    frame.frame = parse_int(f[0]);
    frame.image_path = f[1];
    frame.heatmap = read_heatmap(resolve(f[2]));
    frame.mask = read_mask(resolve(f[3]));
    frame.n_tracked = static_cast<std::size_t>(parse_int(f[4]));
    require(frame.heatmap.same_shape(frame.mask), ErrorKind::InvalidInput,
            "heatmap and mask dimensions differ for frame " + f[0]);
    require(count_masked(frame.mask) == static_cast<std::size_t>(parse_int(f[5])),
            ErrorKind::InvalidInput, "masked pixel count mismatch for frame " + f[0]);
    frames.push_back(std::move(frame));
  }
  return frames;
}

}  // namespace io

}  // namespace tracklabel
