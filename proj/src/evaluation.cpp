#include "tracklabel/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "tracklabel/error.hpp"
#include "tracklabel/tracking.hpp"

namespace tracklabel {

DetectionScore score_counts(const DetectionCounts& c) {
  DetectionScore s;
  s.counts = c;
  s.precision = c.tp + c.fp > 0 ? static_cast<double>(c.tp) / (c.tp + c.fp) : 0.0;
  s.recall = c.tp + c.fn > 0 ? static_cast<double>(c.tp) / (c.tp + c.fn) : 0.0;
  s.f1 = s.precision + s.recall > 0.0
             ? 2.0 * s.precision * s.recall / (s.precision + s.recall)
             : 0.0;
  return s;
}

DetectionCounts match_detections_to_gt(const PointSet& detections, const PointSet& gt,
                                       double gate) {
  const Matching m = associate_frames(detections, gt, gate);
  return {static_cast<int>(m.pairs.size()), static_cast<int>(m.unmatched_left.size()),
          static_cast<int>(m.unmatched_right.size())};
}

SequenceScore score_sequence(const Sequence& detections, const Sequence& gt, double gate) {
  require(detections.size() == gt.size(), ErrorKind::InvalidInput,
          "detections and ground truth cover different frame counts");
  SequenceScore out;
  DetectionCounts sum;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const DetectionCounts c = match_detections_to_gt(detections[i], gt[i], gate);
    sum += c;
    out.frames.push_back(gt[i].frame);
    out.per_frame.push_back(score_counts(c));
  }
  out.total = score_counts(sum);
  return out;
}

namespace io {

void write_evaluation_csv(const std::filesystem::path& path, const SequenceScore& score) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  require(out.good(), ErrorKind::Io, "cannot open for writing: " + path.string());
  out << "frame,tp,fp,fn,f1\n";
  for (std::size_t i = 0; i < score.per_frame.size(); ++i) {
    const auto& s = score.per_frame[i];
    out << score.frames[i] << ',' << s.counts.tp << ',' << s.counts.fp << ',' << s.counts.fn
        << ',' << format_number(s.f1) << '\n';
  }
  const auto& t = score.total;
  out << "total," << t.counts.tp << ',' << t.counts.fp << ',' << t.counts.fn << ','
      << format_number(t.f1) << '\n';
}

}  // namespace io

RgbImage plot_f1_curve(const SequenceScore& score, int width, int height) {
  RgbImage img(width, height, {255, 255, 255});
  const int left = 30, right = width - 10, top = 10, bottom = height - 20;
  const std::array<std::uint8_t, 3> axis{0, 0, 0}, grid{220, 220, 220}, line{200, 30, 30};
  for (int k = 0; k <= 4; ++k) {
    const int y = bottom - (bottom - top) * k / 4;
    for (int x = left; x <= right; ++x) img.at(x, y) = grid;
  }
  for (int y = top; y <= bottom; ++y) img.at(left, y) = axis;
  for (int x = left; x <= right; ++x) img.at(x, bottom) = axis;

  const std::size_t n = score.per_frame.size();
  if (n == 0) return img;
  auto to_px = [&](std::size_t i) {
    const double fx = n > 1 ? static_cast<double>(i) / (n - 1) : 0.5;
    const double f1 = std::clamp(score.per_frame[i].f1, 0.0, 1.0);
    return std::pair<double, double>{left + fx * (right - left), bottom - f1 * (bottom - top)};
  };
  auto [px, py] = to_px(0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto [qx, qy] = to_px(i);
    const int steps = std::max(1, static_cast<int>(std::ceil(std::max(std::abs(qx - px), std::abs(qy - py)))));
    for (int s = 0; s <= steps; ++s) {
      const double a = static_cast<double>(s) / steps;
      const int x = static_cast<int>(std::lround(px + a * (qx - px)));
      const int y = static_cast<int>(std::lround(py + a * (qy - py)));
      if (img.contains(x, y)) img.at(x, y) = line;
    }
    px = qx;
    py = qy;
  }
  return img;
}

}  // namespace tracklabel
