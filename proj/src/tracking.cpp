#include "tracklabel/tracking.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <string>

#include "tracklabel/assignment.hpp"
#include "tracklabel/error.hpp"
#include "tracklabel/io.hpp"

namespace tracklabel {

Matching associate_frames(const PointSet& left, const PointSet& right, double gate) {
  require(gate > 0.0, ErrorKind::InvalidParameter, "gate must be positive");
  const int n = static_cast<int>(left.size());
  const int m = static_cast<int>(right.size());
  Matching out;
  if (n == 0 || m == 0) {
    out.unmatched_left.resize(n);
    out.unmatched_right.resize(m);
    std::iota(out.unmatched_left.begin(), out.unmatched_left.end(), 0);
    std::iota(out.unmatched_right.begin(), out.unmatched_right.end(), 0);
    return out;
  }

  // Rows: n real + m dummy. Columns: m real + n dummy. Every real pair earns
  // a bonus larger than any achievable distance sum, so match count dominates.
  const int size = n + m;
  const double bonus = gate * (std::min(n, m) + 1) + 1.0;
  std::vector<double> cost(static_cast<std::size_t>(size) * size, kForbidden);
  auto at = [&](int r, int c) -> double& { return cost[static_cast<std::size_t>(r) * size + c]; };
  std::vector<double> dist(static_cast<std::size_t>(n) * m);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) {
      const double d = distance(left.points[i], right.points[j]);
      dist[static_cast<std::size_t>(i) * m + j] = d;
      if (d <= gate) at(i, j) = d - bonus;
    }
    at(i, m + i) = 0.0;
  }
  for (int j = 0; j < m; ++j) {
    at(n + j, j) = 0.0;
    for (int k = 0; k < n; ++k) at(n + j, m + k) = 0.0;
  }

  const std::vector<int> col_of = solve_assignment(cost, size, n);
  std::vector<char> right_used(m, 0);
  for (int i = 0; i < n; ++i) {
    const int j = col_of[i];
    if (j < m) {
      out.pairs.emplace_back(i, j);
      out.total_cost += dist[static_cast<std::size_t>(i) * m + j];
      right_used[j] = 1;
    } else {
      out.unmatched_left.push_back(i);
    }
  }
  for (int j = 0; j < m; ++j)
    if (!right_used[j]) out.unmatched_right.push_back(j);
  return out;
}

std::string_view to_string(Direction d) noexcept {
  return d == Direction::Forward ? "forward" : "backward";
}

Direction parse_direction(std::string_view text) {
  if (text == "forward") return Direction::Forward;
  if (text == "backward") return Direction::Backward;
  fail(ErrorKind::InvalidInput, "unknown direction '" + std::string(text) + "'");
}

namespace {

// Extends the chains listed in `active` one frame at a time in `step`
// direction. Each pos/idx list grows in step order, seed first.
void extend(TrackSet& tracks, const Sequence& detections, double gate, int step,
            std::vector<std::vector<Point>>& pos, std::vector<std::vector<int>>& idx) {
  const int frames = static_cast<int>(detections.size());
  std::vector<int> active(tracks.chains.size());
  std::iota(active.begin(), active.end(), 0);
  for (int t = tracks.labeled_frame; !active.empty(); t += step) {
    const int next = t + step;
    if (next < 1 || next > frames) break;
    PointSet left;
    left.frame = t;
    for (int id : active) left.points.push_back(pos[id].back());
    const PointSet& right = detections[next - 1];
    const Matching match = associate_frames(left, right, gate);

    std::vector<int> still_active;
    for (const auto& [li, rj] : match.pairs) {
      const int id = active[li];
      pos[id].push_back(right.points[rj]);
      idx[id].push_back(rj);
      still_active.push_back(id);
    }
    for (int li : match.unmatched_left) {
      const int id = active[li];
      tracks.terminations.push_back(
          {id, pos[id].back(), t, step > 0 ? Direction::Forward : Direction::Backward});
    }
    std::sort(still_active.begin(), still_active.end());
    active = std::move(still_active);
  }
}

}  // namespace

TrackSet build_tracks(const Sequence& detections, int labeled_frame, double gate) {
  const int frames = static_cast<int>(detections.size());
  require(labeled_frame >= 1 && labeled_frame <= frames, ErrorKind::InvalidParameter,
          "labeled frame " + std::to_string(labeled_frame) + " outside [1, " +
              std::to_string(frames) + "]");
  require(gate > 0.0, ErrorKind::InvalidParameter, "gate must be positive");

  TrackSet tracks;
  tracks.labeled_frame = labeled_frame;
  tracks.frames = frames;
  const PointSet& seeds = detections[labeled_frame - 1];
  std::vector<int> order(seeds.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return raster_less(seeds.points[a], seeds.points[b]);
  });
  tracks.chains.resize(order.size());

  std::vector<std::vector<Point>> fwd_pos(order.size()), bwd_pos(order.size());
  std::vector<std::vector<int>> fwd_idx(order.size()), bwd_idx(order.size());
  for (std::size_t id = 0; id < order.size(); ++id) {
    fwd_pos[id] = bwd_pos[id] = {seeds.points[order[id]]};
    fwd_idx[id] = bwd_idx[id] = {order[id]};
  }
  extend(tracks, detections, gate, +1, fwd_pos, fwd_idx);
  extend(tracks, detections, gate, -1, bwd_pos, bwd_idx);

  for (std::size_t id = 0; id < order.size(); ++id) {
    Chain& c = tracks.chains[id];
    const int back = static_cast<int>(bwd_pos[id].size()) - 1;
    c.first_frame = labeled_frame - back;
    c.positions.assign(bwd_pos[id].rbegin(), bwd_pos[id].rend());
    c.detection_index.assign(bwd_idx[id].rbegin(), bwd_idx[id].rend());
    c.positions.insert(c.positions.end(), fwd_pos[id].begin() + 1, fwd_pos[id].end());
    c.detection_index.insert(c.detection_index.end(), fwd_idx[id].begin() + 1, fwd_idx[id].end());
  }
  std::stable_sort(tracks.terminations.begin(), tracks.terminations.end(),
                   [](const Termination& a, const Termination& b) {
                     if (a.track_id != b.track_id) return a.track_id < b.track_id;
                     return a.direction == Direction::Forward && b.direction == Direction::Backward;
                   });
  return tracks;
}

double tracked_ratio(const TrackSet& tracks, const Sequence& detections, int t) {
  require(t >= 1 && t <= static_cast<int>(detections.size()), ErrorKind::InvalidParameter,
          "frame " + std::to_string(t) + " out of range");
  const auto alive = std::count_if(tracks.chains.begin(), tracks.chains.end(),
                                   [t](const Chain& c) { return c.alive_at(t); });
  const auto total = std::max<std::size_t>(1, detections[t - 1].size());
  return static_cast<double>(alive) / static_cast<double>(total);
}

std::vector<double> tracked_ratios(const TrackSet& tracks, const Sequence& detections) {
  std::vector<double> out(detections.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = tracked_ratio(tracks, detections, static_cast<int>(i) + 1);
  return out;
}

FrameRange select_frame_range(std::span<const double> ratios, double alpha, int labeled_frame) {
  require(alpha > 0.0 && alpha <= 1.0, ErrorKind::InvalidParameter, "alpha must lie in (0, 1]");
  const int frames = static_cast<int>(ratios.size());
  require(labeled_frame >= 1 && labeled_frame <= frames, ErrorKind::InvalidParameter,
          "labeled frame outside the sequence");
  auto ok = [&](int t) { return ratios[static_cast<std::size_t>(t - 1)] >= alpha; };
  require(ok(labeled_frame), ErrorKind::InternalConsistency,
          "tracked ratio at the labeled frame is below alpha");
  FrameRange r{labeled_frame, labeled_frame};
  while (r.a > 1 && ok(r.a - 1)) --r.a;
  while (r.b < frames && ok(r.b + 1)) ++r.b;
  return r;
}

Sequence reverse_time(const Sequence& detections) {
  const int frames = static_cast<int>(detections.size());
  Sequence out(detections.rbegin(), detections.rend());
  for (int i = 0; i < frames; ++i) out[i].frame = i + 1;
  return out;
}

TrackSet reverse_time(const TrackSet& tracks) {
  const int frames = tracks.frames;
  TrackSet out;
  out.frames = frames;
  out.labeled_frame = frames - tracks.labeled_frame + 1;
  for (const Chain& c : tracks.chains) {
    Chain r;
    r.first_frame = frames - c.last_frame() + 1;
    r.positions.assign(c.positions.rbegin(), c.positions.rend());
    r.detection_index.assign(c.detection_index.rbegin(), c.detection_index.rend());
    out.chains.push_back(std::move(r));
  }
  for (const Termination& t : tracks.terminations) {
    out.terminations.push_back({t.track_id, t.position, frames - t.frame + 1,
                                t.direction == Direction::Forward ? Direction::Backward
                                                                  : Direction::Forward});
  }
  std::stable_sort(out.terminations.begin(), out.terminations.end(),
                   [](const Termination& a, const Termination& b) {
                     if (a.track_id != b.track_id) return a.track_id < b.track_id;
                     return a.direction == Direction::Forward && b.direction == Direction::Backward;
                   });
  return out;
}

namespace io {

void write_tracks_csv(const std::filesystem::path& path, const TrackSet& tracks) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  require(out.good(), ErrorKind::Io, "cannot open for writing: " + path.string());
  out << "track_id,frame,x,y\n";
  for (std::size_t id = 0; id < tracks.chains.size(); ++id) {
    const Chain& c = tracks.chains[id];
    for (int t = c.first_frame; t <= c.last_frame(); ++t)
      out << id << ',' << t << ',' << format_number(c.at(t).x) << ','
          << format_number(c.at(t).y) << '\n';
  }
}

void write_terminations_csv(const std::filesystem::path& path, const TrackSet& tracks) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  require(out.good(), ErrorKind::Io, "cannot open for writing: " + path.string());
  out << "track_id,frame,x,y,direction\n";
  for (const Termination& t : tracks.terminations)
    out << t.track_id << ',' << t.frame << ',' << format_number(t.position.x) << ','
        << format_number(t.position.y) << ',' << to_string(t.direction) << '\n';
}

namespace {

std::vector<std::vector<std::string>> read_rows(const std::filesystem::path& path,
                                                std::string_view header) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::Io, "cannot open: " + path.string());
  std::string line;
  std::getline(in, line);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  require(line == header, ErrorKind::InvalidInput,
          "expected header '" + std::string(header) + "' in " + path.string());
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    rows.push_back(split_csv(line));
  }
  return rows;
}

}  // namespace

TrackSet read_tracks(const std::filesystem::path& tracks_csv,
                     const std::filesystem::path& terminations_csv, const Sequence& detections,
                     int labeled_frame) {
  TrackSet tracks;
  tracks.labeled_frame = labeled_frame;
  tracks.frames = static_cast<int>(detections.size());
  std::map<int, std::map<int, Point>> rows;
  for (const auto& f : read_rows(tracks_csv, "track_id,frame,x,y")) {
    require(f.size() == 4, ErrorKind::InvalidInput, "bad row in " + tracks_csv.string());
    rows[parse_int(f[0])][parse_int(f[1])] = {parse_number(f[2]), parse_number(f[3])};
  }
  int expected_id = 0;
  for (const auto& [id, by_frame] : rows) {
    require(id == expected_id++, ErrorKind::InvalidInput,
            "track ids must be contiguous from 0 in " + tracks_csv.string());
    Chain c;
    c.first_frame = by_frame.begin()->first;
    int expected_frame = c.first_frame;
    for (const auto& [t, p] : by_frame) {
      require(t == expected_frame++ && t >= 1 && t <= tracks.frames, ErrorKind::InvalidInput,
              "track " + std::to_string(id) + " is not a contiguous frame interval");
      const auto& pts = detections[t - 1].points;
      const auto it = std::find(pts.begin(), pts.end(), p);
      require(it != pts.end(), ErrorKind::InvalidInput,
              "track " + std::to_string(id) + " position at frame " + std::to_string(t) +
                  " is not a detection");
      c.positions.push_back(p);
      c.detection_index.push_back(static_cast<int>(it - pts.begin()));
    }
    require(c.alive_at(labeled_frame), ErrorKind::InvalidInput,
            "track " + std::to_string(id) + " does not contain the labeled frame");
    tracks.chains.push_back(std::move(c));
  }
  for (const auto& f : read_rows(terminations_csv, "track_id,frame,x,y,direction")) {
    require(f.size() == 5, ErrorKind::InvalidInput, "bad row in " + terminations_csv.string());
    tracks.terminations.push_back({parse_int(f[0]),
                                   {parse_number(f[2]), parse_number(f[3])},
                                   parse_int(f[1]),
                                   parse_direction(f[4])});
  }
  return tracks;
}

void write_ratios_csv(const std::filesystem::path& path, std::span<const double> ratios) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  require(out.good(), ErrorKind::Io, "cannot open for writing: " + path.string());
  out << "frame,ratio\n";
  for (std::size_t i = 0; i < ratios.size(); ++i)
    out << i + 1 << ',' << format_number(ratios[i]) << '\n';
}

}  // namespace io

}  // namespace tracklabel
