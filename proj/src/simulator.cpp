#include "tracklabel/simulator.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <string>

#include "tracklabel/error.hpp"
#include "tracklabel/pseudolabel.hpp"

namespace tracklabel {

namespace {

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

std::uint64_t splitmix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream)
      : key_(seed ^ splitmix64(stream + kGolden)) {}

  std::uint64_t next_u64() { return splitmix64(key_ + (++counter_) * kGolden); }

  // (0, 1), never exactly 0 so log() below stays finite.
  double uniform() { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

  double normal() {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

constexpr std::uint64_t kTrajectoryStream = 0;
constexpr std::uint64_t kNoiseStreamBase = 1000;

double reflect(double v, double hi) {
  // Reflect into [0, hi]; steps are small relative to the frame so one fold
  // usually suffices, the loop covers the rest.
  while (v < 0.0 || v > hi) v = v < 0.0 ? -v : 2.0 * hi - v;
  return v;
}

}  // namespace

void validate(const SimConfig& c) {
  require(c.width >= 1 && c.height >= 1 && c.frames >= 1 && c.initial_cells >= 1,
          ErrorKind::InvalidParameter, "simulator counts and dimensions must be >= 1");
  require(c.cell_radius > 0.0, ErrorKind::InvalidParameter, "cell_radius must be positive");
  require(c.motion_step_sigma >= 0.0 && c.noise_sigma >= 0.0 && c.noise_growth >= 0.0 &&
              c.contrast_decay >= 0.0,
          ErrorKind::InvalidParameter, "simulator sigmas and drift coefficients must be >= 0");
  require(c.division_rate >= 0.0 && c.division_rate <= 1.0, ErrorKind::InvalidParameter,
          "division_rate must lie in [0, 1]");
  require(c.background >= 0.0 && c.background <= 1.0 && c.cell_amplitude >= 0.0,
          ErrorKind::InvalidParameter, "background must lie in [0, 1], amplitude >= 0");
}

bool apply_setting(SimConfig& c, const std::string& key, const std::string& value) {
  auto number = [&] {
    try {
      return io::parse_number(value);
    } catch (const Error&) {
      fail(ErrorKind::Usage, "malformed number for " + key + ": '" + value + "'");
    }
  };
  auto integer = [&] {
    try {
      return io::parse_int(value);
    } catch (const Error&) {
      fail(ErrorKind::Usage, "malformed integer for " + key + ": '" + value + "'");
    }
  };
  if (key == "sim_width") c.width = integer();
  else if (key == "sim_height") c.height = integer();
  else if (key == "sim_frames") c.frames = integer();
  else if (key == "sim_cells") c.initial_cells = integer();
  else if (key == "sim_cell_radius") c.cell_radius = number();
  else if (key == "sim_motion_sigma") c.motion_step_sigma = number();
  else if (key == "sim_division_rate") c.division_rate = number();
  else if (key == "sim_contrast_decay") c.contrast_decay = number();
  else if (key == "sim_noise_growth") c.noise_growth = number();
  else if (key == "sim_noise_sigma") c.noise_sigma = number();
  else if (key == "sim_background") c.background = number();
  else if (key == "sim_amplitude") c.cell_amplitude = number();
  else if (key == "seed") {
    std::uint64_t seed = 0;
    const auto [end, ec] = std::from_chars(value.data(), value.data() + value.size(), seed);
    require(ec == std::errc{} && end == value.data() + value.size(), ErrorKind::Usage,
            "malformed seed: '" + value + "'");
    c.seed = seed;
  } else {
    return false;
  }
  return true;
}

SyntheticSequence simulate(const SimConfig& c) {
  validate(c);
  CounterRng rng(c.seed, kTrajectoryStream);
  const double xmax = c.width - 1.0;
  const double ymax = c.height - 1.0;

  SyntheticSequence seq;
  // Founders: rejection sampling keeps them at least three radii apart; after
  // a bounded number of attempts the spacing rule is dropped.
  const double min_gap = 3.0 * c.cell_radius;
  for (int k = 0; k < c.initial_cells; ++k) {
    Point p;
    for (int attempt = 0; attempt < 200; ++attempt) {
      p = {rng.uniform() * xmax, rng.uniform() * ymax};
      const bool clear = std::none_of(seq.gt_tracks.begin(), seq.gt_tracks.end(), [&](const GtTrack& g) {
        return distance(g.positions.back(), p) < min_gap;
      });
      if (clear) break;
    }
    seq.gt_tracks.push_back({k, -1, 1, {p}});
  }

  for (int t = 2; t <= c.frames; ++t) {
    const std::size_t alive = seq.gt_tracks.size();
    for (std::size_t k = 0; k < alive; ++k) {
      GtTrack& g = seq.gt_tracks[k];
      const Point prev = g.positions.back();
      const double dx = c.motion_step_sigma * rng.normal();
      const double dy = c.motion_step_sigma * rng.normal();
      g.positions.push_back({reflect(prev.x + dx, xmax), reflect(prev.y + dy, ymax)});
    }
    for (std::size_t k = 0; k < alive; ++k) {
      if (!(rng.uniform() < c.division_rate)) continue;
      const Point mother = seq.gt_tracks[k].positions.back();
      const double angle = 2.0 * std::numbers::pi * rng.uniform();
      const Point daughter{reflect(mother.x + c.cell_radius * std::cos(angle), xmax),
                           reflect(mother.y + c.cell_radius * std::sin(angle), ymax)};
      seq.gt_tracks.push_back(
          {static_cast<int>(seq.gt_tracks.size()), static_cast<int>(k), t, {daughter}});
    }
  }

  seq.gt_points.resize(static_cast<std::size_t>(c.frames));
  for (int t = 1; t <= c.frames; ++t) seq.gt_points[t - 1].frame = t;
  for (const GtTrack& g : seq.gt_tracks)
    for (int t = g.first_frame; t <= g.last_frame(); ++t)
      seq.gt_points[t - 1].points.push_back(g.positions[static_cast<std::size_t>(t - g.first_frame)]);

  const double blob_sd = 0.6 * c.cell_radius;
  const double inv_two_var = 1.0 / (2.0 * blob_sd * blob_sd);
  const double reach = 4.0 * blob_sd;
  for (int t = 1; t <= c.frames; ++t) {
    const double contrast = std::max(0.0, 1.0 - c.contrast_decay * t);
    const double noise = c.noise_sigma + c.noise_growth * t;
    std::vector<double> canvas(static_cast<std::size_t>(c.width) * c.height, c.background);
    for (const Point& p : seq.gt_points[t - 1].points) {
      const int x0 = std::max(0, static_cast<int>(std::floor(p.x - reach)));
      const int x1 = std::min(c.width - 1, static_cast<int>(std::ceil(p.x + reach)));
      const int y0 = std::max(0, static_cast<int>(std::floor(p.y - reach)));
      const int y1 = std::min(c.height - 1, static_cast<int>(std::ceil(p.y + reach)));
      for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) {
          const double d2 = (x - p.x) * (x - p.x) + (y - p.y) * (y - p.y);
          canvas[static_cast<std::size_t>(y) * c.width + x] +=
              contrast * c.cell_amplitude * std::exp(-d2 * inv_two_var);
        }
    }
    CounterRng noise_rng(c.seed, kNoiseStreamBase + static_cast<std::uint64_t>(t));
    GrayImage img(c.width, c.height);
    auto values = img.values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      double v = canvas[i];
      if (noise > 0.0) v += noise * noise_rng.normal();
      v = std::clamp(v, 0.0, 1.0);
      // Quantise as the PGM writer does, so in-memory and on-disk frames agree.
      values[i] = static_cast<float>(std::lround(v * 255.0)) / 255.0f;
    }
    seq.images.push_back(std::move(img));
  }
  return seq;
}

namespace io {

void write_synthetic_sequence(const std::filesystem::path& root, const SyntheticSequence& seq,
                              std::optional<int> labeled_frame) {
  for (std::size_t i = 0; i < seq.images.size(); ++i)
    write_pgm(root / "images" / (frame_stem(static_cast<int>(i) + 1) + ".pgm"), seq.images[i]);
  write_points_csv(root / "gt" / "points.csv", seq.gt_points);

  std::ofstream tracks(root / "gt" / "tracks.csv");
  require(tracks.good(), ErrorKind::Io, "cannot write " + (root / "gt" / "tracks.csv").string());
  tracks << "track_id,parent_id,frame,x,y\n";
  for (const GtTrack& g : seq.gt_tracks)
    for (int t = g.first_frame; t <= g.last_frame(); ++t) {
      const Point& p = g.positions[static_cast<std::size_t>(t - g.first_frame)];
      tracks << g.id << ',' << g.parent << ',' << t << ',' << format_number(p.x) << ','
             << format_number(p.y) << '\n';
    }

  if (labeled_frame) {
    const int l = *labeled_frame;
    require(l >= 1 && l <= static_cast<int>(seq.gt_points.size()), ErrorKind::InvalidParameter,
            "labeled frame outside the simulated sequence");
    write_label_csv(root / "labels" / (frame_stem(l) + ".csv"), seq.gt_points[l - 1]);
  }
}

}  // namespace io

namespace {

void draw_cross(RgbImage& img, const Point& p, const std::array<std::uint8_t, 3>& color) {
  const int cx = static_cast<int>(std::lround(p.x));
  const int cy = static_cast<int>(std::lround(p.y));
  for (int d = -2; d <= 2; ++d) {
    if (img.contains(cx + d, cy)) img.at(cx + d, cy) = color;
    if (img.contains(cx, cy + d)) img.at(cx, cy + d) = color;
  }
}

}  // namespace

RgbImage render_overlay(const GrayImage& image, const PointSet& detections, const PointSet& gt,
                        const Mask* mask) {
  require(mask == nullptr || image.same_shape(*mask), ErrorKind::InvalidInput,
          "overlay mask dimensions differ from the image");
  RgbImage out(image.width(), image.height());
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < image.width(); ++x) {
      const auto g = static_cast<std::uint8_t>(
          std::lround(std::clamp(image.at(x, y), 0.0f, 1.0f) * 255.0f));
      if (mask != nullptr && mask->at(x, y) == 0) {
        // 50 % blend towards pure red; green/blue halve, red rises, so every
        // tinted pixel differs from its gray original.
        out.at(x, y) = {static_cast<std::uint8_t>((g + 256) / 2), static_cast<std::uint8_t>(g / 2),
                        static_cast<std::uint8_t>(g / 2)};
      } else {
        out.at(x, y) = {g, g, g};
      }
    }
  for (const Point& p : gt.points) draw_cross(out, p, {40, 80, 255});
  for (const Point& p : detections.points) draw_cross(out, p, {0, 220, 0});
  return out;
}

}  // namespace tracklabel
