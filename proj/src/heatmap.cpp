#include "tracklabel/heatmap.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace tracklabel {

namespace {

// exp(-d^2 / 2s^2) < 1e-9 beyond this many sigmas; such pixels stay 0.
constexpr double kSupportSigmas = 6.5;

struct Candidate {
  float value;
  int x;
  int y;
};

// Total order used for peak finding: higher value first, then smaller (y, x).
bool stronger(float va, int xa, int ya, float vb, int xb, int yb) {
  if (va != vb) return va > vb;
  if (ya != yb) return ya < yb;
  return xa < xb;
}

}  // namespace

Heatmap encode_heatmap(const PointSet& points, int width, int height, double sigma) {
  require(sigma > 0.0 && std::isfinite(sigma), ErrorKind::InvalidParameter,
          "sigma must be positive, got " + std::to_string(sigma));
  Heatmap out(width, height, 0.0f);
  for (const Point& c : points.points) {
    require(std::isfinite(c.x) && std::isfinite(c.y) && c.x >= 0.0 && c.y >= 0.0 &&
                c.x < width && c.y < height,
            ErrorKind::InvalidInput,
            "point (" + std::to_string(c.x) + ", " + std::to_string(c.y) +
                ") outside " + std::to_string(width) + "x" + std::to_string(height));
  }

  const double reach = kSupportSigmas * sigma;
  const double inv_two_var = 1.0 / (2.0 * sigma * sigma);
  for (const Point& c : points.points) {
    const int x0 = std::max(0, static_cast<int>(std::floor(c.x - reach)));
    const int x1 = std::min(width - 1, static_cast<int>(std::ceil(c.x + reach)));
    const int y0 = std::max(0, static_cast<int>(std::floor(c.y - reach)));
    const int y1 = std::min(height - 1, static_cast<int>(std::ceil(c.y + reach)));
    for (int y = y0; y <= y1; ++y) {
      const double dy = y - c.y;
      for (int x = x0; x <= x1; ++x) {
        const double dx = x - c.x;
        const auto v = static_cast<float>(std::exp(-(dx * dx + dy * dy) * inv_two_var));
        float& cell = out.at(x, y);
        cell = std::max(cell, v);
      }
    }
  }
  return out;
}

PointSet detect_peaks(const Heatmap& h, double peak_threshold, double min_separation,
                      int frame) {
  std::vector<Candidate> candidates;
  const int w = h.width();
  const int ht = h.height();
  for (int y = 0; y < ht; ++y) {
    for (int x = 0; x < w; ++x) {
      const float v = h.at(x, y);
      if (!(v >= peak_threshold)) continue;
      bool is_max = true;
      for (int dy = -1; dy <= 1 && is_max; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if (dx == 0 && dy == 0) continue;
          const int nx = x + dx;
          const int ny = y + dy;
          if (!h.contains(nx, ny)) continue;
          if (!stronger(v, x, y, h.at(nx, ny), nx, ny)) {
            is_max = false;
            break;
          }
        }
      }
      if (is_max) candidates.push_back({v, x, y});
    }
  }

  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    return stronger(a.value, a.x, a.y, b.value, b.x, b.y);
  });

  PointSet out;
  out.frame = frame;
  const double sep2 = min_separation * min_separation;
  for (const Candidate& c : candidates) {
    const bool suppressed =
        std::any_of(out.points.begin(), out.points.end(), [&](const Point& kept) {
          const double dx = kept.x - c.x;
          const double dy = kept.y - c.y;
          return dx * dx + dy * dy <= sep2;
        });
    if (!suppressed) out.points.push_back({static_cast<double>(c.x), static_cast<double>(c.y)});
  }
  std::sort(out.points.begin(), out.points.end(), raster_less);
  return out;
}

double masked_mse(const Heatmap& pred, const Heatmap& target, const Mask& mask) {
  require(pred.same_shape(target) && pred.same_shape(mask), ErrorKind::InvalidInput,
          "masked_mse: prediction, target and mask must share dimensions");
  const auto p = pred.values();
  const auto t = target.values();
  const auto m = mask.values();
  double sum = 0.0;
  std::size_t valid = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (m[i] == 0) continue;
    const double d = static_cast<double>(t[i]) - static_cast<double>(p[i]);
    sum += d * d;
    ++valid;
  }
  require(valid > 0, ErrorKind::FullyMasked, "masked_mse: mask has no valid pixel");
  return sum / static_cast<double>(valid);
}

double mse(const Heatmap& pred, const Heatmap& target) {
  require(pred.same_shape(target), ErrorKind::InvalidInput,
          "mse: prediction and target must share dimensions");
  const auto p = pred.values();
  const auto t = target.values();
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d = static_cast<double>(t[i]) - static_cast<double>(p[i]);
    sum += d * d;
  }
  return sum / static_cast<double>(p.size());
}

Mask all_ones_mask(int width, int height) { return Mask(width, height, 1); }

std::size_t count_valid(const Mask& mask) {
  const auto m = mask.values();
  return static_cast<std::size_t>(std::count_if(m.begin(), m.end(), [](auto v) { return v != 0; }));
}

}  // namespace tracklabel
