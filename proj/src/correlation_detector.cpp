#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "tracklabel/detector.hpp"
#include "tracklabel/error.hpp"
#include "tracklabel/heatmap.hpp"

namespace tracklabel {

namespace {

int reflect_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

// Image padded by `pad` on every side with reflect-101 borders.
struct Padded {
  int width;
  int height;
  std::vector<float> values;

  float at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
};

Padded pad_image(const GrayImage& img, int pad) {
  Padded p{img.width() + 2 * pad, img.height() + 2 * pad, {}};
  p.values.resize(static_cast<std::size_t>(p.width) * p.height);
  for (int y = 0; y < p.height; ++y) {
    const int sy = reflect_index(y - pad, img.height());
    for (int x = 0; x < p.width; ++x)
      p.values[static_cast<std::size_t>(y) * p.width + x] =
          img.at(reflect_index(x - pad, img.width()), sy);
  }
  return p;
}

// Rescales to zero mean and unit variance in place; false for a flat window.
bool standardise(std::vector<double>& w) {
  const double n = static_cast<double>(w.size());
  const double mean = std::accumulate(w.begin(), w.end(), 0.0) / n;
  double var = 0.0;
  for (double v : w) var += (v - mean) * (v - mean);
  var /= n;
  if (var <= 1e-12) return false;
  const double inv = 1.0 / std::sqrt(var);
  for (double& v : w) v = (v - mean) * inv;
  return true;
}

float map_response(float r, double threshold) {
  const auto c = static_cast<float>(threshold);
  return std::clamp((r - c) / (1.0f - c), 0.0f, 1.0f);
}

double loss_at_threshold(std::span<const Heatmap> responses, std::span<const TrainingSample> data,
                     double threshold) {
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto r = responses[i].values();
    const auto t = data[i].target->values();
    const auto m = data[i].mask->values();
    double sum = 0.0;
    std::size_t valid = 0;
    for (std::size_t k = 0; k < r.size(); ++k) {
      if (m[k] == 0) continue;
      const double d = static_cast<double>(t[k]) - static_cast<double>(map_response(r[k], threshold));
      sum += d * d;
      ++valid;
    }
    require(valid > 0, ErrorKind::FullyMasked,
            "training frame " + std::to_string(data[i].frame) + " is fully masked");
    total += sum / static_cast<double>(valid);
  }
  return total / static_cast<double>(data.size());
}

std::vector<Heatmap> responses_for(const CorrelationModel& model,
                                   std::span<const TrainingSample> data) {
  std::vector<Heatmap> out;
  out.reserve(data.size());
  for (const auto& s : data) out.push_back(correlation_response(model, *s.image));
  return out;
}

void validate_samples(std::span<const TrainingSample> data) {
  require(!data.empty(), ErrorKind::InvalidInput, "fit needs at least one training frame");
  for (const auto& s : data) {
    require(s.image && s.target && s.mask, ErrorKind::InvalidInput, "incomplete training sample");
    require(s.image->same_shape(*s.target) && s.image->same_shape(*s.mask),
            ErrorKind::InvalidInput,
            "training frame " + std::to_string(s.frame) + " has mismatched dimensions");
    require(count_valid(*s.mask) > 0, ErrorKind::FullyMasked,
            "training frame " + std::to_string(s.frame) + " is fully masked");
  }
}

}  // namespace

CorrelationModel initial_correlation_model(int radius) {
  require(radius >= 1, ErrorKind::InvalidParameter, "template radius must be >= 1");
  CorrelationModel m;
  m.radius = radius;
  const int side = m.side();
  const double sd = radius / 2.5;
  std::vector<double> w(static_cast<std::size_t>(side) * side);
  for (int y = 0; y < side; ++y)
    for (int x = 0; x < side; ++x) {
      const double dx = x - radius, dy = y - radius;
      w[static_cast<std::size_t>(y) * side + x] = std::exp(-(dx * dx + dy * dy) / (2 * sd * sd));
    }
  standardise(w);
  m.kernel.assign(w.begin(), w.end());
  return m;
}

Heatmap correlation_response(const CorrelationModel& model, const GrayImage& image) {
  const int r = model.radius;
  const int side = model.side();
  require(model.kernel.size() == static_cast<std::size_t>(side) * side,
          ErrorKind::InvalidInput, "template size does not match its radius");
  const Padded p = pad_image(image, r);
  const int w = image.width();
  const int h = image.height();

  // Integral images of the padded frame for window mean and variance.
  const int iw = p.width + 1;
  std::vector<double> s1(static_cast<std::size_t>(iw) * (p.height + 1), 0.0);
  std::vector<double> s2(s1.size(), 0.0);
  for (int y = 0; y < p.height; ++y) {
    double row1 = 0.0, row2 = 0.0;
    for (int x = 0; x < p.width; ++x) {
      const double v = p.at(x, y);
      row1 += v;
      row2 += v * v;
      const std::size_t i = static_cast<std::size_t>(y + 1) * iw + (x + 1);
      s1[i] = s1[i - iw] + row1;
      s2[i] = s2[i - iw] + row2;
    }
  }
  auto box = [&](const std::vector<double>& s, int x, int y) {
    const std::size_t a = static_cast<std::size_t>(y) * iw + x;
    const std::size_t b = static_cast<std::size_t>(y + side) * iw + x;
    return s[b + side] - s[b] - s[a + side] + s[a];
  };

  const double n = static_cast<double>(side) * side;
  Heatmap out(w, h, 0.0f);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double mean = box(s1, x, y) / n;
      const double var = box(s2, x, y) / n - mean * mean;
      if (var <= 1e-10) continue;
      double acc = 0.0;
      for (int ky = 0; ky < side; ++ky) {
        const float* row = &p.values[static_cast<std::size_t>(y + ky) * p.width + x];
        const float* k = &model.kernel[static_cast<std::size_t>(ky) * side];
        float part = 0.0f;
        for (int kx = 0; kx < side; ++kx) part += k[kx] * row[kx];
        acc += part;
      }
      out.at(x, y) = static_cast<float>(std::clamp(acc / (n * std::sqrt(var)), -1.0, 1.0));
    }
  }
  return out;
}

Heatmap response_to_heatmap(const Heatmap& response, double threshold) {
  require(threshold >= 0.0 && threshold < 1.0, ErrorKind::InvalidParameter,
          "response threshold must lie in [0, 1)");
  Heatmap out(response.width(), response.height());
  const auto in = response.values();
  auto dst = out.values();
  for (std::size_t i = 0; i < in.size(); ++i) dst[i] = map_response(in[i], threshold);
  return out;
}

Heatmap predict(const CorrelationModel& model, const GrayImage& image) {
  return response_to_heatmap(correlation_response(model, image), model.threshold);
}

CorrelationModel fit(const CorrelationModel& model, std::span<const TrainingSample> data,
                     const CorrelationFitOptions& options) {
  validate_samples(data);
  require(options.threshold_step > 0.0 && options.threshold_min >= 0.0 &&
              options.threshold_max >= options.threshold_min && options.threshold_max < 1.0,
          ErrorKind::InvalidParameter, "invalid response threshold search range");

  // Template from windows around the reliable positive peaks of each target.
  const int r = model.radius;
  const int side = model.side();
  std::vector<double> sum(static_cast<std::size_t>(side) * side, 0.0);
  std::size_t windows = 0;
  std::vector<double> window(sum.size());
  for (const auto& s : data) {
    Heatmap masked = *s.target;
    auto mv = masked.values();
    const auto mk = s.mask->values();
    for (std::size_t i = 0; i < mv.size(); ++i)
      if (mk[i] == 0) mv[i] = 0.0f;
    const PointSet peaks = detect_peaks(masked, 0.5, 1.0, s.frame);
    if (peaks.empty()) continue;
    const Padded p = pad_image(*s.image, r);
    for (const Point& c : peaks.points) {
      const int cx = static_cast<int>(c.x), cy = static_cast<int>(c.y);
      if (s.mask->at(cx, cy) == 0) continue;
      for (int ky = 0; ky < side; ++ky)
        for (int kx = 0; kx < side; ++kx)
          window[static_cast<std::size_t>(ky) * side + kx] = p.at(cx + kx, cy + ky);
      if (!standardise(window)) continue;
      for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += window[i];
      ++windows;
    }
  }

  const auto old_responses = responses_for(model, data);
  CorrelationModel best = model;
  double best_loss = loss_at_threshold(old_responses, data, model.threshold);

  auto search = [&](const CorrelationModel& base, std::span<const Heatmap> responses) {
    CorrelationModel candidate = base;
    double candidate_loss = std::numeric_limits<double>::infinity();
    const int steps =
        static_cast<int>(std::floor((options.threshold_max - options.threshold_min) / options.threshold_step + 1e-9));
    for (int k = 0; k <= steps; ++k) {
      const double threshold = options.threshold_min + k * options.threshold_step;
      const double loss = loss_at_threshold(responses, data, threshold);
      if (loss < candidate_loss) {
        candidate_loss = loss;
        candidate.threshold = threshold;
      }
    }
    if (candidate_loss < best_loss) {
      best_loss = candidate_loss;
      best = candidate;
    }
  };

  search(model, old_responses);
  if (windows > 0 && standardise(sum)) {
    CorrelationModel fresh = model;
    fresh.kernel.assign(sum.begin(), sum.end());
    search(fresh, responses_for(fresh, data));
  }
  best.version = model.version + 1;
  return best;
}

Heatmap CorrelationDetector::predict(const GrayImage& image) const {
  return tracklabel::predict(model_, image);
}

void CorrelationDetector::fit(std::span<const TrainingSample> data) {
  model_ = tracklabel::fit(model_, data, options_);
}

std::filesystem::path CorrelationDetector::save(const std::filesystem::path& stem) const {
  auto path = stem;
  path += ".tmpl";
  io::write_correlation_model(path, model_);
  return path;
}

namespace io {

namespace {

void put_bytes(std::ostream& out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_bytes(std::istream& in, int bytes, const std::filesystem::path& path) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) {
    const int c = in.get();
    require(c != EOF, ErrorKind::InvalidInput, "truncated model file: " + path.string());
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
  }
  return v;
}

}  // namespace

void write_correlation_model(const std::filesystem::path& path, const CorrelationModel& model) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorKind::Io, "cannot open for writing: " + path.string());
  out.write("TMPL", 4);
  put_bytes(out, 1, 4);
  put_bytes(out, static_cast<std::uint32_t>(model.radius), 4);
  put_bytes(out, static_cast<std::uint32_t>(model.version), 4);
  put_bytes(out, std::bit_cast<std::uint64_t>(model.threshold), 8);
  for (float k : model.kernel) put_bytes(out, std::bit_cast<std::uint32_t>(k), 4);
  require(out.good(), ErrorKind::Io, "write failed: " + path.string());
}

CorrelationModel read_correlation_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorKind::Io, "cannot open: " + path.string());
  char magic[4] = {};
  in.read(magic, 4);
  require(in.gcount() == 4 && std::memcmp(magic, "TMPL", 4) == 0, ErrorKind::InvalidInput,
          "not a template model: " + path.string());
  require(get_bytes(in, 4, path) == 1, ErrorKind::InvalidInput,
          "unsupported model version in " + path.string());
  CorrelationModel m;
  m.radius = static_cast<int>(get_bytes(in, 4, path));
  require(m.radius >= 1 && m.radius <= 256, ErrorKind::InvalidInput,
          "implausible template radius in " + path.string());
  m.version = static_cast<int>(get_bytes(in, 4, path));
  m.threshold = std::bit_cast<double>(get_bytes(in, 8, path));
  require(m.threshold >= 0.0 && m.threshold < 1.0, ErrorKind::InvalidInput,
          "invalid response threshold in " + path.string());
  m.kernel.resize(static_cast<std::size_t>(m.side()) * m.side());
  for (float& k : m.kernel) k = std::bit_cast<float>(static_cast<std::uint32_t>(get_bytes(in, 4, path)));
  in.peek();
  require(in.eof(), ErrorKind::InvalidInput, "trailing bytes in " + path.string());
  return m;
}

}  // namespace io

}  // namespace tracklabel
