#include "tracklabel/io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace tracklabel::io {

namespace {

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorKind::Io, "cannot open for writing: " + path.string());
  return out;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorKind::Io, "cannot open: " + path.string());
  return in;
}

void put_u32(std::ostream& out, std::uint32_t v) {
  const char bytes[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                         static_cast<char>((v >> 16) & 0xff),
                         static_cast<char>((v >> 24) & 0xff)};
  out.write(bytes, 4);
}

std::uint32_t get_u32(std::istream& in, const fs::path& path) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  require(in.gcount() == 4, ErrorKind::InvalidInput, "truncated header: " + path.string());
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

struct GridHeader {
  int width;
  int height;
};

void write_header(std::ostream& out, const char magic[4], int width, int height) {
  out.write(magic, 4);
  put_u32(out, 1);
  put_u32(out, static_cast<std::uint32_t>(width));
  put_u32(out, static_cast<std::uint32_t>(height));
}

GridHeader read_header(std::istream& in, const char magic[4], const fs::path& path) {
  char got[4] = {};
  in.read(got, 4);
  require(in.gcount() == 4 && std::memcmp(got, magic, 4) == 0, ErrorKind::InvalidInput,
          "bad magic in " + path.string());
  const std::uint32_t version = get_u32(in, path);
  require(version == 1, ErrorKind::InvalidInput,
          "unsupported version " + std::to_string(version) + " in " + path.string());
  const std::uint32_t w = get_u32(in, path);
  const std::uint32_t h = get_u32(in, path);
  require(w >= 1 && h >= 1 && w <= (1u << 16) && h <= (1u << 16), ErrorKind::InvalidInput,
          "implausible dimensions in " + path.string());
  return {static_cast<int>(w), static_cast<int>(h)};
}

void expect_eof(std::istream& in, const fs::path& path) {
  in.peek();
  require(in.eof(), ErrorKind::InvalidInput, "trailing bytes in " + path.string());
}

// PNM header tokens, skipping '#' comments.
std::string pnm_token(std::istream& in) {
  std::string token;
  int c = in.get();
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = in.get();
    } else if (std::isspace(c)) {
      if (!token.empty()) return token;
    } else {
      token.push_back(static_cast<char>(c));
    }
    c = in.get();
  }
  return token;
}

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

void write_heatmap(const fs::path& path, const Heatmap& heatmap) {
  auto out = open_out(path);
  write_header(out, "HMAP", heatmap.width(), heatmap.height());
  for (float v : heatmap.values()) put_u32(out, std::bit_cast<std::uint32_t>(v));
  require(out.good(), ErrorKind::Io, "write failed: " + path.string());
}

Heatmap read_heatmap(const fs::path& path) {
  auto in = open_in(path);
  const auto [w, h] = read_header(in, "HMAP", path);
  std::vector<float> values(static_cast<std::size_t>(w) * h);
  for (float& v : values) {
    v = std::bit_cast<float>(get_u32(in, path));
    require(std::isfinite(v), ErrorKind::InvalidInput, "non-finite value in " + path.string());
  }
  expect_eof(in, path);
  return Heatmap(w, h, std::move(values));
}

void write_mask(const fs::path& path, const Mask& mask) {
  auto out = open_out(path);
  write_header(out, "MASK", mask.width(), mask.height());
  out.write(reinterpret_cast<const char*>(mask.values().data()),
            static_cast<std::streamsize>(mask.size()));
  require(out.good(), ErrorKind::Io, "write failed: " + path.string());
}

Mask read_mask(const fs::path& path) {
  auto in = open_in(path);
  const auto [w, h] = read_header(in, "MASK", path);
  std::vector<std::uint8_t> bits(static_cast<std::size_t>(w) * h);
  in.read(reinterpret_cast<char*>(bits.data()), static_cast<std::streamsize>(bits.size()));
  require(static_cast<std::size_t>(in.gcount()) == bits.size(), ErrorKind::InvalidInput,
          "truncated mask payload: " + path.string());
  require(std::all_of(bits.begin(), bits.end(), [](auto b) { return b <= 1; }),
          ErrorKind::InvalidInput, "mask values must be 0 or 1: " + path.string());
  expect_eof(in, path);
  return Mask(w, h, std::move(bits));
}

std::string format_number(double value) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, end);
}

double parse_number(std::string_view text) {
  const std::string t = trim(text);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  require(ec == std::errc() && ptr == t.data() + t.size() && !t.empty(),
          ErrorKind::InvalidInput, "not a number: '" + t + "'");
  return v;
}

int parse_int(std::string_view text) {
  const std::string t = trim(text);
  int v = 0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  require(ec == std::errc() && ptr == t.data() + t.size() && !t.empty(),
          ErrorKind::InvalidInput, "not an integer: '" + t + "'");
  return v;
}

std::vector<std::string> split_csv(std::string_view line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    fields.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

Sequence read_points_csv(const fs::path& path, int frames) {
  auto in = open_in(path);
  std::string line;
  std::getline(in, line);
  require(trim(line) == "frame,x,y", ErrorKind::InvalidInput,
          "expected header 'frame,x,y' in " + path.string());
  std::map<int, PointSet> by_frame;
  int max_frame = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto f = split_csv(line);
    require(f.size() == 3, ErrorKind::InvalidInput, "bad row in " + path.string() + ": " + line);
    const int frame = parse_int(f[0]);
    require(frame >= 1, ErrorKind::InvalidInput, "frame numbers start at 1: " + path.string());
    auto& set = by_frame[frame];
    set.frame = frame;
    set.points.push_back({parse_number(f[1]), parse_number(f[2])});
    max_frame = std::max(max_frame, frame);
  }
  const int count = frames > 0 ? frames : max_frame;
  require(max_frame <= count, ErrorKind::InvalidInput,
          "frame " + std::to_string(max_frame) + " beyond sequence length in " + path.string());
  Sequence seq(static_cast<std::size_t>(count));
  for (int t = 1; t <= count; ++t) seq[t - 1].frame = t;
  for (auto& [frame, set] : by_frame) seq[frame - 1] = std::move(set);
  return seq;
}

void write_points_csv(const fs::path& path, const Sequence& sequence) {
  auto out = open_out(path);
  out << "frame,x,y\n";
  for (const PointSet& set : sequence)
    for (const Point& p : set.points)
      out << set.frame << ',' << format_number(p.x) << ',' << format_number(p.y) << '\n';
}

PointSet read_label_csv(const fs::path& path, int frame) {
  auto in = open_in(path);
  std::string line;
  std::getline(in, line);
  require(trim(line) == "x,y", ErrorKind::InvalidInput,
          "expected header 'x,y' in " + path.string());
  PointSet set;
  set.frame = frame;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto f = split_csv(line);
    require(f.size() == 2, ErrorKind::InvalidInput, "bad row in " + path.string() + ": " + line);
    set.points.push_back({parse_number(f[0]), parse_number(f[1])});
  }
  return set;
}

void write_label_csv(const fs::path& path, const PointSet& points) {
  auto out = open_out(path);
  out << "x,y\n";
  for (const Point& p : points.points)
    out << format_number(p.x) << ',' << format_number(p.y) << '\n';
}

GrayImage read_pgm(const fs::path& path) {
  auto in = open_in(path);
  const std::string magic = pnm_token(in);
  require(magic == "P5" || magic == "P2", ErrorKind::InvalidInput,
          "not a PGM file: " + path.string());
  const int w = parse_int(pnm_token(in));
  const int h = parse_int(pnm_token(in));
  const int maxval = parse_int(pnm_token(in));
  require(w >= 1 && h >= 1 && maxval >= 1 && maxval <= 65535, ErrorKind::InvalidInput,
          "bad PGM header: " + path.string());
  GrayImage img(w, h);
  auto values = img.values();
  const auto level = static_cast<float>(maxval);
  if (magic == "P2") {
    for (float& v : values) v = static_cast<float>(parse_int(pnm_token(in))) / level;
    return img;
  }
  const bool wide = maxval > 255;
  std::vector<unsigned char> raw(values.size() * (wide ? 2 : 1));
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  require(static_cast<std::size_t>(in.gcount()) == raw.size(), ErrorKind::InvalidInput,
          "truncated PGM: " + path.string());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const int s = wide ? (raw[2 * i] << 8) | raw[2 * i + 1] : raw[i];
    values[i] = std::min(1.0f, static_cast<float>(s) / level);
  }
  return img;
}

void write_pgm(const fs::path& path, const GrayImage& image) {
  auto out = open_out(path);
  out << "P5\n" << image.width() << ' ' << image.height() << "\n255\n";
  std::vector<unsigned char> raw(image.size());
  const auto values = image.values();
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const float v = std::clamp(values[i], 0.0f, 1.0f);
    raw[i] = static_cast<unsigned char>(std::lround(v * 255.0f));
  }
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  require(out.good(), ErrorKind::Io, "write failed: " + path.string());
}

GrayImage read_png(const fs::path& path) {
  png_image png;
  std::memset(&png, 0, sizeof png);
  png.version = PNG_IMAGE_VERSION;
  require(png_image_begin_read_from_file(&png, path.c_str()) != 0, ErrorKind::InvalidInput,
          "cannot read PNG " + path.string() + ": " + png.message);
  png.format = PNG_FORMAT_GRAY;
  std::vector<png_byte> buffer(PNG_IMAGE_SIZE(png));
  if (png_image_finish_read(&png, nullptr, buffer.data(), 0, nullptr) == 0) {
    const std::string message = png.message;
    png_image_free(&png);
    fail(ErrorKind::InvalidInput, "cannot decode PNG " + path.string() + ": " + message);
  }
  GrayImage img(static_cast<int>(png.width), static_cast<int>(png.height));
  auto values = img.values();
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = buffer[i] / 255.0f;
  return img;
}

GrayImage read_image(const fs::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".png") return read_png(path);
  if (ext == ".pgm") return read_pgm(path);
  fail(ErrorKind::InvalidInput, "unsupported image type: " + path.string());
}

void write_ppm(const fs::path& path, const RgbImage& image) {
  auto out = open_out(path);
  out << "P6\n" << image.width() << ' ' << image.height() << "\n255\n";
  for (const auto& px : image.values()) out.write(reinterpret_cast<const char*>(px.data()), 3);
  require(out.good(), ErrorKind::Io, "write failed: " + path.string());
}

RgbImage read_ppm(const fs::path& path) {
  auto in = open_in(path);
  require(pnm_token(in) == "P6", ErrorKind::InvalidInput, "not a P6 PPM: " + path.string());
  const int w = parse_int(pnm_token(in));
  const int h = parse_int(pnm_token(in));
  require(parse_int(pnm_token(in)) == 255, ErrorKind::InvalidInput,
          "only 8-bit PPM supported: " + path.string());
  RgbImage img(w, h);
  for (auto& px : img.values()) {
    in.read(reinterpret_cast<char*>(px.data()), 3);
    require(in.gcount() == 3, ErrorKind::InvalidInput, "truncated PPM: " + path.string());
  }
  return img;
}

}  // namespace tracklabel::io
