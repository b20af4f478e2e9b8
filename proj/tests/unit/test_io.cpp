#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include <png.h>

#include "tracklabel/config.hpp"
#include "tracklabel/error.hpp"
#include "tracklabel/heatmap.hpp"
#include "tracklabel/io.hpp"

using namespace tracklabel;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("tracklabel_io_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write_bytes(const fs::path& p, const std::string& bytes) {
  std::ofstream(p, std::ios::binary) << bytes;
}

ErrorKind kind_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::Usage;
}

}  // namespace

TEST_SUITE("io") {

TEST_CASE("heatmap and mask files round-trip exactly") {
  const fs::path dir = scratch("hmap");
  Heatmap h(17, 9);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<float> u(-2.0f, 2.0f);
  for (float& v : h.values()) v = u(rng);
  h.at(0, 0) = 1e-38f;
  io::write_heatmap(dir / "a.hmap", h);
  CHECK(io::read_heatmap(dir / "a.hmap") == h);
  CHECK(fs::file_size(dir / "a.hmap") == 16 + 17 * 9 * 4);

  Mask m(5, 3, 1);
  m.at(2, 1) = 0;
  io::write_mask(dir / "a.mask", m);
  CHECK(io::read_mask(dir / "a.mask") == m);
  fs::remove_all(dir);
}

TEST_CASE("heatmap header is little-endian HMAP v1") {
  const fs::path dir = scratch("hdr");
  Heatmap h(2, 1);
  h.at(0, 0) = 1.0f;
  io::write_heatmap(dir / "h.hmap", h);
  std::ifstream in(dir / "h.hmap", std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), {});
  CHECK(bytes.substr(0, 4) == "HMAP");
  CHECK(bytes.substr(4, 4) == std::string("\x01\0\0\0", 4));
  CHECK(bytes.substr(8, 4) == std::string("\x02\0\0\0", 4));
  CHECK(bytes.substr(12, 4) == std::string("\x01\0\0\0", 4));
  CHECK(bytes.substr(16, 4) == std::string("\0\0\x80\x3f", 4));
  fs::remove_all(dir);
}

TEST_CASE("corrupt binary files are rejected") {
  const fs::path dir = scratch("corrupt");
  write_bytes(dir / "magic.hmap", std::string("HMAX\1\0\0\0\1\0\0\0\1\0\0\0\0\0\0\0", 20));
  write_bytes(dir / "short.hmap", std::string("HMAP\1\0\0\0\2\0\0\0\2\0\0\0\0\0", 18));
  write_bytes(dir / "version.hmap", std::string("HMAP\2\0\0\0\1\0\0\0\1\0\0\0\0\0\0\0", 20));
  write_bytes(dir / "nan.hmap", std::string("HMAP\1\0\0\0\1\0\0\0\1\0\0\0\0\0\xc0\x7f", 20));
  write_bytes(dir / "value.mask", std::string("MASK\1\0\0\0\1\0\0\0\1\0\0\0\2", 17));
  write_bytes(dir / "trail.mask", std::string("MASK\1\0\0\0\1\0\0\0\1\0\0\0\1\1", 18));
  for (const char* name : {"magic.hmap", "short.hmap", "version.hmap", "nan.hmap"})
    CHECK(kind_of([&] { io::read_heatmap(dir / name); }) == ErrorKind::InvalidInput);
  for (const char* name : {"value.mask", "trail.mask"})
    CHECK(kind_of([&] { io::read_mask(dir / name); }) == ErrorKind::InvalidInput);
  CHECK(kind_of([&] { io::read_heatmap(dir / "missing.hmap"); }) == ErrorKind::Io);
  fs::remove_all(dir);
}

TEST_CASE("numbers print shortest and parse back exactly") {
  for (double v : {0.0, 1.0, 0.1, 1.0 / 3.0, 123456.789, -2.5e-7}) CHECK(io::parse_number(io::format_number(v)) == v);
  CHECK(io::format_number(0.5) == "0.5");
  CHECK(io::format_number(3.0) == "3");
  CHECK_THROWS_AS(io::parse_number("1.0x"), Error);
  CHECK_THROWS_AS(io::parse_int("2.5"), Error);
}

TEST_CASE("point CSV round-trip with empty frames") {
  const fs::path dir = scratch("csv");
  Sequence s(4);
  for (int i = 0; i < 4; ++i) s[i].frame = i + 1;
  s[0].points = {{1.5, 2.25}, {3, 4}};
  s[2].points = {{0.1, 0.2}};
  io::write_points_csv(dir / "p.csv", s);
  CHECK(io::read_points_csv(dir / "p.csv", 4) == s);
  CHECK(io::read_points_csv(dir / "p.csv").size() == 3);

  write_bytes(dir / "bad.csv", "frame,x,y\n1,2\n");
  CHECK(kind_of([&] { io::read_points_csv(dir / "bad.csv"); }) == ErrorKind::InvalidInput);
  write_bytes(dir / "header.csv", "f,x,y\n");
  CHECK(kind_of([&] { io::read_points_csv(dir / "header.csv"); }) == ErrorKind::InvalidInput);
  write_bytes(dir / "range.csv", "frame,x,y\n5,1,1\n");
  CHECK(kind_of([&] { io::read_points_csv(dir / "range.csv", 3); }) == ErrorKind::InvalidInput);

  PointSet l;
  l.frame = 7;
  l.points = {{4, 5}};
  io::write_label_csv(dir / "l.csv", l);
  CHECK(io::read_label_csv(dir / "l.csv", 7) == l);
  fs::remove_all(dir);
}

TEST_CASE("PGM binary, ASCII and 16-bit inputs") {
  const fs::path dir = scratch("pgm");
  GrayImage img(3, 2);
  const float levels[] = {0.0f, 1.0f, 128.0f / 255, 64.0f / 255, 1.0f / 255, 254.0f / 255};
  for (int i = 0; i < 6; ++i) img.values()[i] = levels[i];
  io::write_pgm(dir / "a.pgm", img);
  CHECK(io::read_pgm(dir / "a.pgm") == img);

  write_bytes(dir / "ascii.pgm", "P2\n# comment\n2 2\n255\n0 255\n51 102\n");
  const GrayImage a = io::read_pgm(dir / "ascii.pgm");
  CHECK(a.at(1, 0) == 1.0f);
  CHECK(a.at(0, 1) == doctest::Approx(0.2));

  write_bytes(dir / "wide.pgm", std::string("P5\n2 1\n65535\n\xff\xff\x80\x00", 18));
  const GrayImage w = io::read_pgm(dir / "wide.pgm");
  CHECK(w.at(0, 0) == 1.0f);
  CHECK(w.at(1, 0) == doctest::Approx(32768.0 / 65535.0));

  write_bytes(dir / "trunc.pgm", "P5\n4 4\n255\n\x01\x02");
  CHECK(kind_of([&] { io::read_pgm(dir / "trunc.pgm"); }) == ErrorKind::InvalidInput);
  write_bytes(dir / "p6.pgm", "P6\n1 1\n255\n\x01\x02\x03");
  CHECK(kind_of([&] { io::read_pgm(dir / "p6.pgm"); }) == ErrorKind::InvalidInput);
  fs::remove_all(dir);
}

TEST_CASE("PNG input through libpng") {
  const fs::path dir = scratch("png");
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = 3;
  image.height = 2;
  image.format = PNG_FORMAT_GRAY;
  const unsigned char pixels[] = {0, 51, 255, 10, 20, 30};
  REQUIRE(png_image_write_to_file(&image, (dir / "g.png").c_str(), 0, pixels, 0, nullptr) != 0);
  const GrayImage g = io::read_image(dir / "g.png");
  REQUIRE(g.width() == 3);
  CHECK(g.at(1, 0) == doctest::Approx(0.2));
  CHECK(g.at(2, 0) == 1.0f);
  CHECK(g.at(2, 1) == doctest::Approx(30.0 / 255));
  CHECK(kind_of([&] { io::read_image(dir / "g.tif"); }) == ErrorKind::InvalidInput);
  fs::remove_all(dir);
}

TEST_CASE("PPM round-trip") {
  const fs::path dir = scratch("ppm");
  RgbImage img(4, 3);
  img.at(1, 2) = {1, 2, 3};
  io::write_ppm(dir / "a.ppm", img);
  CHECK(io::read_ppm(dir / "a.ppm") == img);
  fs::remove_all(dir);
}

}  // TEST_SUITE

TEST_SUITE("config") {

TEST_CASE("defaults and derived values") {
  const PipelineConfig c;
  CHECK(c.alpha == 0.8);
  CHECK(c.beta == 18.0);
  CHECK(c.gamma == 3);
  CHECK(c.resolved_sigma() == 6.0);
  CHECK(c.resolved_gate() == 18.0);
  CHECK(c.resolved_min_separation() == 9.0);
  CHECK(c.resolved_eval_gate() == 18.0);
  CHECK(c.resolved_template_radius() == 9);
}

TEST_CASE("config file parsing, comments and overrides") {
  const fs::path dir = scratch("cfg");
  write_bytes(dir / "c.cfg",
              "# run settings\n"
              "data_root = data  # trailing comment\n"
              "labeled_frame=20\n"
              "\n"
              "beta = 12\n"
              "sim_frames = 60\n"
              "sigma = 3.5\n");
  const PipelineConfig c = read_config(dir / "c.cfg");
  CHECK(c.data_root == "data");
  CHECK(c.labeled_frame == 20);
  CHECK(c.beta == 12.0);
  CHECK(c.resolved_sigma() == 3.5);
  CHECK(c.resolved_gate() == 12.0);

  write_bytes(dir / "bad.cfg", "beta 12\n");
  CHECK(kind_of([&] { read_config(dir / "bad.cfg"); }) == ErrorKind::Usage);
  PipelineConfig d;
  CHECK(kind_of([&] { apply_setting(d, "betta", "1"); }) == ErrorKind::Usage);
  CHECK(kind_of([&] { apply_setting(d, "gamma", "three"); }) == ErrorKind::Usage);
  CHECK(kind_of([&] { apply_setting(d, "log", "maybe"); }) == ErrorKind::Usage);
  fs::remove_all(dir);
}

TEST_CASE("validation ranges") {
  PipelineConfig c;
  c.alpha = 0.0;
  CHECK(kind_of([&] { validate(c); }) == ErrorKind::InvalidParameter);
  c = {};
  c.alpha = 1.0;
  CHECK_NOTHROW(validate(c));
  c.gamma = 0;
  CHECK(kind_of([&] { validate(c); }) == ErrorKind::InvalidParameter);
  c = {};
  c.detector = "cnn";
  CHECK(kind_of([&] { validate(c); }) == ErrorKind::InvalidParameter);
  c = {};
  c.detector = "external";
  CHECK(kind_of([&] { validate(c); }) == ErrorKind::InvalidParameter);
}

TEST_CASE("config text round-trips through the parser") {
  const fs::path dir = scratch("cfgtext");
  PipelineConfig c;
  c.data_root = "/data/x";
  c.labeled_frame = 7;
  c.beta = 27;
  c.gate = 20;
  c.seed = 12345678901234ULL;
  std::ofstream(dir / "c.cfg") << to_config_text(c);
  const PipelineConfig back = read_config(dir / "c.cfg");
  CHECK(to_config_text(back) == to_config_text(c));
  CHECK(back.seed == c.seed);
  fs::remove_all(dir);
}

}  // TEST_SUITE
