#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tracklabel/grid.hpp"
#include "tracklabel/types.hpp"

namespace tracklabel {

struct RgbTag {};
/// 8-bit RGB triples, used only for rendered overlays and plots.
using RgbImage = Grid<std::array<std::uint8_t, 3>, RgbTag>;

namespace io {

namespace fs = std::filesystem;

// HMAP v1: "HMAP", u32 version, u32 width, u32 height, f32[width*height] (LE).
void write_heatmap(const fs::path& path, const Heatmap& heatmap);
Heatmap read_heatmap(const fs::path& path);

// MASK v1: same header with magic "MASK" and a u8 payload.
void write_mask(const fs::path& path, const Mask& mask);
Mask read_mask(const fs::path& path);

/// Shortest decimal text that parses back to the same double.
std::string format_number(double value);
double parse_number(std::string_view text);
int parse_int(std::string_view text);

/// Splits a CSV line on commas. Fields are not quoted anywhere in our formats.
std::vector<std::string> split_csv(std::string_view line);

/// "frame,x,y" rows, grouped by frame. Frames absent from the file are
/// returned empty when `frames` is given, and the result has exactly that many
/// entries.
Sequence read_points_csv(const fs::path& path, int frames = 0);
void write_points_csv(const fs::path& path, const Sequence& sequence);

/// "x,y" rows of a single annotated frame.
PointSet read_label_csv(const fs::path& path, int frame);
void write_label_csv(const fs::path& path, const PointSet& points);

/// Binary (P5) or ASCII (P2) PGM; 8- or 16-bit. Intensities scaled to [0, 1].
GrayImage read_pgm(const fs::path& path);
/// Writes 8-bit P5 with round-to-nearest quantisation.
void write_pgm(const fs::path& path, const GrayImage& image);
/// 8-bit grayscale PNG through libpng; colour input is converted to gray.
GrayImage read_png(const fs::path& path);
/// Dispatches on extension (.pgm or .png).
GrayImage read_image(const fs::path& path);

void write_ppm(const fs::path& path, const RgbImage& image);
RgbImage read_ppm(const fs::path& path);

}  // namespace io
}  // namespace tracklabel
