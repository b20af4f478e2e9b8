#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tracklabel/error.hpp"

namespace tracklabel {

/// Row-major 2-D grid. The tag keeps heatmaps, masks and images apart at
/// compile time even when they share an element type.
template <typename T, typename Tag>
class Grid {
 public:
  using value_type = T;

  Grid() = default;
  Grid(int width, int height, T fill = T{}) : width_(width), height_(height) {
    require(width >= 1 && height >= 1, ErrorKind::InvalidParameter,
            "grid dimensions must be >= 1, got " + std::to_string(width) + "x" +
                std::to_string(height));
    values_.assign(static_cast<std::size_t>(width) * height, fill);
  }
  Grid(int width, int height, std::vector<T> values)
      : width_(width), height_(height), values_(std::move(values)) {
    require(width >= 1 && height >= 1, ErrorKind::InvalidParameter,
            "grid dimensions must be >= 1");
    require(values_.size() == static_cast<std::size_t>(width) * height,
            ErrorKind::InvalidInput, "grid payload does not match dimensions");
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return values_.size(); }

  T& at(int x, int y) { return values_[index(x, y)]; }
  const T& at(int x, int y) const { return values_[index(x, y)]; }

  bool contains(int x, int y) const noexcept {
    return x >= 0 && y >= 0 && x < width_ && y < height_;
  }

  std::span<T> values() noexcept { return values_; }
  std::span<const T> values() const noexcept { return values_; }
  std::vector<T>& storage() noexcept { return values_; }

  template <typename U, typename OtherTag>
  bool same_shape(const Grid<U, OtherTag>& other) const {
    return width_ == other.width() && height_ == other.height();
  }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * width_ + x;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<T> values_;
};

struct HeatmapTag {};
struct MaskTag {};
struct ImageTag {};

/// Per-pixel confidence; encoded heatmaps lie in [0, 1].
using Heatmap = Grid<float, HeatmapTag>;
/// 1 = pixel contributes to the loss, 0 = ignored.
using Mask = Grid<std::uint8_t, MaskTag>;
/// Grayscale intensities in [0, 1].
using GrayImage = Grid<float, ImageTag>;

}  // namespace tracklabel
