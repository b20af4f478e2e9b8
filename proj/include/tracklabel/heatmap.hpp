#pragma once

#include "tracklabel/grid.hpp"
#include "tracklabel/types.hpp"

namespace tracklabel {

/// Renders unit-height isotropic Gaussians at every point and combines them
/// with a per-pixel max, so adjacent cells keep separate peaks. Pixel (i, j)
/// sits at coordinate (x = i, y = j).
Heatmap encode_heatmap(const PointSet& points, int width, int height, double sigma);

/// Peak decoding: strict 8-neighbourhood maxima at or above `peak_threshold`,
/// followed by suppression of any candidate within `min_separation` of a
/// stronger retained one. Equal values are ordered by smaller (y, x), which
/// also decides plateaus. Result is sorted by (y, x).
PointSet detect_peaks(const Heatmap& heatmap, double peak_threshold,
                      double min_separation, int frame = 1);

/// Per-frame masked loss: sum(M * (target - pred)^2) / sum(M).
/// Throws ErrorKind::FullyMasked when the mask has no valid pixel.
double masked_mse(const Heatmap& pred, const Heatmap& target, const Mask& mask);

/// Plain mean squared error over all pixels.
double mse(const Heatmap& pred, const Heatmap& target);

Mask all_ones_mask(int width, int height);
std::size_t count_valid(const Mask& mask);

}  // namespace tracklabel
