#pragma once

#include <vector>

#include "fishrec/image.hpp"

namespace fishrec {

// Per-pixel non-negative saliency values, same dimensions as the source.
struct SaliencyMap {
    int width = 0;
    int height = 0;
    std::vector<double> values;

    double at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
};

struct SaliencyConfig {
    double sigma = 1.0;       // Gaussian smoothing std-dev in pixels
    int nms_radius = 8;       // local-maximum exclusion radius in pixels
    int init_part_side = 48;  // initial part square side in pixels
};

// Phase-only spectrum saliency: squared magnitude of the inverse transform of
// the phase term, Gaussian smoothed. Color inputs are reduced to luminance.
// Non-power-of-two sizes are zero padded for the transform and the map is
// cropped back to the source dimensions.
SaliencyMap pft_saliency(const Image& image, const SaliencyConfig& cfg);

struct SalientPoint {
    int x = 0;
    int y = 0;
    double value = 0.0;
};

// Local maxima within nms_radius (ties keep the lexicographically smallest
// (row, col)), restricted to mask foreground, sorted by value descending.
std::vector<SalientPoint> nonmax_suppress(const SaliencyMap& map, const Mask& mask,
                                          const SaliencyConfig& cfg);

// Rects of side init_part_side centered on the top-K salient points, clamped
// feasible. Throws data_error when fewer than k local maxima exist.
std::vector<Rect> init_parts(const SaliencyMap& map, const Mask& mask, int k,
                             const SaliencyConfig& cfg);

}  // namespace fishrec
