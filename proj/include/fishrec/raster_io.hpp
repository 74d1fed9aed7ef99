#pragma once

#include <string>

#include "fishrec/image.hpp"

namespace fishrec {

// Reads a PNG/PGM/PPM file into the canonical in-memory form (8/16-bit
// sources scaled to [0,1]; palette expanded; alpha dropped). Throws
// data_error on unreadable files.
Image read_image(const std::string& path);

// Writes 8-bit PNG (grayscale for 1 channel, RGB for 3) with fixed encoder
// settings so identical pixels produce identical bytes.
void write_png(const std::string& path, const Image& img);

// Mask raster helpers: nonzero pixels are foreground.
Mask read_mask(const std::string& path);
void write_mask_png(const std::string& path, const Mask& mask);

// Binary PGM, handy for debug dumps of float maps scaled to [0,255].
void write_pgm(const std::string& path, const Image& gray);

}  // namespace fishrec
