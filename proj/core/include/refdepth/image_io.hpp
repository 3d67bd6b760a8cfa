#pragma once

#include <string>

#include "refdepth/depth_map.hpp"

namespace refdepth {

// Depth rasters travel as grayscale PFM ("Pf", little-endian, bottom-to-top
// scanlines); invalid pixels are encoded as -1.0. Images travel as binary
// 8-bit PGM ("P5").

void write_pfm(const std::string& path, const DepthMap& map);
DepthMap read_pfm(const std::string& path);

void write_pgm(const std::string& path, const GrayImage& img);
GrayImage read_pgm(const std::string& path);

/// 8-bit mask raster (0 or 255) as PGM; used for the `extrapolated` flags.
void write_mask_pgm(const std::string& path, int width, int height,
                    const std::vector<uint8_t>& mask);
std::vector<uint8_t> read_mask_pgm(const std::string& path, int& width, int& height);

}  // namespace refdepth
