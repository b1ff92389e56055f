#pragma once

#include <filesystem>
#include <iosfwd>

#include "semcom/render.hpp"

namespace semcom {

// Binary PPM (P6, maxval 255).
void write_ppm(std::ostream& out, const Image& img);
void write_ppm(const std::filesystem::path& path, const Image& img);
Image read_ppm(std::istream& in);
Image read_ppm(const std::filesystem::path& path);

/// Edge map as a P6 image: white edges on black.
Image edge_image(const EdgeMap& edges);

// ASCII PLY with float x y z and uchar red green blue per vertex. Coordinates
// are printed with six decimals so output is byte-stable.
void write_ply(std::ostream& out, const PointCloud& cloud);
void write_ply(const std::filesystem::path& path, const PointCloud& cloud);

}  // namespace semcom
