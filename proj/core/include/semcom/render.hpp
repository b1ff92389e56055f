#pragma once

#include <cstdint>
#include <vector>

#include "semcom/camera.hpp"
#include "semcom/scene.hpp"

namespace semcom {

/// Row-major 8-bit RGB image.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;

  Image() = default;
  Image(int w, int h);

  std::uint8_t* pixel(int x, int y) { return rgb.data() + 3 * (static_cast<std::size_t>(y) * width + x); }
  const std::uint8_t* pixel(int x, int y) const {
    return rgb.data() + 3 * (static_cast<std::size_t>(y) * width + x);
  }
  bool operator==(const Image&) const = default;
};

struct EdgeMap {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> mask;  // 0/1, row-major

  bool at(int x, int y) const { return mask[static_cast<std::size_t>(y) * width + x] != 0; }
  bool operator==(const EdgeMap&) const = default;
};

struct CloudPoint {
  Vec3 position;
  Rgb color;
};

struct PointCloud {
  std::vector<CloudPoint> points;
};

/// One quadrature sample along a ray.
struct RaySample {
  double l;              // ray parameter at the sample (segment midpoint)
  double delta;          // segment length
  double density;
  Rgb color;
  double transmittance;  // T_i = exp(-sum_{j<i} density_j * delta_j)
};

struct RayTrace {
  std::vector<RaySample> samples;
  double residual_transmittance = 1.0;
  Rgb color = Rgb::Zero();  // clamped to [0, 1]
};

/// Uniform midpoint quadrature of the emission-absorption integral on
/// [l_start, l_end]:
///   C = sum_i T_i (1 - exp(-sigma_i delta)) c_i + T_N * sky
/// `direction` must be unit length, l_start < l_end, steps >= 1.
Rgb render_ray(const SceneState& state, const Vec3& origin, const Vec3& direction,
               double l_start, double l_end, int steps);

/// Same quadrature, recording every sample (no early termination).
RayTrace trace_ray(const SceneState& state, const Vec3& origin, const Vec3& direction,
                   double l_start, double l_end, int steps);

struct RenderOptions {
  int steps = 256;
  // Stop marching once transmittance falls below this; the remaining
  // transmittance still multiplies the sky color. 0 disables the cutoff.
  double transmittance_cutoff = 1e-6;
};

/// One ray per pixel center, marched from the near to the far plane.
Image render_image(const SceneState& state, const CameraConfig& cam,
                   const RenderOptions& options = {});

/// 3x3 Sobel magnitude on luminance; a pixel is an edge when its magnitude
/// exceeds threshold * (max magnitude). Border pixels are never edges.
EdgeMap edge_map(const Image& img, double threshold);

/// One point per voxel of `bounds` whose center density is >= sigma_min,
/// colored by the field. Points are ordered x fastest, then y, then z.
PointCloud extract_point_cloud(const SceneState& state, const Bounds& bounds,
                               double voxel_size, double sigma_min);

}  // namespace semcom
