#include "semcom/render.hpp"

#include <algorithm>
#include <cmath>

#include "semcom/errors.hpp"

namespace semcom {

Image::Image(int w, int h)
    : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3, 0) {
  if (w < 0 || h < 0) throw ContractViolation("image dimensions must be non-negative");
}

namespace {

void check_ray_args(const Vec3& direction, double l_start, double l_end, int steps) {
  const double n = direction.norm();
  if (!(n > 0.0)) throw ContractViolation("ray direction has zero length");
  if (std::abs(n - 1.0) > 1e-9) throw ContractViolation("ray direction must be unit length");
  if (!(l_start < l_end)) throw ContractViolation("ray interval needs l_start < l_end");
  if (steps < 1) throw ContractViolation("ray quadrature needs at least one step");
}

// Shared midpoint quadrature. `on_sample` sees every evaluated sample.
template <typename OnSample>
RayTrace march(const SceneFieldEvaluator& field,
               std::vector<SceneFieldEvaluator::Candidate>& candidates, const Vec3& origin,
               const Vec3& direction, double l_start, double l_end, int steps, double cutoff,
               OnSample&& on_sample) {
  field.cull(origin, direction, candidates);
  const double delta = (l_end - l_start) / steps;
  RayTrace out;
  Rgb accum = Rgb::Zero();
  double optical_depth = 0.0;
  double transmittance = 1.0;
  if (!candidates.empty()) {
    for (int i = 0; i < steps; ++i) {
      const double l = l_start + (i + 0.5) * delta;
      const FieldSample s = field.sample_along(origin + l * direction, l, candidates);
      on_sample(RaySample{l, delta, s.density, s.color, transmittance});
      if (s.density > 0.0) {
        accum += transmittance * (1.0 - std::exp(-s.density * delta)) * s.color;
        optical_depth += s.density * delta;
        transmittance = std::exp(-optical_depth);
        if (transmittance < cutoff) break;
      }
    }
  } else {
    for (int i = 0; i < steps; ++i) {
      const double l = l_start + (i + 0.5) * delta;
      on_sample(RaySample{l, delta, 0.0, field.sky_color(), 1.0});
    }
  }
  accum += transmittance * field.sky_color();
  out.residual_transmittance = transmittance;
  out.color = accum.cwiseMax(0.0).cwiseMin(1.0);
  return out;
}

struct NoOp {
  void operator()(const RaySample&) const {}
};

}  // namespace

Rgb render_ray(const SceneState& state, const Vec3& origin, const Vec3& direction,
               double l_start, double l_end, int steps) {
  check_ray_args(direction, l_start, l_end, steps);
  const SceneFieldEvaluator field(state);
  std::vector<SceneFieldEvaluator::Candidate> candidates;
  return march(field, candidates, origin, direction, l_start, l_end, steps, 0.0, NoOp{})
      .color;
}

RayTrace trace_ray(const SceneState& state, const Vec3& origin, const Vec3& direction,
                   double l_start, double l_end, int steps) {
  check_ray_args(direction, l_start, l_end, steps);
  const SceneFieldEvaluator field(state);
  std::vector<SceneFieldEvaluator::Candidate> candidates;
  std::vector<RaySample> samples;
  samples.reserve(static_cast<std::size_t>(steps));
  RayTrace trace = march(field, candidates, origin, direction, l_start, l_end, steps, 0.0,
                         [&](const RaySample& s) { samples.push_back(s); });
  trace.samples = std::move(samples);
  return trace;
}

Image render_image(const SceneState& state, const CameraConfig& cam,
                   const RenderOptions& options) {
  cam.validate();
  if (options.steps < 1) throw ContractViolation("render needs at least one step");
  const SceneFieldEvaluator field(state);
  std::vector<SceneFieldEvaluator::Candidate> candidates;
  Image img(cam.width, cam.height);
  for (int y = 0; y < cam.height; ++y) {
    for (int x = 0; x < cam.width; ++x) {
      const Ray ray = pixel_ray(cam, x + 0.5, y + 0.5);
      const Rgb c = march(field, candidates, ray.origin, ray.direction, cam.near, cam.far,
                          options.steps, options.transmittance_cutoff, NoOp{})
                        .color;
      std::uint8_t* px = img.pixel(x, y);
      for (int k = 0; k < 3; ++k) {
        px[k] = static_cast<std::uint8_t>(std::lround(c[k] * 255.0));
      }
    }
  }
  return img;
}

EdgeMap edge_map(const Image& img, double threshold) {
  if (!(threshold > 0.0 && threshold <= 1.0)) {
    throw ContractViolation("edge threshold must lie in (0, 1]");
  }
  EdgeMap out{img.width, img.height,
              std::vector<std::uint8_t>(static_cast<std::size_t>(img.width) * img.height, 0)};
  if (img.width < 3 || img.height < 3) return out;

  std::vector<double> lum(static_cast<std::size_t>(img.width) * img.height);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const std::uint8_t* p = img.pixel(x, y);
      lum[static_cast<std::size_t>(y) * img.width + x] = (p[0] + p[1] + p[2]) / 3.0;
    }
  }
  auto at = [&](int x, int y) { return lum[static_cast<std::size_t>(y) * img.width + x]; };

  std::vector<double> mag(lum.size(), 0.0);
  double max_mag = 0.0;
  for (int y = 1; y + 1 < img.height; ++y) {
    for (int x = 1; x + 1 < img.width; ++x) {
      const double gx = (at(x + 1, y - 1) + 2.0 * at(x + 1, y) + at(x + 1, y + 1)) -
                        (at(x - 1, y - 1) + 2.0 * at(x - 1, y) + at(x - 1, y + 1));
      const double gy = (at(x - 1, y + 1) + 2.0 * at(x, y + 1) + at(x + 1, y + 1)) -
                        (at(x - 1, y - 1) + 2.0 * at(x, y - 1) + at(x + 1, y - 1));
      const double m = std::hypot(gx, gy);
      mag[static_cast<std::size_t>(y) * img.width + x] = m;
      max_mag = std::max(max_mag, m);
    }
  }
  if (max_mag == 0.0) return out;
  const double cut = threshold * max_mag;
  for (std::size_t i = 0; i < mag.size(); ++i) out.mask[i] = mag[i] > cut ? 1 : 0;
  return out;
}

PointCloud extract_point_cloud(const SceneState& state, const Bounds& bounds,
                               double voxel_size, double sigma_min) {
  if (!(voxel_size > 0.0)) throw ContractViolation("voxel size must be > 0");
  if (!(sigma_min > 0.0)) throw ContractViolation("sigma_min must be > 0");
  PointCloud cloud;
  const Vec3 extent = bounds.max - bounds.min;
  int n[3];
  for (int k = 0; k < 3; ++k) {
    n[k] = static_cast<int>(std::floor(extent[k] / voxel_size + 1e-9));
    if (n[k] <= 0) return cloud;
  }
  const SceneFieldEvaluator field(state);
  for (int iz = 0; iz < n[2]; ++iz) {
    for (int iy = 0; iy < n[1]; ++iy) {
      for (int ix = 0; ix < n[0]; ++ix) {
        const Vec3 center = bounds.min + voxel_size * Vec3(ix + 0.5, iy + 0.5, iz + 0.5);
        const FieldSample s = field.sample(center);
        if (s.density >= sigma_min) cloud.points.push_back({center, s.color});
      }
    }
  }
  return cloud;
}

}  // namespace semcom
