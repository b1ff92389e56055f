#pragma once

#include <vector>

#include "semcom/scene.hpp"

namespace semcom {

/// Pinhole UAV camera. `rotation` maps camera axes to world axes (its columns
/// are the camera's right, up and backward directions); the camera looks down
/// its local -z axis.
struct CameraConfig {
  int id = 0;
  Vec3 position = Vec3::Zero();
  Mat3 rotation = Mat3::Identity();
  double fov = 1.0471975511965976;  // vertical field of view, radians
  double aspect = 2.0;              // width / height
  double near = 0.5;
  double far = 10.0;
  int width = 1200;
  int height = 600;

  /// Throws ContractViolation if the rotation is not a proper orthonormal
  /// matrix or the intrinsics are out of range.
  void validate() const;
};

struct ImagePoint {
  double x = 0.0;
  double y = 0.0;
  bool in_frustum = false;
};

struct Ray {
  Vec3 origin;
  Vec3 direction;  // unit length
};

/// World -> view transform [R^T | -R^T p ; 0 0 0 1].
Mat4 view_matrix(const CameraConfig& cam);

/// OpenGL-style perspective matrix with f = 1 / tan(fov / 2):
///   [f/a 0 0 0; 0 f 0 0; 0 0 (zf+zn)/(zn-zf) 2 zf zn/(zn-zf); 0 0 -1 0].
Mat4 projection_matrix(const CameraConfig& cam);

/// World point -> pixel (x right, y down, origin at the top-left corner).
/// Points behind the camera, at its center, or outside the NDC cube are
/// flagged out of frustum.
ImagePoint project_point(const CameraConfig& cam, const Vec3& world);

/// Ray through pixel coordinate (x, y) in world space.
Ray pixel_ray(const CameraConfig& cam, double x, double y);

/// Rotation whose -z axis points from `eye` to `target`, with +y as close to
/// `up` as possible. Throws ContractViolation when the view direction is
/// parallel to `up`.
Mat3 look_at_rotation(const Vec3& eye, const Vec3& target, const Vec3& up = Vec3::UnitY());

struct RigSpec {
  int count = 8;
  double radius = 5.0;
  double height = 2.5;
  Vec3 look_at = Vec3(0.0, 1.0, 0.0);
  double fov = 0.8726646259971648;  // 50 degrees
  double near = 0.5;
  double far = 10.0;
  int width = 1200;
  int height_px = 600;
};

/// `count` cameras evenly spaced in azimuth (atan2(z, x) about `look_at`,
/// starting at 0) on a circle of `radius` at world height `height`, all
/// looking at `look_at`. count < 2 -> ConfigError.
std::vector<CameraConfig> make_rig(const RigSpec& spec);

}  // namespace semcom
