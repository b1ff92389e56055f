#include "semcom/camera.hpp"

#include <cmath>
#include <numbers>

#include <Eigen/Geometry>

#include "semcom/errors.hpp"

namespace semcom {

void CameraConfig::validate() const {
  const Mat3 gram = rotation.transpose() * rotation;
  if ((gram - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-9) {
    throw ContractViolation("camera rotation is not orthonormal");
  }
  if (std::abs(rotation.determinant() - 1.0) > 1e-9) {
    throw ContractViolation("camera rotation must have determinant +1");
  }
  if (!(fov > 0.0 && fov < std::numbers::pi)) {
    throw ContractViolation("camera fov must lie in (0, pi)");
  }
  if (!(aspect > 0.0)) throw ContractViolation("camera aspect must be > 0");
  if (!(near > 0.0 && near < far)) {
    throw ContractViolation("camera clip planes need 0 < near < far");
  }
  if (width <= 0 || height <= 0) throw ContractViolation("camera resolution must be positive");
}

Mat4 view_matrix(const CameraConfig& cam) {
  cam.validate();
  Mat4 v = Mat4::Identity();
  const Mat3 rt = cam.rotation.transpose();
  v.topLeftCorner<3, 3>() = rt;
  v.topRightCorner<3, 1>() = -rt * cam.position;
  return v;
}

Mat4 projection_matrix(const CameraConfig& cam) {
  cam.validate();
  const double f = 1.0 / std::tan(cam.fov / 2.0);
  const double zn = cam.near;
  const double zf = cam.far;
  Mat4 m = Mat4::Zero();
  m(0, 0) = f / cam.aspect;
  m(1, 1) = f;
  m(2, 2) = (zf + zn) / (zn - zf);
  m(2, 3) = 2.0 * zf * zn / (zn - zf);
  m(3, 2) = -1.0;
  return m;
}

ImagePoint project_point(const CameraConfig& cam, const Vec3& world) {
  const Eigen::Vector4d clip =
      projection_matrix(cam) * (view_matrix(cam) * world.homogeneous());
  const double w = clip.w();
  ImagePoint out;
  if (w == 0.0) return out;  // camera center: no direction, nothing to project
  const Eigen::Vector3d ndc = clip.head<3>() / w;
  out.x = (ndc.x() + 1.0) / 2.0 * cam.width;
  out.y = (1.0 - ndc.y()) / 2.0 * cam.height;
  out.in_frustum = w > 0.0 && (ndc.array().abs() <= 1.0).all();
  return out;
}

Ray pixel_ray(const CameraConfig& cam, double x, double y) {
  cam.validate();
  const double f = 1.0 / std::tan(cam.fov / 2.0);
  const double ndc_x = 2.0 * x / cam.width - 1.0;
  const double ndc_y = 1.0 - 2.0 * y / cam.height;
  const Vec3 view_dir(ndc_x * cam.aspect / f, ndc_y / f, -1.0);
  return {cam.position, (cam.rotation * view_dir).normalized()};
}

Mat3 look_at_rotation(const Vec3& eye, const Vec3& target, const Vec3& up) {
  const Vec3 forward = (target - eye).normalized();
  const Vec3 right_raw = forward.cross(up);
  if (!(right_raw.norm() > 1e-12)) {
    throw ContractViolation("look-at direction is parallel to the up vector");
  }
  const Vec3 right = right_raw.normalized();
  const Vec3 true_up = right.cross(forward);
  Mat3 r;
  r.col(0) = right;
  r.col(1) = true_up;
  r.col(2) = -forward;
  return r;
}

std::vector<CameraConfig> make_rig(const RigSpec& spec) {
  if (spec.count < 2) throw ConfigError("a camera rig needs at least 2 cameras");
  if (!(spec.radius > 0.0)) throw ConfigError("rig radius must be > 0");
  std::vector<CameraConfig> rig;
  rig.reserve(static_cast<std::size_t>(spec.count));
  for (int k = 0; k < spec.count; ++k) {
    const double azimuth = 2.0 * std::numbers::pi * k / spec.count;
    CameraConfig cam;
    cam.id = k;
    cam.position = Vec3(spec.look_at.x() + spec.radius * std::cos(azimuth), spec.height,
                        spec.look_at.z() + spec.radius * std::sin(azimuth));
    cam.rotation = look_at_rotation(cam.position, spec.look_at);
    cam.fov = spec.fov;
    cam.width = spec.width;
    cam.height = spec.height_px;
    cam.aspect = static_cast<double>(spec.width) / spec.height_px;
    cam.near = spec.near;
    cam.far = spec.far;
    cam.validate();
    rig.push_back(cam);
  }
  return rig;
}

}  // namespace semcom
