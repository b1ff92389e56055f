#include "semcom/semantics.hpp"

#include <algorithm>
#include <limits>
#include <random>

#include <Eigen/Geometry>

#include "semcom/errors.hpp"

namespace semcom {

std::size_t scalar_count(const SemanticFrame& frame) {
  return frame.views.size() * kScalarsPerView;
}

void DetectorNoise::validate() const {
  if (!(keypoint_sigma >= 0.0) || !(box_sigma >= 0.0)) {
    throw ConfigError("detector noise sigmas must be >= 0");
  }
  if (!(miss_rate >= 0.0 && miss_rate < 1.0)) {
    throw ConfigError("detector miss rate must lie in [0, 1)");
  }
}

std::array<ImagePoint, kKeypointCount> extract_keypoints(const SceneState& state,
                                                         const CameraConfig& cam) {
  std::array<ImagePoint, kKeypointCount> out;
  const Keypoints3& kp = state.keypoints();
  for (std::size_t i = 0; i < kKeypointCount; ++i) out[i] = project_point(cam, kp[i]);
  return out;
}

BoxObservation project_box(const BoxState& box, const CameraConfig& cam) {
  const Mat4 transform = projection_matrix(cam) * view_matrix(cam);
  double x_lo = std::numeric_limits<double>::infinity();
  double y_lo = x_lo;
  double x_hi = -x_lo;
  double y_hi = -x_lo;
  bool any_in_front = false;
  for (const Vec3& corner : box.corners()) {
    const Eigen::Vector4d clip = transform * corner.homogeneous();
    if (!(clip.w() > 0.0)) continue;
    any_in_front = true;
    const double x = (clip.x() / clip.w() + 1.0) / 2.0 * cam.width;
    const double y = (1.0 - clip.y() / clip.w()) / 2.0 * cam.height;
    x_lo = std::min(x_lo, x);
    x_hi = std::max(x_hi, x);
    y_lo = std::min(y_lo, y);
    y_hi = std::max(y_hi, y);
  }
  if (!any_in_front) return {};
  x_lo = std::max(x_lo, 0.0);
  y_lo = std::max(y_lo, 0.0);
  x_hi = std::min(x_hi, static_cast<double>(cam.width));
  y_hi = std::min(y_hi, static_cast<double>(cam.height));
  if (!(x_hi > x_lo && y_hi > y_lo)) return {};
  return {(x_lo + x_hi) / 2.0, (y_lo + y_hi) / 2.0, x_hi - x_lo, y_hi - y_lo};
}

BoxObservation extract_box(const SceneState& state, const CameraConfig& cam) {
  return project_box(state.box(), cam);
}

SemanticFrame apply_detector_noise(const SemanticFrame& frame, const DetectorNoise& noise) {
  noise.validate();
  const auto time = static_cast<std::uint64_t>(frame.time);
  std::seed_seq seq{static_cast<std::uint32_t>(noise.seed),
                    static_cast<std::uint32_t>(noise.seed >> 32),
                    static_cast<std::uint32_t>(time), static_cast<std::uint32_t>(time >> 32),
                    0x6465u};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  SemanticFrame out = frame;
  for (ViewSemantics& view : out.views) {
    for (ImagePoint& kp : view.keypoints) {
      kp.x += noise.keypoint_sigma * normal(rng);
      kp.y += noise.keypoint_sigma * normal(rng);
    }
    const double dcx = noise.box_sigma * normal(rng);
    const double dcy = noise.box_sigma * normal(rng);
    const double dw = noise.box_sigma * normal(rng);
    const double dh = noise.box_sigma * normal(rng);
    const bool missed = uniform(rng) < noise.miss_rate;
    if (missed) {
      view.box = {};
    } else if (!view.box.empty()) {
      view.box.cx += dcx;
      view.box.cy += dcy;
      view.box.w = std::max(0.0, view.box.w + dw);
      view.box.h = std::max(0.0, view.box.h + dh);
    }
  }
  return out;
}

SemanticFrame extract_frame(const SceneState& state, const std::vector<CameraConfig>& rig,
                            const DetectorNoise& noise) {
  if (rig.empty()) throw ConfigError("semantic extraction needs at least one camera");
  SemanticFrame frame;
  frame.time = state.time();
  frame.views.reserve(rig.size());
  for (const CameraConfig& cam : rig) {
    ViewSemantics view;
    view.camera_id = cam.id;
    view.keypoints = extract_keypoints(state, cam);
    view.box = extract_box(state, cam);
    frame.views.push_back(view);
  }
  const bool noiseless =
      noise.keypoint_sigma == 0.0 && noise.box_sigma == 0.0 && noise.miss_rate == 0.0;
  return noiseless ? frame : apply_detector_noise(frame, noise);
}

}  // namespace semcom
