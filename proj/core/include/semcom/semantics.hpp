#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "semcom/camera.hpp"
#include "semcom/scene.hpp"

namespace semcom {

/// Axis-aligned image rectangle of the box: center and size in pixels.
struct BoxObservation {
  double cx = 0.0;
  double cy = 0.0;
  double w = 0.0;
  double h = 0.0;

  bool empty() const { return !(w > 0.0 && h > 0.0); }
  bool operator==(const BoxObservation&) const = default;
};

struct ViewSemantics {
  int camera_id = 0;
  std::array<ImagePoint, kKeypointCount> keypoints{};
  BoxObservation box;
};

/// Per-frame semantic payload: for every view, 7 arm keypoints (14 scalars)
/// and the 4-parameter box.
struct SemanticFrame {
  std::int64_t time = 0;
  std::vector<ViewSemantics> views;
};

inline constexpr std::size_t kKeypointScalarsPerView = 2 * kKeypointCount;  // 14
inline constexpr std::size_t kBoxScalarsPerView = 4;
inline constexpr std::size_t kScalarsPerView = kKeypointScalarsPerView + kBoxScalarsPerView;

/// Number of transmitted scalars in a frame (views * 18).
std::size_t scalar_count(const SemanticFrame& frame);

struct DetectorNoise {
  double keypoint_sigma = 0.0;  // px, per coordinate
  double box_sigma = 0.0;       // px, per box parameter
  double miss_rate = 0.0;       // probability a view's box is dropped
  std::uint64_t seed = 0;

  void validate() const;
};

/// Keypoints of the arm in `state` projected into `cam`, in joint order.
std::array<ImagePoint, kKeypointCount> extract_keypoints(const SceneState& state,
                                                         const CameraConfig& cam);

/// Bounding rectangle of the projected corners of `box`, clipped to the image.
/// Empty (all zero) when the box is behind the camera or outside the image.
BoxObservation project_box(const BoxState& box, const CameraConfig& cam);
BoxObservation extract_box(const SceneState& state, const CameraConfig& cam);

/// Gaussian perturbation of keypoints and box parameters plus random box
/// misses. Deterministic for a fixed noise seed and frame time.
SemanticFrame apply_detector_noise(const SemanticFrame& frame, const DetectorNoise& noise);

/// One view record per camera, noise applied. Empty rig -> ConfigError.
SemanticFrame extract_frame(const SceneState& state, const std::vector<CameraConfig>& rig,
                            const DetectorNoise& noise = {});

}  // namespace semcom
