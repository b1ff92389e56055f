#pragma once

#include <cstdint>
#include <vector>

#include "semcom/camera.hpp"
#include "semcom/render.hpp"
#include "semcom/scene.hpp"
#include "semcom/semantics.hpp"

namespace semcom {

/// Pixel-domain semantics for received images: every pixel is assigned to
/// the nearest color template (joint markers and box) when it lies within
/// `tolerance` (max channel difference, 8-bit units).
struct ColorTemplateOptions {
  int tolerance = 48;
  std::size_t min_pixels = 2;  // fewer matched pixels -> keypoint invalid
};

/// Keypoint i = per-axis median of the pixel centers matched to marker i.
/// Box = bounding rectangle of the box-colored mask after a 3x3 opening
/// (empty when nothing survives).
ViewSemantics estimate_view(const Image& image, const ArmModel& arm, const BoxAppearance& box,
                            int camera_id, const ColorTemplateOptions& options = {});

SemanticFrame estimate_frame(const std::vector<Image>& images,
                             const std::vector<CameraConfig>& cameras, const ArmModel& arm,
                             const BoxAppearance& box, std::int64_t time,
                             const ColorTemplateOptions& options = {});

}  // namespace semcom
