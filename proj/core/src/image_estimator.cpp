#include "semcom/image_estimator.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>

#include "semcom/errors.hpp"

namespace semcom {

namespace {

constexpr std::size_t kTemplates = kKeypointCount + 1;  // markers, then the box
constexpr std::uint8_t kNoMatch = 0xFF;

std::array<int, 3> to_rgb8(const Rgb& c) {
  std::array<int, 3> out{};
  for (int i = 0; i < 3; ++i) out[i] = static_cast<int>(std::lround(std::clamp(c[i], 0.0, 1.0) * 255.0));
  return out;
}

double median_of(std::vector<double>& v) {
  const std::size_t n = v.size();
  std::sort(v.begin(), v.end());
  return n % 2 == 1 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
}

}  // namespace

ViewSemantics estimate_view(const Image& image, const ArmModel& arm, const BoxAppearance& box,
                            int camera_id, const ColorTemplateOptions& options) {
  if (options.tolerance < 0) throw ContractViolation("template tolerance must be >= 0");
  std::array<std::array<int, 3>, kTemplates> templates;
  for (std::size_t k = 0; k < kKeypointCount; ++k) templates[k] = to_rgb8(arm.marker_colors[k]);
  templates[kKeypointCount] = to_rgb8(box.color);

  const int w = image.width;
  const int h = image.height;
  std::vector<std::uint8_t> label(static_cast<std::size_t>(w) * h, kNoMatch);
  std::array<std::vector<double>, kKeypointCount> xs;
  std::array<std::vector<double>, kKeypointCount> ys;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::uint8_t* px = image.pixel(x, y);
      int best = options.tolerance + 1;
      std::uint8_t best_label = kNoMatch;
      for (std::size_t t = 0; t < kTemplates; ++t) {
        const int d = std::max({std::abs(px[0] - templates[t][0]), std::abs(px[1] - templates[t][1]),
                                std::abs(px[2] - templates[t][2])});
        if (d < best) {
          best = d;
          best_label = static_cast<std::uint8_t>(t);
        }
      }
      label[static_cast<std::size_t>(y) * w + x] = best_label;
      if (best_label < kKeypointCount) {
        xs[best_label].push_back(x + 0.5);
        ys[best_label].push_back(y + 0.5);
      }
    }
  }

  ViewSemantics view;
  view.camera_id = camera_id;
  for (std::size_t k = 0; k < kKeypointCount; ++k) {
    if (xs[k].size() < std::max<std::size_t>(1, options.min_pixels)) continue;
    view.keypoints[k] = {median_of(xs[k]), median_of(ys[k]), true};
  }

  // 3x3 opening of the box mask: erosion, then dilation of the survivors.
  auto is_box = [&](int x, int y) {
    return label[static_cast<std::size_t>(y) * w + x] == kKeypointCount;
  };
  std::vector<std::uint8_t> core(label.size(), 0);
  for (int y = 1; y + 1 < h; ++y) {
    for (int x = 1; x + 1 < w; ++x) {
      bool all = true;
      for (int dy = -1; dy <= 1 && all; ++dy) {
        for (int dx = -1; dx <= 1 && all; ++dx) all = is_box(x + dx, y + dy);
      }
      core[static_cast<std::size_t>(y) * w + x] = all ? 1 : 0;
    }
  }
  int x_lo = w;
  int y_lo = h;
  int x_hi = -1;
  int y_hi = -1;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!core[static_cast<std::size_t>(y) * w + x]) continue;
      // Dilation extends every core pixel by one in each direction.
      x_lo = std::min(x_lo, x - 1);
      y_lo = std::min(y_lo, y - 1);
      x_hi = std::max(x_hi, x + 1);
      y_hi = std::max(y_hi, y + 1);
    }
  }
  if (x_hi >= 0) {
    // Pixel-edge rectangle [x_lo, x_hi + 1) x [y_lo, y_hi + 1).
    const double left = x_lo;
    const double right = x_hi + 1.0;
    const double top = y_lo;
    const double bottom = y_hi + 1.0;
    view.box = {(left + right) / 2.0, (top + bottom) / 2.0, right - left, bottom - top};
  }
  return view;
}

SemanticFrame estimate_frame(const std::vector<Image>& images,
                             const std::vector<CameraConfig>& cameras, const ArmModel& arm,
                             const BoxAppearance& box, std::int64_t time,
                             const ColorTemplateOptions& options) {
  if (images.size() != cameras.size()) throw ContractViolation("one image per camera required");
  SemanticFrame frame;
  frame.time = time;
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i].width != cameras[i].width || images[i].height != cameras[i].height) {
      throw ContractViolation("image size does not match its camera");
    }
    frame.views.push_back(estimate_view(images[i], arm, box, cameras[i].id, options));
  }
  return frame;
}

}  // namespace semcom
