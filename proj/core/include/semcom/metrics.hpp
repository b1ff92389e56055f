#pragma once

#include <cstddef>
#include <vector>

#include "semcom/channel.hpp"
#include "semcom/render.hpp"
#include "semcom/semantics.hpp"

namespace semcom {

/// Points compared per view: the 7 keypoints plus the rectangle's top-left
/// and bottom-right corners.
inline constexpr std::size_t kKpePointsPerView = kKeypointCount + 2;

struct KpeReport {
  double mean_px = 0.0;
  std::vector<double> per_point_px;  // view-major, kKpePointsPerView per view
  std::vector<double> per_view_px;   // mean distance of each view
  double pck = 0.0;                  // fraction of points within the threshold
  double threshold_px = 10.0;
};

/// Pixel distance between two frames with identical view structure.
/// Mismatched structure or threshold <= 0 -> ContractViolation.
KpeReport kpe(const SemanticFrame& truth, const SemanticFrame& recovered, double threshold_px = 10.0);

struct P2PointReport {
  double rms_m = 0.0;
  double forward_rms_m = 0.0;   // a -> nearest of b
  double backward_rms_m = 0.0;  // b -> nearest of a
};

/// Symmetric RMS nearest-neighbor distance. Either cloud empty -> ContractViolation.
P2PointReport p2point(const PointCloud& a, const PointCloud& b);

struct TdReport {
  double extract_s = 0.0;
  double airtime_s = 0.0;
  double generate_s = 0.0;
  double total_s = 0.0;
};

/// Per-frame delay: extraction + airtime of the payload and the amortized
/// base-knowledge share + generation. Negative inputs -> ContractViolation.
TdReport td(double extract_s, std::size_t payload_bits, double base_bits_amortized,
            const ChannelConfig& cfg, double generate_s);

}  // namespace semcom
