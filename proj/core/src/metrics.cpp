#include "semcom/metrics.hpp"

#include <cmath>

#include <boost/geometry.hpp>
#include <boost/geometry/index/rtree.hpp>

#include "semcom/errors.hpp"

namespace semcom {

namespace {

namespace bg = boost::geometry;
namespace bgi = boost::geometry::index;
using BgPoint = bg::model::point<double, 3, bg::cs::cartesian>;
using Entry = std::pair<BgPoint, std::size_t>;

std::array<Eigen::Vector2d, kKpePointsPerView> kpe_points(const ViewSemantics& view) {
  std::array<Eigen::Vector2d, kKpePointsPerView> out;
  for (std::size_t k = 0; k < kKeypointCount; ++k) out[k] = {view.keypoints[k].x, view.keypoints[k].y};
  const BoxObservation& b = view.box;
  out[kKeypointCount] = {b.cx - b.w / 2.0, b.cy - b.h / 2.0};
  out[kKeypointCount + 1] = {b.cx + b.w / 2.0, b.cy + b.h / 2.0};
  return out;
}

// RMS distance from every point of `from` to its nearest neighbor in `to`.
double directed_rms(const PointCloud& from, const PointCloud& to) {
  std::vector<Entry> entries;
  entries.reserve(to.points.size());
  for (std::size_t i = 0; i < to.points.size(); ++i) {
    const Vec3& p = to.points[i].position;
    entries.emplace_back(BgPoint(p.x(), p.y(), p.z()), i);
  }
  const bgi::rtree<Entry, bgi::rstar<16>> tree(entries.begin(), entries.end());
  double sum = 0.0;
  std::vector<Entry> hit;
  for (const CloudPoint& q : from.points) {
    hit.clear();
    const BgPoint query(q.position.x(), q.position.y(), q.position.z());
    tree.query(bgi::nearest(query, 1), std::back_inserter(hit));
    // Distance recomputed from the stored coordinates so ties and rounding
    // match a brute-force scan exactly.
    sum += (to.points[hit.front().second].position - q.position).squaredNorm();
  }
  return std::sqrt(sum / static_cast<double>(from.points.size()));
}

}  // namespace

KpeReport kpe(const SemanticFrame& truth, const SemanticFrame& recovered, double threshold_px) {
  if (!(threshold_px > 0.0)) throw ContractViolation("kpe threshold must be > 0");
  if (truth.views.size() != recovered.views.size() || truth.views.empty()) {
    throw ContractViolation("kpe frames must have the same, nonzero number of views");
  }
  KpeReport out;
  out.threshold_px = threshold_px;
  std::size_t within = 0;
  double total = 0.0;
  for (std::size_t v = 0; v < truth.views.size(); ++v) {
    if (truth.views[v].camera_id != recovered.views[v].camera_id) {
      throw ContractViolation("kpe frames list different cameras");
    }
    const auto a = kpe_points(truth.views[v]);
    const auto b = kpe_points(recovered.views[v]);
    double view_sum = 0.0;
    for (std::size_t k = 0; k < kKpePointsPerView; ++k) {
      const double d = (a[k] - b[k]).norm();
      out.per_point_px.push_back(d);
      view_sum += d;
      if (d <= threshold_px) ++within;
    }
    out.per_view_px.push_back(view_sum / kKpePointsPerView);
    total += view_sum;
  }
  const auto n = static_cast<double>(out.per_point_px.size());
  out.mean_px = total / n;
  out.pck = static_cast<double>(within) / n;
  return out;
}

P2PointReport p2point(const PointCloud& a, const PointCloud& b) {
  if (a.points.empty() || b.points.empty()) throw ContractViolation("p2point needs nonempty clouds");
  P2PointReport out;
  out.forward_rms_m = directed_rms(a, b);
  out.backward_rms_m = directed_rms(b, a);
  out.rms_m = std::sqrt((out.forward_rms_m * out.forward_rms_m +
                         out.backward_rms_m * out.backward_rms_m) / 2.0);
  return out;
}

TdReport td(double extract_s, std::size_t payload_bits, double base_bits_amortized,
            const ChannelConfig& cfg, double generate_s) {
  if (!(extract_s >= 0.0) || !(base_bits_amortized >= 0.0) || !(generate_s >= 0.0)) {
    throw ContractViolation("delay components must be >= 0");
  }
  cfg.validate();
  TdReport out;
  out.extract_s = extract_s;
  out.airtime_s = (static_cast<double>(payload_bits) + base_bits_amortized) / cfg.link_rate_bps;
  out.generate_s = generate_s;
  out.total_s = out.extract_s + out.airtime_s + out.generate_s;
  return out;
}

}  // namespace semcom
