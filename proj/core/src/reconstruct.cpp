#include "semcom/reconstruct.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <set>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "semcom/errors.hpp"

namespace semcom {

namespace {

using Vec2 = Eigen::Vector2d;
using Mat23 = Eigen::Matrix<double, 2, 3>;

constexpr double kEdgeThreshold = 0.2;
constexpr int kEdgeGridWidth = 64;
constexpr int kEdgeGridHeight = 32;
constexpr double kMadScale = 1.4826;

// Pixel projection with its derivative with respect to the world point. Same
// mapping as project_point, written out so the derivative is exact.
Vec2 project_with_jacobian(const CameraConfig& cam, const Vec3& p, Mat23* d) {
  const Vec3 v = cam.rotation.transpose() * (p - cam.position);
  const double f = 1.0 / std::tan(cam.fov / 2.0);
  const double fx = f / cam.aspect;
  double z = v.z();
  if (z > -1e-9) z = -1e-9;  // behind or at the camera: keep the residual finite
  const double hw = cam.width / 2.0;
  const double hh = cam.height / 2.0;
  const Vec2 px(hw * (1.0 - fx * v.x() / z), hh * (1.0 + f * v.y() / z));
  if (d != nullptr) {
    Mat23 dv;
    dv << -hw * fx / z, 0.0, hw * fx * v.x() / (z * z),
        0.0, hh * f / z, -hh * f * v.y() / (z * z);
    *d = dv * cam.rotation.transpose();
  }
  return px;
}

std::size_t camera_index(const std::vector<CameraConfig>& cameras, int id) {
  for (std::size_t i = 0; i < cameras.size(); ++i) {
    if (cameras[i].id == id) return i;
  }
  throw ContractViolation("received view for unknown camera " + std::to_string(id));
}

bool inside_image(const CameraConfig& cam, double x, double y) {
  return std::isfinite(x) && std::isfinite(y) && x >= 0.0 && y >= 0.0 && x <= cam.width &&
         y <= cam.height;
}

double median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  const auto mid = values.begin() + static_cast<std::ptrdiff_t>(values.size() / 2);
  std::nth_element(values.begin(), mid, values.end());
  return *mid;
}

double rms_from_cost(double cost, std::size_t points) {
  return points == 0 ? 0.0 : std::sqrt(cost / static_cast<double>(points));
}

// ---- arm -------------------------------------------------------------------

Eigen::VectorXd to_vector(const ArmPose& pose) {
  return Eigen::Map<const Eigen::VectorXd>(pose.joint_angles.data(),
                                           static_cast<Eigen::Index>(pose.joint_angles.size()));
}

ArmPose to_pose(const Eigen::VectorXd& v, Eigen::Index offset, std::size_t n) {
  ArmPose pose;
  pose.joint_angles.resize(n);
  for (std::size_t i = 0; i < n; ++i) pose.joint_angles[i] = v[offset + static_cast<Eigen::Index>(i)];
  return pose;
}

// Euclidean reprojection error of every observation at `pose`.
std::vector<double> arm_errors(const ArmModel& model, const std::vector<CameraConfig>& cameras,
                               std::span<const KeypointObservation> obs, const ArmPose& pose) {
  const Eigen::VectorXd r = arm_reprojection(model, cameras, obs, pose);
  std::vector<double> out(obs.size());
  for (std::size_t i = 0; i < obs.size(); ++i) out[i] = r.segment<2>(2 * static_cast<Eigen::Index>(i)).norm();
  return out;
}

LmResult solve_arm(const ArmModel& model, const std::vector<CameraConfig>& cameras,
                   std::span<const KeypointObservation> obs, const ArmPose& init,
                   const LmOptions& options) {
  const std::size_t n = init.joint_angles.size();
  LmProblem problem = [&](const Eigen::VectorXd& q, Eigen::VectorXd& r, Eigen::MatrixXd* j) {
    r = arm_reprojection(model, cameras, obs, to_pose(q, 0, n), j);
  };
  return levenberg_marquardt(problem, to_vector(init), options);
}

std::size_t distinct_cameras(std::span<const KeypointObservation> obs) {
  std::set<std::size_t> ids;
  for (const KeypointObservation& o : obs) ids.insert(o.camera);
  return ids.size();
}

struct ArmSolution {
  LmResult lm;
  std::vector<KeypointObservation> used;
};

std::vector<KeypointObservation> select(std::span<const KeypointObservation> all,
                                        const std::vector<double>& err, double limit) {
  std::vector<KeypointObservation> out;
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (err[i] <= limit) out.push_back(all[i]);
  }
  return out;
}

// Fit from `init` on `start`, then alternately re-select inliers among `all`
// and re-fit until the set settles. The threshold shrinks from a robust
// spread estimate towards options.inlier_px.
std::optional<ArmSolution> trimmed_arm_fit(const ArmModel& model,
                                           const std::vector<CameraConfig>& cameras,
                                           std::span<const KeypointObservation> all,
                                           std::vector<KeypointObservation> start,
                                           const ArmPose& init, const FitOptions& options,
                                           std::vector<std::vector<double>>& logs) {
  const std::size_t n = init.joint_angles.size();
  std::vector<KeypointObservation> used = std::move(start);
  LmResult lm;
  for (int round = 0; round < options.max_rounds; ++round) {
    if (used.size() < options.min_keypoints || distinct_cameras(used) < 2) return std::nullopt;
    lm = solve_arm(model, cameras, used, init, options.lm);
    logs.push_back(lm.cost_history);
    const std::vector<double> err = arm_errors(model, cameras, all, to_pose(lm.params, 0, n));
    std::vector<double> used_err = arm_errors(model, cameras, used, to_pose(lm.params, 0, n));
    const double limit = std::max(options.inlier_px, 3.0 * kMadScale * median(used_err));
    std::vector<KeypointObservation> next = select(all, err, limit);
    const bool settled = next.size() == used.size() && limit <= options.inlier_px;
    used = std::move(next);
    if (settled) break;
  }
  const std::vector<double> err = arm_errors(model, cameras, all, to_pose(lm.params, 0, n));
  std::vector<KeypointObservation> inliers = select(all, err, options.inlier_px);
  if (inliers.size() < options.min_keypoints || distinct_cameras(inliers) < 2) return std::nullopt;
  if (inliers.size() != used.size() || lm.params.size() == 0) {
    lm = solve_arm(model, cameras, inliers, to_pose(lm.params, 0, n), options.lm);
    logs.push_back(lm.cost_history);
  }
  return ArmSolution{std::move(lm), std::move(inliers)};
}

std::optional<ArmSolution> robust_arm(const ArmModel& model, const std::vector<CameraConfig>& cameras,
                                      const std::vector<KeypointObservation>& all,
                                      const ArmPose& init, const FitOptions& options,
                                      std::vector<std::vector<double>>& logs) {
  if (distinct_cameras(all) < 2) return std::nullopt;
  if (!options.robust) {
    if (all.empty()) return std::nullopt;
    LmResult lm = solve_arm(model, cameras, all, init, options.lm);
    logs.push_back(lm.cost_history);
    return ArmSolution{std::move(lm), all};
  }
  std::optional<ArmSolution> best;
  auto consider = [&](std::optional<ArmSolution> candidate) {
    if (!candidate) return;
    if (!best || candidate->used.size() > best->used.size() ||
        (candidate->used.size() == best->used.size() && candidate->lm.cost < best->lm.cost)) {
      best = std::move(candidate);
    }
  };
  // Start 1: observations consistent with the previous estimate.
  const std::vector<double> prior_err = arm_errors(model, cameras, all, init);
  std::vector<KeypointObservation> gated = select(all, prior_err, options.prior_gate_px);
  const std::size_t gated_size = gated.size();
  consider(trimmed_arm_fit(model, cameras, all, std::move(gated), init, options, logs));
  // Start 2: everything (covers large motion and cold starts).
  if (gated_size != all.size()) consider(trimmed_arm_fit(model, cameras, all, all, init, options, logs));
  return best;
}

// ---- box -------------------------------------------------------------------

struct BoxView {
  std::size_t camera;
  Eigen::Vector4d rect;
};

std::vector<BoxView> box_views(const SemanticFrame& frame, const std::vector<CameraConfig>& cameras) {
  std::vector<BoxView> out;
  for (const ViewSemantics& view : frame.views) {
    const std::size_t c = camera_index(cameras, view.camera_id);
    const CameraConfig& cam = cameras[c];
    const BoxObservation& b = view.box;
    if (b.empty() || !inside_image(cam, b.cx, b.cy) || !(b.w <= cam.width) || !(b.h <= cam.height)) {
      continue;
    }
    out.push_back({c, Eigen::Vector4d(b.cx, b.cy, b.w, b.h)});
  }
  return out;
}

Eigen::Vector4d rect_of(const BoxState& box, const CameraConfig& cam) {
  const BoxObservation b = project_box(box, cam);
  return {b.cx, b.cy, b.w, b.h};
}

BoxState box_at(const BoxState& shape, const Vec3& center) {
  BoxState b = shape;
  b.center = center;
  return b;
}

// Residuals (predicted - observed) and a central-difference Jacobian of the
// rectangle parameters with respect to the box center.
void box_residuals(const BoxState& shape, const std::vector<CameraConfig>& cameras,
                   std::span<const BoxView> views, const Vec3& center, Eigen::VectorXd& r,
                   Eigen::MatrixXd* j, Eigen::Index row0 = 0, Eigen::Index col0 = 0,
                   double scale = 1.0) {
  constexpr double h = 1e-6;
  for (std::size_t v = 0; v < views.size(); ++v) {
    const CameraConfig& cam = cameras[views[v].camera];
    const Eigen::Index row = row0 + 4 * static_cast<Eigen::Index>(v);
    r.segment<4>(row) = scale * (rect_of(box_at(shape, center), cam) - views[v].rect);
    if (j == nullptr) continue;
    for (int k = 0; k < 3; ++k) {
      Vec3 lo = center;
      Vec3 hi = center;
      lo[k] -= h;
      hi[k] += h;
      j->block<4, 1>(row, col0 + k) =
          scale * (rect_of(box_at(shape, hi), cam) - rect_of(box_at(shape, lo), cam)) / (2.0 * h);
    }
  }
}

std::vector<double> box_errors(const BoxState& box, const std::vector<CameraConfig>& cameras,
                               std::span<const BoxView> views) {
  std::vector<double> out;
  out.reserve(views.size());
  for (const BoxView& v : views) out.push_back((rect_of(box, cameras[v.camera]) - v.rect).norm());
  return out;
}

Vec3 triangulate_centers(const std::vector<CameraConfig>& cameras, std::span<const BoxView> views,
                         const Vec3& fallback) {
  std::vector<CameraConfig> cams;
  std::vector<ImagePoint> points;
  for (const BoxView& v : views) {
    cams.push_back(cameras[v.camera]);
    points.push_back({v.rect[0], v.rect[1], true});
  }
  try {
    return triangulate(cams, points);
  } catch (const DegenerateGeometry&) {
    return fallback;
  } catch (const InsufficientObservations&) {
    return fallback;
  }
}

LmResult solve_box(const BoxState& shape, const std::vector<CameraConfig>& cameras,
                   std::span<const BoxView> views, const Vec3& init, const LmOptions& options) {
  LmProblem problem = [&](const Eigen::VectorXd& c, Eigen::VectorXd& r, Eigen::MatrixXd* j) {
    r.resize(4 * static_cast<Eigen::Index>(views.size()));
    if (j != nullptr) j->setZero(r.size(), 3);
    box_residuals(shape, cameras, views, Vec3(c), r, j);
  };
  return levenberg_marquardt(problem, init, options);
}

struct BoxSolution {
  LmResult lm;
  std::vector<BoxView> used;
};

std::vector<BoxView> select(std::span<const BoxView> all, const std::vector<double>& err,
                            double limit) {
  std::vector<BoxView> out;
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (err[i] <= limit) out.push_back(all[i]);
  }
  return out;
}

std::optional<BoxSolution> trimmed_box_fit(const BoxState& previous,
                                           const std::vector<CameraConfig>& cameras,
                                           std::span<const BoxView> all, std::vector<BoxView> start,
                                           const FitOptions& options,
                                           std::vector<std::vector<double>>& logs) {
  const std::size_t min_views = std::max<std::size_t>(2, options.min_box_views);
  std::vector<BoxView> used = std::move(start);
  LmResult lm;
  for (int round = 0; round < options.max_rounds; ++round) {
    if (used.size() < min_views) return std::nullopt;
    const Vec3 init = triangulate_centers(cameras, used, previous.center);
    lm = solve_box(previous, cameras, used, init, options.lm);
    logs.push_back(lm.cost_history);
    const BoxState fitted = box_at(previous, lm.params);
    const double limit =
        std::max(options.box_inlier_px, 3.0 * kMadScale * median(box_errors(fitted, cameras, used)));
    std::vector<BoxView> next = select(all, box_errors(fitted, cameras, all), limit);
    const bool settled = next.size() == used.size() && limit <= options.box_inlier_px;
    used = std::move(next);
    if (settled) break;
  }
  if (lm.params.size() == 0) return std::nullopt;
  std::vector<BoxView> inliers =
      select(all, box_errors(box_at(previous, lm.params), cameras, all), options.box_inlier_px);
  if (inliers.size() < min_views) return std::nullopt;
  if (inliers.size() != used.size()) {
    lm = solve_box(previous, cameras, inliers, lm.params, options.lm);
    logs.push_back(lm.cost_history);
  }
  return BoxSolution{std::move(lm), std::move(inliers)};
}

std::optional<BoxSolution> robust_box(const BoxState& previous,
                                      const std::vector<CameraConfig>& cameras,
                                      const std::vector<BoxView>& all, const FitOptions& options,
                                      std::vector<std::vector<double>>& logs) {
  if (all.size() < std::max<std::size_t>(2, options.min_box_views)) return std::nullopt;
  if (!options.robust) {
    const Vec3 init = triangulate_centers(cameras, all, previous.center);
    LmResult lm = solve_box(previous, cameras, all, init, options.lm);
    logs.push_back(lm.cost_history);
    return BoxSolution{std::move(lm), all};
  }
  std::optional<BoxSolution> best;
  auto consider = [&](std::optional<BoxSolution> candidate) {
    if (!candidate) return;
    if (!best || candidate->used.size() > best->used.size() ||
        (candidate->used.size() == best->used.size() && candidate->lm.cost < best->lm.cost)) {
      best = std::move(candidate);
    }
  };
  std::vector<BoxView> gated = select(all, box_errors(previous, cameras, all), options.prior_gate_px);
  const std::size_t gated_size = gated.size();
  consider(trimmed_box_fit(previous, cameras, all, std::move(gated), options, logs));
  if (gated_size != all.size()) consider(trimmed_box_fit(previous, cameras, all, all, options, logs));
  return best;
}

// ---- edge consistency ------------------------------------------------------

CameraConfig coarse_camera(const CameraConfig& cam) {
  CameraConfig c = cam;
  c.width = kEdgeGridWidth;
  c.height = kEdgeGridHeight;
  return c;
}

// Max-pools a full-resolution edge map onto the coarse grid.
std::vector<std::uint8_t> pool_edges(const EdgeMap& e) {
  std::vector<std::uint8_t> out(kEdgeGridWidth * kEdgeGridHeight, 0);
  for (int y = 0; y < e.height; ++y) {
    const int gy = y * kEdgeGridHeight / e.height;
    for (int x = 0; x < e.width; ++x) {
      if (e.at(x, y)) out[gy * kEdgeGridWidth + x * kEdgeGridWidth / e.width] = 1;
    }
  }
  return out;
}

Regeneration make_regeneration(const SemanticFrame& frame, const BaseKnowledge& base,
                               const ArmPose& pose, const BoxState& box) {
  return Regeneration{SceneState(frame.time, base.arm, pose, box, base.box_appearance, base.background),
                      {}, {}, false, false, 0.0, {}};
}

}  // namespace

Vec3 triangulate(const std::vector<CameraConfig>& cameras, const std::vector<ImagePoint>& points) {
  if (cameras.size() != points.size()) {
    throw ContractViolation("triangulate: one point per camera required");
  }
  Mat3 a = Mat3::Zero();
  Vec3 b = Vec3::Zero();
  std::size_t used = 0;
  for (std::size_t i = 0; i < cameras.size(); ++i) {
    if (!points[i].in_frustum) continue;
    const Ray ray = pixel_ray(cameras[i], points[i].x, points[i].y);
    const Mat3 p = Mat3::Identity() - ray.direction * ray.direction.transpose();
    a += p;
    b += p * ray.origin;
    ++used;
  }
  if (used < 2) throw InsufficientObservations("triangulate needs at least 2 views");
  const Eigen::SelfAdjointEigenSolver<Mat3> eig(a);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(lo > 0.0) || hi / lo > 1e8) throw DegenerateGeometry("triangulation rays are (nearly) parallel");
  return a.ldlt().solve(b);
}

std::vector<KeypointObservation> keypoint_observations(const SemanticFrame& frame,
                                                       const std::vector<CameraConfig>& cameras) {
  std::vector<KeypointObservation> out;
  for (const ViewSemantics& view : frame.views) {
    const std::size_t c = camera_index(cameras, view.camera_id);
    for (std::size_t k = 0; k < kKeypointCount; ++k) {
      const ImagePoint& p = view.keypoints[k];
      if (!p.in_frustum || !inside_image(cameras[c], p.x, p.y)) continue;
      out.push_back({c, k, Vec2(p.x, p.y)});
    }
  }
  return out;
}

Eigen::VectorXd arm_reprojection(const ArmModel& model, const std::vector<CameraConfig>& cameras,
                                 std::span<const KeypointObservation> observations,
                                 const ArmPose& pose, Eigen::MatrixXd* jacobian) {
  const ArmKinematics kin = arm_kinematics(model, pose);
  const auto m = static_cast<Eigen::Index>(observations.size());
  const auto n = static_cast<Eigen::Index>(pose.joint_angles.size());
  Eigen::VectorXd r(2 * m);
  if (jacobian != nullptr) jacobian->setZero(2 * m, n);
  Mat23 d;
  for (Eigen::Index i = 0; i < m; ++i) {
    const KeypointObservation& o = observations[static_cast<std::size_t>(i)];
    if (o.camera >= cameras.size() || o.keypoint >= kKeypointCount) {
      throw ContractViolation("keypoint observation out of range");
    }
    const Vec3& p = kin.keypoints[o.keypoint];
    r.segment<2>(2 * i) =
        project_with_jacobian(cameras[o.camera], p, jacobian ? &d : nullptr) - o.pixel;
    if (jacobian == nullptr) continue;
    for (std::size_t j = 0; j < o.keypoint; ++j) {
      const Vec3 dp = kin.world_axes[j].cross(p - kin.keypoints[j]);
      jacobian->block<2, 1>(2 * i, static_cast<Eigen::Index>(j)) = d * dp;
    }
  }
  return r;
}

FitResult fit_arm(const SemanticFrame& frame, const BaseKnowledge& base, const ArmPose& init,
                  const LmOptions& options) {
  const std::vector<KeypointObservation> obs = keypoint_observations(frame, base.cameras);
  if (obs.empty()) throw InsufficientObservations("no usable keypoints in frame");
  const LmResult lm = solve_arm(base.arm, base.cameras, obs, init, options);
  FitResult out;
  out.arm_pose = to_pose(lm.params, 0, init.joint_angles.size()).wrapped();
  out.box = base.initial_box;
  out.residual_px = rms_from_cost(lm.cost, obs.size());
  out.initial_residual_px = rms_from_cost(lm.cost_history.front(), obs.size());
  out.iterations = lm.iterations;
  out.converged = lm.converged;
  out.observations = obs.size();
  out.cost_history = lm.cost_history;
  return out;
}

BoxFit fit_box(const SemanticFrame& frame, const BaseKnowledge& base, const BoxState& previous,
               const LmOptions& options) {
  const std::vector<BoxView> views = box_views(frame, base.cameras);
  BoxFit out;
  out.box = previous;
  out.views = views.size();
  if (views.size() < 2) {
    out.stale = true;
    return out;
  }
  const Vec3 init = triangulate_centers(base.cameras, views, previous.center);
  const LmResult lm = solve_box(previous, base.cameras, views, init, options);
  out.box.center = lm.params;
  out.residual_px = rms_from_cost(lm.cost, views.size());
  out.cost_history = lm.cost_history;
  return out;
}

void ControlWeights::validate() const {
  for (double w : {canny, keypoints, box}) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("control weights must be finite and >= 0");
  }
  if (canny + keypoints + box <= 0.0) throw ConfigError("at least one control weight must be > 0");
}

double edge_consistency(const BaseKnowledge& base, const SceneState& state, int steps) {
  base.validate();
  const RenderOptions render{steps, 1e-6};
  const SceneState initial = base.initial_state();
  const SceneState initial_static = initial.static_only();
  const SceneState hypothesis = state.static_only();
  std::size_t compared = 0;
  std::size_t disagree = 0;
  for (std::size_t c = 0; c < base.cameras.size(); ++c) {
    const CameraConfig cam = coarse_camera(base.cameras[c]);
    const Image with_objects = render_image(initial, cam, render);
    const Image background = render_image(initial_static, cam, render);
    // Cells the moving objects covered at t = 0, grown by one cell.
    std::vector<std::uint8_t> covered(kEdgeGridWidth * kEdgeGridHeight, 0);
    for (int y = 0; y < kEdgeGridHeight; ++y) {
      for (int x = 0; x < kEdgeGridWidth; ++x) {
        if (!std::equal(with_objects.pixel(x, y), with_objects.pixel(x, y) + 3, background.pixel(x, y))) {
          for (int dy = -1; dy <= 1; ++dy) {
            for (int dx = -1; dx <= 1; ++dx) {
              const int gx = x + dx;
              const int gy = y + dy;
              if (gx >= 0 && gy >= 0 && gx < kEdgeGridWidth && gy < kEdgeGridHeight) {
                covered[gy * kEdgeGridWidth + gx] = 1;
              }
            }
          }
        }
      }
    }
    const EdgeMap predicted = edge_map(render_image(hypothesis, cam, render), kEdgeThreshold);
    const std::vector<std::uint8_t> pooled = pool_edges(base.edge_maps[c]);
    for (std::size_t i = 0; i < covered.size(); ++i) {
      if (covered[i]) continue;
      ++compared;
      if ((predicted.mask[i] != 0) != (pooled[i] != 0)) ++disagree;
    }
  }
  return compared == 0 ? 0.0 : static_cast<double>(disagree) / static_cast<double>(compared);
}

Regeneration regenerate_m(const SemanticFrame& frame, const BaseKnowledge& base,
                          const SceneState& previous, const FitOptions& options) {
  std::vector<std::vector<double>> logs;
  const std::vector<KeypointObservation> obs = keypoint_observations(frame, base.cameras);
  const std::optional<ArmSolution> arm =
      robust_arm(base.arm, base.cameras, obs, previous.arm_pose(), options, logs);
  const std::vector<BoxView> views = box_views(frame, base.cameras);
  const std::optional<BoxSolution> box = robust_box(previous.box(), base.cameras, views, options, logs);

  const ArmPose pose = arm ? to_pose(arm->lm.params, 0, kJointCount).wrapped() : previous.arm_pose();
  const BoxState box_state = box ? box_at(previous.box(), box->lm.params) : previous.box();
  Regeneration out = make_regeneration(frame, base, pose, box_state);
  out.arm_stale = !arm;
  out.box_stale = !box;
  out.arm_fit.arm_pose = pose;
  out.arm_fit.box = box_state;
  if (arm) {
    out.arm_fit.residual_px = rms_from_cost(arm->lm.cost, arm->used.size());
    out.arm_fit.initial_residual_px = rms_from_cost(arm->lm.cost_history.front(), arm->used.size());
    out.arm_fit.iterations = arm->lm.iterations;
    out.arm_fit.converged = arm->lm.converged;
    out.arm_fit.observations = arm->used.size();
    out.arm_fit.cost_history = arm->lm.cost_history;
  }
  out.box_fit.box = box_state;
  out.box_fit.stale = !box;
  if (box) {
    out.box_fit.residual_px = rms_from_cost(box->lm.cost, box->used.size());
    out.box_fit.views = box->used.size();
    out.box_fit.cost_history = box->lm.cost_history;
  }
  out.cost_logs = std::move(logs);
  return out;
}

Regeneration regenerate_s(const SemanticFrame& frame, const BaseKnowledge& base,
                          const SceneState& previous, const ControlWeights& weights,
                          const FitOptions& options, std::optional<double> edge_penalty) {
  weights.validate();
  std::vector<std::vector<double>> logs;

  // Inlier selection is shared with the model-based path; the final estimate
  // comes from one joint weighted problem over the selected evidence.
  std::optional<ArmSolution> arm;
  if (weights.keypoints > 0.0) {
    arm = robust_arm(base.arm, base.cameras, keypoint_observations(frame, base.cameras),
                     previous.arm_pose(), options, logs);
  }
  std::optional<BoxSolution> box;
  if (weights.box > 0.0) {
    box = robust_box(previous.box(), base.cameras, box_views(frame, base.cameras), options, logs);
  }
  double penalty = 0.0;
  if (weights.canny > 0.0) penalty = edge_penalty ? *edge_penalty : edge_consistency(base, previous);

  const Eigen::Index arm_params = arm ? static_cast<Eigen::Index>(kJointCount) : 0;
  const Eigen::Index box_params = box ? 3 : 0;
  Eigen::VectorXd init(arm_params + box_params);
  if (arm) init.head(arm_params) = arm->lm.params;
  if (box) init.tail(box_params) = box->lm.params;

  const std::vector<KeypointObservation> no_obs;
  const std::vector<BoxView> no_views;
  const std::vector<KeypointObservation>& kp = arm ? arm->used : no_obs;
  const std::vector<BoxView>& rects = box ? box->used : no_views;
  const double sk = std::sqrt(weights.keypoints);
  const double sb = std::sqrt(weights.box);
  const double edge_residual = std::sqrt(weights.canny * penalty);
  const auto kp_rows = 2 * static_cast<Eigen::Index>(kp.size());
  const auto box_rows = 4 * static_cast<Eigen::Index>(rects.size());

  LmProblem problem = [&](const Eigen::VectorXd& x, Eigen::VectorXd& r, Eigen::MatrixXd* j) {
    r.resize(kp_rows + box_rows + 1);
    if (j != nullptr) j->setZero(r.size(), x.size());
    if (arm_params > 0) {
      Eigen::MatrixXd jk;
      r.head(kp_rows) = sk * arm_reprojection(base.arm, base.cameras, kp,
                                              to_pose(x, 0, kJointCount), j ? &jk : nullptr);
      if (j != nullptr) j->topLeftCorner(kp_rows, arm_params) = sk * jk;
    }
    if (box_params > 0) {
      box_residuals(previous.box(), base.cameras, rects, Vec3(x.tail<3>()), r, j, kp_rows,
                    arm_params, sb);
    }
    r[kp_rows + box_rows] = edge_residual;  // background-only: no dependence on x
  };
  const LmResult lm = levenberg_marquardt(problem, init, options.lm);
  logs.push_back(lm.cost_history);

  const ArmPose pose = arm ? to_pose(lm.params, 0, kJointCount).wrapped() : previous.arm_pose();
  const BoxState box_state =
      box ? box_at(previous.box(), Vec3(lm.params.tail<3>())) : previous.box();
  Regeneration out = make_regeneration(frame, base, pose, box_state);
  out.arm_stale = weights.keypoints > 0.0 && !arm;
  out.box_stale = weights.box > 0.0 && !box;
  out.edge_penalty = penalty;
  out.arm_fit.arm_pose = pose;
  out.arm_fit.box = box_state;
  out.arm_fit.observations = kp.size();
  out.arm_fit.iterations = lm.iterations;
  out.arm_fit.converged = lm.converged;
  out.arm_fit.cost_history = lm.cost_history;
  if (arm) {
    Eigen::VectorXd r = arm_reprojection(base.arm, base.cameras, kp, pose);
    out.arm_fit.residual_px = rms_from_cost(r.squaredNorm(), kp.size());
    out.arm_fit.initial_residual_px = rms_from_cost(arm->lm.cost_history.front(), kp.size());
  }
  out.box_fit.box = box_state;
  out.box_fit.stale = out.box_stale;
  out.box_fit.views = rects.size();
  if (box) {
    const std::vector<double> e = box_errors(box_state, base.cameras, rects);
    double sq = 0.0;
    for (double v : e) sq += v * v;
    out.box_fit.residual_px = rms_from_cost(sq, e.size());
  }
  out.cost_logs = std::move(logs);
  return out;
}

Metaverse construct_metaverse(const SemanticFrame& frame, const BaseKnowledge& base,
                              const SceneState& previous, ReconstructionMode mode,
                              const ControlWeights& weights, const FitOptions& fit,
                              const CloudOptions& cloud) {
  Regeneration regen = mode == ReconstructionMode::model_based
                           ? regenerate_m(frame, base, previous, fit)
                           : regenerate_s(frame, base, previous, weights, fit);
  PointCloud points =
      extract_point_cloud(regen.state, base.cloud_bounds, cloud.voxel_size, cloud.sigma_min);
  return {std::move(regen), std::move(points)};
}

Regenerator::Regenerator(std::shared_ptr<const BaseKnowledge> base, ReconstructionMode mode,
                         ControlWeights weights, FitOptions fit, CloudOptions cloud,
                         std::optional<double> edge_penalty)
    : base_(std::move(base)),
      mode_(mode),
      weights_(weights),
      fit_(fit),
      cloud_(cloud),
      edge_penalty_(edge_penalty),
      previous_((base_ ? *base_ : throw ContractViolation("regenerator needs base knowledge"))
                    .initial_state()) {
  base_->validate();
  weights_.validate();
}

Metaverse Regenerator::step(const SemanticFrame& frame) {
  Regeneration regen = [&] {
    if (mode_ == ReconstructionMode::model_based) return regenerate_m(frame, *base_, previous_, fit_);
    if (!edge_penalty_ && weights_.canny > 0.0) edge_penalty_ = edge_consistency(*base_, previous_);
    return regenerate_s(frame, *base_, previous_, weights_, fit_, edge_penalty_);
  }();
  PointCloud points =
      extract_point_cloud(regen.state, base_->cloud_bounds, cloud_.voxel_size, cloud_.sigma_min);
  previous_ = regen.state;
  return {std::move(regen), std::move(points)};
}

}  // namespace semcom
