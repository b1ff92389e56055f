#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "semcom/camera.hpp"
#include "semcom/levenberg_marquardt.hpp"
#include "semcom/render.hpp"
#include "semcom/scene.hpp"
#include "semcom/semantics.hpp"

namespace semcom {

/// Session preamble sent once at t = 0: edge maps of the first frame, the
/// camera rig, and the objects' models and initial placement.
struct BaseKnowledge {
  std::vector<EdgeMap> edge_maps;  // one per camera, same order
  std::vector<CameraConfig> cameras;
  ArmModel arm;
  ArmPose initial_pose;
  BoxState initial_box;
  BoxAppearance box_appearance;
  std::shared_ptr<const Background> background;
  Bounds cloud_bounds;

  void validate() const;
  /// The world as it was at t = 0.
  SceneState initial_state() const;
  const CameraConfig& camera(int id) const;
};

struct BaseKnowledgeOptions {
  double edge_threshold = 0.2;
  RenderOptions render;
};

BaseKnowledge build_base_knowledge(const Scenario& scenario,
                                   const std::vector<CameraConfig>& rig,
                                   const BaseKnowledgeOptions& options = {});

/// Little-endian binary layout, magic "SCBK" + u32 version, then
///   camera block : u32 n, per camera i32 id, f64 position[3], f64 R[9] (row
///                  major), f64 fov, aspect, near, far, u32 width, height
///   object block : arm (u32 joints, f64 links[n], base[3], axes[3n], link
///                  radius, marker radius, density, link color[3], marker
///                  colors[21]), f64 initial pose[n], box center[3], half
///                  extents[3], yaw, color[3], density, sky color[3], u32
///                  primitive count, per primitive u8 kind (0 slab, 1 sphere)
///                  + f64 params[6] + color[3] + density, cloud bounds[6]
///   edge block   : u32 n, per map u32 width, height, packed bits (MSB first)
std::vector<std::uint8_t> serialize_base_knowledge(const BaseKnowledge& base);
BaseKnowledge deserialize_base_knowledge(std::span<const std::uint8_t> bytes);
void save_base_knowledge(const std::filesystem::path& path, const BaseKnowledge& base);
BaseKnowledge load_base_knowledge(const std::filesystem::path& path);

/// Least-squares intersection of the pixel rays of the in-frustum points.
/// Fewer than 2 usable views -> InsufficientObservations; a normal matrix with
/// condition number above 1e8 -> DegenerateGeometry.
Vec3 triangulate(const std::vector<CameraConfig>& cameras,
                 const std::vector<ImagePoint>& points);

/// One received keypoint: camera index into the rig, keypoint index, pixel.
struct KeypointObservation {
  std::size_t camera = 0;
  std::size_t keypoint = 0;
  Eigen::Vector2d pixel = Eigen::Vector2d::Zero();
};

/// Usable keypoints of `frame`: validity flag set and inside the image.
std::vector<KeypointObservation> keypoint_observations(
    const SemanticFrame& frame, const std::vector<CameraConfig>& cameras);

/// Stacked reprojection residuals (projected - observed, 2 per observation)
/// and, optionally, their analytic Jacobian with respect to the joint angles.
Eigen::VectorXd arm_reprojection(const ArmModel& model, const std::vector<CameraConfig>& cameras,
                                 std::span<const KeypointObservation> observations,
                                 const ArmPose& pose, Eigen::MatrixXd* jacobian = nullptr);

struct FitResult {
  ArmPose arm_pose;
  BoxState box;
  double residual_px = 0.0;          // RMS reprojection distance over used observations
  double initial_residual_px = 0.0;
  int iterations = 0;
  bool converged = false;
  std::size_t observations = 0;
  std::vector<double> cost_history;  // sum of squared px residuals per accepted step
};

/// Plain Levenberg-Marquardt fit of the arm pose to every usable keypoint.
/// No view with usable keypoints -> InsufficientObservations.
FitResult fit_arm(const SemanticFrame& frame, const BaseKnowledge& base, const ArmPose& init,
                  const LmOptions& options = {});

struct BoxFit {
  BoxState box;
  bool stale = false;
  double residual_px = 0.0;
  std::size_t views = 0;
  std::vector<double> cost_history;
};

/// Box center from the received rectangles: triangulated rectangle centers,
/// refined by least squares on the 4 rectangle parameters (rectangle centers
/// are perspective-biased). Size comes from base knowledge, yaw stays at its
/// initial value. Fewer than 2 usable views -> `previous` returned, stale.
BoxFit fit_box(const SemanticFrame& frame, const BaseKnowledge& base, const BoxState& previous,
               const LmOptions& options = {});

struct ControlWeights {
  double canny = 1.0;
  double keypoints = 1.0;
  double box = 1.0;

  void validate() const;
};

enum class ReconstructionMode : std::uint8_t { model_based, scenery_based };

/// Outlier handling shared by both regeneration modes.
struct FitOptions {
  LmOptions lm;
  bool robust = true;
  double inlier_px = 3.0;           // final keypoint inlier radius
  double box_inlier_px = 4.0;       // final rectangle inlier radius (4-vector norm)
  double prior_gate_px = 20.0;      // gate against the previous estimate
  int max_rounds = 5;
  std::size_t min_keypoints = 10;   // below this the arm fit is declared failed
  std::size_t min_box_views = 2;
};

struct Regeneration {
  SceneState state;
  FitResult arm_fit;
  BoxFit box_fit;
  bool arm_stale = false;
  bool box_stale = false;
  double edge_penalty = 0.0;
  // Cost histories of every LM solve performed (for monotonicity audits).
  std::vector<std::vector<double>> cost_logs;
};

/// Fraction of 64x32 grid cells, outside the t = 0 moving-object footprint,
/// where the edges of `state`'s static background disagree with the
/// (max-pooled) base edge maps.
double edge_consistency(const BaseKnowledge& base, const SceneState& state, int steps = 64);

/// Model-based regeneration: arm and box are fitted independently and placed
/// into the base-knowledge background. Failed fits reuse `previous`.
Regeneration regenerate_m(const SemanticFrame& frame, const BaseKnowledge& base,
                          const SceneState& previous, const FitOptions& options = {});

/// Scenery-based regeneration: one weighted least-squares problem over
/// (arm pose, box center) with keypoint, box and edge-consistency terms.
/// `edge_penalty` may carry a precomputed edge_consistency() value; the edge
/// term only involves the static background, so it is the same every frame.
Regeneration regenerate_s(const SemanticFrame& frame, const BaseKnowledge& base,
                          const SceneState& previous, const ControlWeights& weights,
                          const FitOptions& options = {},
                          std::optional<double> edge_penalty = std::nullopt);

struct CloudOptions {
  double voxel_size = 0.1;
  double sigma_min = 1.0;
};

struct Metaverse {
  Regeneration regeneration;
  PointCloud cloud;
};

Metaverse construct_metaverse(const SemanticFrame& frame, const BaseKnowledge& base,
                              const SceneState& previous, ReconstructionMode mode,
                              const ControlWeights& weights, const FitOptions& fit = {},
                              const CloudOptions& cloud = {});

/// Sequential edge-side reconstruction: each frame initializes from the
/// previous result, starting from base knowledge at t = 0.
class Regenerator {
 public:
  /// `edge_penalty` lets callers share one edge_consistency() evaluation
  /// between regenerators built on the same base knowledge.
  Regenerator(std::shared_ptr<const BaseKnowledge> base, ReconstructionMode mode,
              ControlWeights weights = {}, FitOptions fit = {}, CloudOptions cloud = {},
              std::optional<double> edge_penalty = std::nullopt);

  Metaverse step(const SemanticFrame& frame);
  const SceneState& previous() const { return previous_; }

 private:
  std::shared_ptr<const BaseKnowledge> base_;
  ReconstructionMode mode_;
  ControlWeights weights_;
  FitOptions fit_;
  CloudOptions cloud_;
  std::optional<double> edge_penalty_;
  SceneState previous_;
};

}  // namespace semcom
