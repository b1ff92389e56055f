#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Core>

namespace semcom {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
// Linear RGB in [0, 1].
using Rgb = Eigen::Vector3d;

inline constexpr std::size_t kJointCount = 6;
inline constexpr std::size_t kKeypointCount = kJointCount + 1;

using Keypoints3 = std::array<Vec3, kKeypointCount>;

/// Wraps an angle into (-pi, pi].
double wrap_angle(double radians);

/// Six-joint revolute chain. Link i leaves keypoint i along the local +y axis
/// after the cumulative rotation of joints 0..i. Joint markers (small spheres
/// with distinct colors) sit on every keypoint so the chain is identifiable in
/// rendered images.
struct ArmModel {
  std::vector<double> link_lengths;
  Vec3 base_position = Vec3::Zero();
  std::vector<Vec3> joint_axes;
  double link_radius = 0.05;
  double marker_radius = 0.08;
  double density = 50.0;
  Rgb link_color = Rgb(0.78, 0.78, 0.80);
  std::array<Rgb, kKeypointCount> marker_colors{};

  /// Throws ContractViolation when the model breaks its invariants.
  void validate() const;
};

struct ArmPose {
  std::vector<double> joint_angles;

  /// Copy with every angle wrapped into (-pi, pi].
  ArmPose wrapped() const;
};

struct ArmKinematics {
  Keypoints3 keypoints;
  // World-space rotation axis of each joint; joint i pivots about keypoint i.
  std::array<Vec3, kJointCount> world_axes;
};

ArmKinematics arm_kinematics(const ArmModel& model, const ArmPose& pose);
Keypoints3 forward_kinematics(const ArmModel& model, const ArmPose& pose);

struct BoxState {
  Vec3 center = Vec3::Zero();
  Vec3 half_extents = Vec3::Constant(0.25);
  double yaw = 0.0;  // about +y

  /// The 8 world-space corners, ordered by the sign bits (x, y, z).
  std::array<Vec3, 8> corners() const;
};

struct BoxAppearance {
  Rgb color = Rgb(0.60, 0.40, 0.20);
  double density = 50.0;
};

struct Slab {
  Vec3 min;
  Vec3 max;
};

struct Sphere {
  Vec3 center;
  double radius = 0.0;
};

struct BackgroundPrimitive {
  std::variant<Slab, Sphere> shape;
  Rgb color = Rgb::Zero();
  double density = 50.0;
};

struct Background {
  Rgb sky_color = Rgb(0.08, 0.08, 0.16);
  std::vector<BackgroundPrimitive> primitives;
};

bool operator==(const Background& a, const Background& b);

/// Immutable ground-truth world at one frame index. Keypoints are computed
/// once at construction so field queries never redo the kinematics.
class SceneState {
 public:
  SceneState(std::int64_t time, ArmModel arm, ArmPose pose, BoxState box,
             BoxAppearance box_look, std::shared_ptr<const Background> background);

  std::int64_t time() const { return time_; }
  const ArmModel& arm() const { return arm_; }
  const ArmPose& arm_pose() const { return pose_; }
  const BoxState& box() const { return box_; }
  const BoxAppearance& box_appearance() const { return box_look_; }
  const Background& background() const { return *background_; }
  const std::shared_ptr<const Background>& shared_background() const {
    return background_;
  }
  const Keypoints3& keypoints() const { return keypoints_; }

  /// Same world with the moving objects replaced.
  SceneState with_objects(ArmPose pose, BoxState box) const;
  /// Same world without the arm and box (static background only).
  SceneState static_only() const;
  bool has_moving_objects() const { return has_objects_; }

 private:
  std::int64_t time_;
  ArmModel arm_;
  ArmPose pose_;
  BoxState box_;
  BoxAppearance box_look_;
  std::shared_ptr<const Background> background_;
  Keypoints3 keypoints_;
  bool has_objects_ = true;
};

struct FieldSample {
  double density = 0.0;
  Rgb color = Rgb::Zero();
};

/// Analytic density/color field. Primitives are piecewise constant and the
/// first containing primitive wins, in the order: joint markers, arm links,
/// box, background primitives. Empty space returns the sky color.
FieldSample scene_field(const SceneState& state, const Vec3& position);

/// Flattened primitive list of a SceneState, shared by field queries and the
/// renderer's per-ray culling.
class SceneFieldEvaluator {
 public:
  enum class ShapeKind : std::uint8_t { sphere, capsule, oriented_box, slab };

  struct Shape {
    ShapeKind kind;
    Vec3 a;        // sphere center, capsule start, box center, slab min
    Vec3 b;        // capsule end, box half extents, slab max
    double radius; // sphere/capsule radius
    Mat3 rotation; // oriented box: local -> world
    Rgb color;
    double density;
  };

  // A shape whose bounding volume the ray overlaps on [enter, exit].
  struct Candidate {
    std::uint32_t shape;
    double enter;
    double exit;
  };

  explicit SceneFieldEvaluator(const SceneState& state);

  FieldSample sample(const Vec3& p) const;

  /// Candidates for the ray origin + l * direction, in precedence order.
  void cull(const Vec3& origin, const Vec3& direction,
            std::vector<Candidate>& out) const;

  /// Equivalent to sample(origin + l * direction) as long as `candidates`
  /// came from cull() on the same ray.
  FieldSample sample_along(const Vec3& p, double l,
                           const std::vector<Candidate>& candidates) const;

  const Rgb& sky_color() const { return sky_; }
  const std::vector<Shape>& shapes() const { return shapes_; }

 private:
  std::vector<Shape> shapes_;
  Rgb sky_;
};

/// Arm joint trajectory
///   q_i(tau) = initial_i + amplitude_i * (sin(2 pi f_i tau + phase_i) - sin(phase_i))
/// with tau = frame index * frame period, so q(0) is exactly `initial`.
struct ArmMotion {
  std::vector<double> initial;
  std::vector<double> amplitude;
  std::vector<double> frequency_hz;
  std::vector<double> phase;
};

struct Bounds {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Zero();
};

/// Everything needed to regenerate the ground-truth world at any frame.
struct Scenario {
  std::string name;
  double frame_period_s = 0.1;
  ArmModel arm;
  ArmMotion arm_motion;
  BoxState box_initial;
  Vec3 box_velocity = Vec3::Zero();  // m/s, linear in time
  BoxAppearance box_appearance;
  std::shared_ptr<const Background> background;
  Bounds cloud_bounds;

  void validate() const;
};

/// Deterministic state of `scenario` at frame `t` (t >= 0).
SceneState animate(const Scenario& scenario, std::int64_t t);

/// Built-in scenarios by name (currently "factory"). Unknown name -> ConfigError.
Scenario builtin_scenario(std::string_view name);
std::vector<std::string> builtin_scenario_names();

}  // namespace semcom
