#include "semcom/scene.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Geometry>

#include "semcom/errors.hpp"

namespace semcom {

double wrap_angle(double radians) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  double wrapped = std::remainder(radians, kTwoPi);  // [-pi, pi]
  if (wrapped <= -std::numbers::pi) wrapped += kTwoPi;
  return wrapped;
}

void ArmModel::validate() const {
  if (link_lengths.size() != kJointCount || joint_axes.size() != kJointCount) {
    throw ContractViolation("arm model must have exactly 6 links and 6 joint axes");
  }
  for (double length : link_lengths) {
    if (!(length > 0.0)) throw ContractViolation("arm link lengths must be > 0");
  }
  for (const Vec3& axis : joint_axes) {
    if (std::abs(axis.norm() - 1.0) > 1e-9) {
      throw ContractViolation("arm joint axes must be unit vectors");
    }
  }
  if (!(link_radius > 0.0) || !(marker_radius >= 0.0) || !(density >= 0.0)) {
    throw ContractViolation("arm radii and density must be positive");
  }
}

ArmPose ArmPose::wrapped() const {
  ArmPose out = *this;
  for (double& q : out.joint_angles) q = wrap_angle(q);
  return out;
}

ArmKinematics arm_kinematics(const ArmModel& model, const ArmPose& pose) {
  if (pose.joint_angles.size() != model.joint_axes.size() ||
      model.joint_axes.size() != kJointCount ||
      model.link_lengths.size() != kJointCount) {
    throw ContractViolation("arm pose has " + std::to_string(pose.joint_angles.size()) +
                            " angles, model expects " + std::to_string(kJointCount));
  }
  ArmKinematics out;
  Mat3 rotation = Mat3::Identity();
  Vec3 position = model.base_position;
  out.keypoints[0] = position;
  for (std::size_t i = 0; i < kJointCount; ++i) {
    out.world_axes[i] = rotation * model.joint_axes[i];
    const double angle = wrap_angle(pose.joint_angles[i]);
    rotation = rotation * Eigen::AngleAxisd(angle, model.joint_axes[i]).toRotationMatrix();
    position += rotation * Vec3(0.0, model.link_lengths[i], 0.0);
    out.keypoints[i + 1] = position;
  }
  return out;
}

Keypoints3 forward_kinematics(const ArmModel& model, const ArmPose& pose) {
  return arm_kinematics(model, pose).keypoints;
}

std::array<Vec3, 8> BoxState::corners() const {
  const Mat3 rotation = Eigen::AngleAxisd(yaw, Vec3::UnitY()).toRotationMatrix();
  std::array<Vec3, 8> out;
  for (int i = 0; i < 8; ++i) {
    const Vec3 local((i & 1) ? half_extents.x() : -half_extents.x(),
                     (i & 2) ? half_extents.y() : -half_extents.y(),
                     (i & 4) ? half_extents.z() : -half_extents.z());
    out[static_cast<std::size_t>(i)] = center + rotation * local;
  }
  return out;
}

namespace {

bool same_shape(const std::variant<Slab, Sphere>& a, const std::variant<Slab, Sphere>& b) {
  if (a.index() != b.index()) return false;
  if (const auto* sa = std::get_if<Slab>(&a)) {
    const auto& sb = std::get<Slab>(b);
    return sa->min == sb.min && sa->max == sb.max;
  }
  const auto& pa = std::get<Sphere>(a);
  const auto& pb = std::get<Sphere>(b);
  return pa.center == pb.center && pa.radius == pb.radius;
}

}  // namespace

bool operator==(const Background& a, const Background& b) {
  if (a.sky_color != b.sky_color || a.primitives.size() != b.primitives.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.primitives.size(); ++i) {
    const auto& pa = a.primitives[i];
    const auto& pb = b.primitives[i];
    if (!same_shape(pa.shape, pb.shape) || pa.color != pb.color ||
        pa.density != pb.density) {
      return false;
    }
  }
  return true;
}

SceneState::SceneState(std::int64_t time, ArmModel arm, ArmPose pose, BoxState box,
                       BoxAppearance box_look,
                       std::shared_ptr<const Background> background)
    : time_(time),
      arm_(std::move(arm)),
      pose_(std::move(pose)),
      box_(std::move(box)),
      box_look_(std::move(box_look)),
      background_(std::move(background)) {
  if (!background_) background_ = std::make_shared<const Background>();
  if (time_ < 0) throw ContractViolation("scene time must be >= 0");
  arm_.validate();
  if ((box_.half_extents.array() <= 0.0).any()) {
    throw ContractViolation("box half extents must be > 0");
  }
  keypoints_ = forward_kinematics(arm_, pose_);
}

SceneState SceneState::with_objects(ArmPose pose, BoxState box) const {
  SceneState out(time_, arm_, std::move(pose), std::move(box), box_look_, background_);
  out.has_objects_ = has_objects_;
  return out;
}

SceneState SceneState::static_only() const {
  SceneState out = *this;
  out.has_objects_ = false;
  return out;
}

FieldSample scene_field(const SceneState& state, const Vec3& position) {
  return SceneFieldEvaluator(state).sample(position);
}

// ---------------------------------------------------------------------------

namespace {

using Shape = SceneFieldEvaluator::Shape;
using ShapeKind = SceneFieldEvaluator::ShapeKind;

bool contains(const Shape& s, const Vec3& p) {
  switch (s.kind) {
    case ShapeKind::sphere:
      return (p - s.a).squaredNorm() <= s.radius * s.radius;
    case ShapeKind::capsule: {
      const Vec3 axis = s.b - s.a;
      const double t = std::clamp((p - s.a).dot(axis) / axis.squaredNorm(), 0.0, 1.0);
      return (p - (s.a + t * axis)).squaredNorm() <= s.radius * s.radius;
    }
    case ShapeKind::oriented_box: {
      const Vec3 local = s.rotation.transpose() * (p - s.a);
      return std::abs(local.x()) <= s.b.x() && std::abs(local.y()) <= s.b.y() &&
             std::abs(local.z()) <= s.b.z();
    }
    case ShapeKind::slab:
      return (p.array() >= s.a.array()).all() && (p.array() <= s.b.array()).all();
  }
  return false;
}

// Ray parameter interval where the ray is inside a ball; false if it misses.
bool ball_interval(const Vec3& origin, const Vec3& dir, const Vec3& center,
                   double radius, double& enter, double& exit) {
  const Vec3 oc = origin - center;
  const double a = dir.squaredNorm();
  const double half_b = oc.dot(dir);
  const double c = oc.squaredNorm() - radius * radius;
  const double disc = half_b * half_b - a * c;
  if (disc < 0.0) return false;
  const double root = std::sqrt(disc);
  enter = (-half_b - root) / a;
  exit = (-half_b + root) / a;
  return true;
}

bool aabb_interval(const Vec3& origin, const Vec3& dir, const Vec3& lo, const Vec3& hi,
                   double& enter, double& exit) {
  enter = -std::numeric_limits<double>::infinity();
  exit = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 3; ++k) {
    if (dir[k] == 0.0) {
      if (origin[k] < lo[k] || origin[k] > hi[k]) return false;
      continue;
    }
    double t0 = (lo[k] - origin[k]) / dir[k];
    double t1 = (hi[k] - origin[k]) / dir[k];
    if (t0 > t1) std::swap(t0, t1);
    enter = std::max(enter, t0);
    exit = std::min(exit, t1);
  }
  return enter <= exit;
}

}  // namespace

SceneFieldEvaluator::SceneFieldEvaluator(const SceneState& state)
    : sky_(state.background().sky_color) {
  if (state.has_moving_objects()) {
    const ArmModel& arm = state.arm();
    const Keypoints3& kp = state.keypoints();
    if (arm.marker_radius > 0.0) {
      for (std::size_t i = 0; i < kKeypointCount; ++i) {
        shapes_.push_back({ShapeKind::sphere, kp[i], Vec3::Zero(), arm.marker_radius,
                           Mat3::Identity(), arm.marker_colors[i], arm.density});
      }
    }
    for (std::size_t i = 0; i < kJointCount; ++i) {
      shapes_.push_back({ShapeKind::capsule, kp[i], kp[i + 1], arm.link_radius,
                         Mat3::Identity(), arm.link_color, arm.density});
    }
    const BoxState& box = state.box();
    shapes_.push_back({ShapeKind::oriented_box, box.center, box.half_extents, 0.0,
                       Eigen::AngleAxisd(box.yaw, Vec3::UnitY()).toRotationMatrix(),
                       state.box_appearance().color, state.box_appearance().density});
  }
  for (const auto& prim : state.background().primitives) {
    if (const auto* slab = std::get_if<Slab>(&prim.shape)) {
      shapes_.push_back({ShapeKind::slab, slab->min, slab->max, 0.0, Mat3::Identity(),
                         prim.color, prim.density});
    } else {
      const auto& sphere = std::get<Sphere>(prim.shape);
      shapes_.push_back({ShapeKind::sphere, sphere.center, Vec3::Zero(), sphere.radius,
                         Mat3::Identity(), prim.color, prim.density});
    }
  }
}

FieldSample SceneFieldEvaluator::sample(const Vec3& p) const {
  for (const Shape& s : shapes_) {
    if (contains(s, p)) return {s.density, s.color};
  }
  return {0.0, sky_};
}

void SceneFieldEvaluator::cull(const Vec3& origin, const Vec3& direction,
                               std::vector<Candidate>& out) const {
  out.clear();
  for (std::uint32_t i = 0; i < shapes_.size(); ++i) {
    const Shape& s = shapes_[i];
    double enter = 0.0;
    double exit = 0.0;
    bool hit = false;
    switch (s.kind) {
      case ShapeKind::sphere:
        hit = ball_interval(origin, direction, s.a, s.radius, enter, exit);
        break;
      case ShapeKind::capsule:
        hit = ball_interval(origin, direction, 0.5 * (s.a + s.b),
                            0.5 * (s.b - s.a).norm() + s.radius, enter, exit);
        break;
      case ShapeKind::oriented_box:
        hit = ball_interval(origin, direction, s.a, s.b.norm(), enter, exit);
        break;
      case ShapeKind::slab:
        hit = aabb_interval(origin, direction, s.a, s.b, enter, exit);
        break;
    }
    if (!hit) continue;
    // Pad so floating-point noise in the interval never drops a true hit.
    const double pad = 1e-9 * (1.0 + std::abs(enter) + std::abs(exit));
    out.push_back({i, enter - pad, exit + pad});
  }
}

FieldSample SceneFieldEvaluator::sample_along(
    const Vec3& p, double l, const std::vector<Candidate>& candidates) const {
  for (const Candidate& c : candidates) {
    if (l < c.enter || l > c.exit) continue;
    const Shape& s = shapes_[c.shape];
    if (contains(s, p)) return {s.density, s.color};
  }
  return {0.0, sky_};
}

// ---------------------------------------------------------------------------

void Scenario::validate() const {
  arm.validate();
  const auto& m = arm_motion;
  if (m.initial.size() != kJointCount || m.amplitude.size() != kJointCount ||
      m.frequency_hz.size() != kJointCount || m.phase.size() != kJointCount) {
    throw ConfigError("arm motion needs 6 values for initial/amplitude/frequency/phase");
  }
  if (!(frame_period_s > 0.0)) throw ConfigError("frame period must be > 0");
  if ((box_initial.half_extents.array() <= 0.0).any()) {
    throw ConfigError("box half extents must be > 0");
  }
  if (box_initial.center.y() < box_initial.half_extents.y()) {
    throw ConfigError("box must rest on or above the floor plane (center.y >= half_extents.y)");
  }
  if (!background) throw ConfigError("scenario has no background");
  if ((cloud_bounds.max.array() < cloud_bounds.min.array()).any()) {
    throw ConfigError("cloud bounds max must be >= min");
  }
}

SceneState animate(const Scenario& scenario, std::int64_t t) {
  if (t < 0) throw ContractViolation("frame index must be >= 0");
  const double tau = static_cast<double>(t) * scenario.frame_period_s;
  const ArmMotion& motion = scenario.arm_motion;
  ArmPose pose;
  pose.joint_angles.resize(kJointCount);
  for (std::size_t i = 0; i < kJointCount; ++i) {
    pose.joint_angles[i] = wrap_angle(
        motion.initial[i] +
        motion.amplitude[i] *
            std::sin(2.0 * std::numbers::pi * motion.frequency_hz[i] * tau + motion.phase[i]) -
        motion.amplitude[i] * std::sin(motion.phase[i]));
  }
  BoxState box = scenario.box_initial;
  box.center += scenario.box_velocity * tau;
  return SceneState(t, scenario.arm, std::move(pose), std::move(box),
                    scenario.box_appearance, scenario.background);
}

namespace {

Rgb rgb8(int r, int g, int b) { return Rgb(r / 255.0, g / 255.0, b / 255.0); }

Scenario factory_scenario() {
  Scenario s;
  s.name = "factory";
  s.frame_period_s = 0.1;

  ArmModel& arm = s.arm;
  arm.base_position = Vec3(0.0, 0.0, 0.0);
  arm.link_lengths = {0.5, 0.7, 0.6, 0.35, 0.3, 0.25};
  arm.joint_axes = {Vec3::UnitY(), Vec3::UnitZ(), Vec3::UnitZ(),
                    Vec3::UnitY(), Vec3::UnitZ(), Vec3::UnitX()};
  arm.link_radius = 0.05;
  arm.marker_radius = 0.08;
  arm.density = 50.0;
  arm.link_color = rgb8(200, 200, 205);
  arm.marker_colors = {rgb8(230, 31, 31),  rgb8(31, 204, 31), rgb8(38, 64, 242),
                       rgb8(242, 230, 26), rgb8(230, 38, 230), rgb8(26, 230, 230),
                       rgb8(255, 140, 13)};

  s.arm_motion.initial = {0.3, 0.5, -0.8, 0.4, 0.9, -0.5};
  s.arm_motion.amplitude = {0.3, 0.2, 0.25, 0.3, 0.2, 0.3};
  s.arm_motion.frequency_hz = {0.5, 0.4, 0.6, 0.7, 0.5, 0.8};
  s.arm_motion.phase = {0.0, 0.0, 0.0, 0.0, 0.0, 0.0};

  s.box_initial.center = Vec3(-1.2, 0.25, 1.0);
  s.box_initial.half_extents = Vec3(0.25, 0.25, 0.25);
  s.box_initial.yaw = 0.3;
  s.box_velocity = Vec3(0.5, 0.0, 0.0);
  s.box_appearance.color = rgb8(153, 102, 51);
  s.box_appearance.density = 50.0;

  auto background = std::make_shared<Background>();
  background->sky_color = rgb8(20, 20, 40);
  background->primitives.push_back(
      {Slab{Vec3(-3.0, -0.1, -3.0), Vec3(3.0, 0.0, 3.0)}, rgb8(90, 90, 90), 50.0});
  background->primitives.push_back(
      {Slab{Vec3(1.2, 0.0, -2.0), Vec3(2.2, 0.8, -1.2)}, rgb8(64, 115, 77), 50.0});
  background->primitives.push_back(
      {Sphere{Vec3(-1.6, 0.6, -1.4), 0.6}, rgb8(115, 89, 140), 50.0});
  s.background = std::move(background);

  s.cloud_bounds.min = Vec3(-3.0, -0.2, -3.0);
  s.cloud_bounds.max = Vec3(3.0, 3.0, 3.0);
  return s;
}

}  // namespace

Scenario builtin_scenario(std::string_view name) {
  if (name == "factory") return factory_scenario();
  throw ConfigError("unknown scenario '" + std::string(name) + "'");
}

std::vector<std::string> builtin_scenario_names() { return {"factory"}; }

}  // namespace semcom
