#include <cmath>
#include <numbers>

#include <doctest.h>

#include "semcom/errors.hpp"
#include "semcom/render.hpp"
#include "semcom/scene.hpp"
#include "test_support.hpp"

using namespace semcom;
using semcom::testing::Gen;

namespace {

// Rodrigues' formula written out, independent of Eigen's AngleAxis.
Mat4 rotation4(const Vec3& axis, double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  const double x = axis.x();
  const double y = axis.y();
  const double z = axis.z();
  Mat4 m = Mat4::Identity();
  m(0, 0) = c + x * x * (1 - c);
  m(0, 1) = x * y * (1 - c) - z * s;
  m(0, 2) = x * z * (1 - c) + y * s;
  m(1, 0) = y * x * (1 - c) + z * s;
  m(1, 1) = c + y * y * (1 - c);
  m(1, 2) = y * z * (1 - c) - x * s;
  m(2, 0) = z * x * (1 - c) - y * s;
  m(2, 1) = z * y * (1 - c) + x * s;
  m(2, 2) = c + z * z * (1 - c);
  return m;
}

Mat4 translation4(const Vec3& t) {
  Mat4 m = Mat4::Identity();
  m.block<3, 1>(0, 3) = t;
  return m;
}

// Chain of homogeneous transforms: each joint rotates in its parent frame,
// then the link translates along the new local +y.
Keypoints3 homogeneous_fk(const ArmModel& arm, const ArmPose& pose) {
  Keypoints3 out;
  Mat4 t = translation4(arm.base_position);
  out[0] = t.block<3, 1>(0, 3);
  for (std::size_t i = 0; i < kJointCount; ++i) {
    t = t * rotation4(arm.joint_axes[i], pose.joint_angles[i]) *
        translation4(Vec3(0.0, arm.link_lengths[i], 0.0));
    out[i + 1] = t.block<3, 1>(0, 3);
  }
  return out;
}

}  // namespace

TEST_CASE("wrap_angle lands in (-pi, pi] and preserves the angle modulo 2 pi") {
  Gen gen(1);
  for (int i = 0; i < 2000; ++i) {
    const double a = gen.uniform(-50.0, 50.0);
    const double w = wrap_angle(a);
    CHECK(w > -std::numbers::pi);
    CHECK(w <= std::numbers::pi);
    const double turns = (a - w) / (2.0 * std::numbers::pi);
    CHECK(std::abs(turns - std::round(turns)) < 1e-9);
  }
  CHECK(wrap_angle(-std::numbers::pi) == doctest::Approx(std::numbers::pi));
  CHECK(wrap_angle(std::numbers::pi) == doctest::Approx(std::numbers::pi));
}

TEST_CASE("forward kinematics matches a homogeneous-transform chain") {
  const ArmModel arm = builtin_scenario("factory").arm;
  Gen gen(2);
  for (int trial = 0; trial < 200; ++trial) {
    const ArmPose pose = gen.pose(3.0);
    const Keypoints3 got = forward_kinematics(arm, pose);
    const Keypoints3 want = homogeneous_fk(arm, pose);
    for (std::size_t k = 0; k < kKeypointCount; ++k) CHECK((got[k] - want[k]).norm() < 1e-12);
  }
}

TEST_CASE("zero pose stacks the links straight up from the base") {
  const ArmModel arm = builtin_scenario("factory").arm;
  ArmPose pose;
  pose.joint_angles.assign(kJointCount, 0.0);
  const Keypoints3 kp = forward_kinematics(arm, pose);
  double height = 0.0;
  for (std::size_t i = 0; i < kJointCount; ++i) {
    height += arm.link_lengths[i];
    CHECK((kp[i + 1] - Vec3(0.0, height, 0.0)).norm() < 1e-15);
  }
  CHECK(height == doctest::Approx(2.7));
}

TEST_CASE("link lengths are invariant under any pose") {
  const ArmModel arm = builtin_scenario("factory").arm;
  Gen gen(3);
  for (int trial = 0; trial < 200; ++trial) {
    const Keypoints3 kp = forward_kinematics(arm, gen.pose(4.0));
    for (std::size_t i = 0; i < kJointCount; ++i) {
      CHECK((kp[i + 1] - kp[i]).norm() == doctest::Approx(arm.link_lengths[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("arm_kinematics rejects a pose with the wrong dimension") {
  const ArmModel arm = builtin_scenario("factory").arm;
  ArmPose pose;
  pose.joint_angles.assign(5, 0.0);
  CHECK_THROWS_AS(forward_kinematics(arm, pose), ContractViolation);
}

TEST_CASE("box corners follow yaw about +y") {
  BoxState box;
  box.center = Vec3(1.0, 2.0, 3.0);
  box.half_extents = Vec3(0.5, 0.25, 0.125);
  box.yaw = 0.7;
  const auto corners = box.corners();
  const double c = std::cos(box.yaw);
  const double s = std::sin(box.yaw);
  for (int i = 0; i < 8; ++i) {
    const Vec3 local((i & 1 ? 1 : -1) * 0.5, (i & 2 ? 1 : -1) * 0.25, (i & 4 ? 1 : -1) * 0.125);
    const Vec3 world(c * local.x() + s * local.z(), local.y(), -s * local.x() + c * local.z());
    CHECK((corners[static_cast<std::size_t>(i)] - (box.center + world)).norm() < 1e-12);
  }
}

TEST_CASE("scene field picks markers, links, box, background, sky in that order") {
  const Scenario sc = builtin_scenario("factory");
  const SceneState state = animate(sc, 0);
  const FieldSample marker = scene_field(state, state.keypoints()[3]);
  CHECK((marker.color - sc.arm.marker_colors[3]).norm() < 1e-12);
  CHECK(marker.density == doctest::Approx(sc.arm.density));

  const Vec3 mid_link = (state.keypoints()[1] + state.keypoints()[2]) / 2.0;
  CHECK((scene_field(state, mid_link).color - sc.arm.link_color).norm() < 1e-12);

  const FieldSample box = scene_field(state, state.box().center);
  CHECK((box.color - sc.box_appearance.color).norm() < 1e-12);

  const FieldSample floor = scene_field(state, Vec3(2.5, -0.05, 2.5));
  CHECK(floor.density == doctest::Approx(50.0));

  const FieldSample air = scene_field(state, Vec3(0.0, 2.9, 2.9));
  CHECK(air.density == 0.0);
  CHECK((air.color - sc.background->sky_color).norm() < 1e-12);
}

TEST_CASE("culled evaluation equals the full field on random rays") {
  const SceneState state = animate(builtin_scenario("factory"), 2);
  const SceneFieldEvaluator field(state);
  std::vector<SceneFieldEvaluator::Candidate> candidates;
  Gen gen(4);
  for (int ray = 0; ray < 300; ++ray) {
    const Vec3 origin = gen.vec(-4.0, 4.0);
    const Vec3 dir = gen.unit();
    field.cull(origin, dir, candidates);
    for (int i = 0; i < 60; ++i) {
      const double l = gen.uniform(0.0, 10.0);
      const Vec3 p = origin + l * dir;
      const FieldSample a = field.sample_along(p, l, candidates);
      const FieldSample b = scene_field(state, p);
      CHECK(a.density == b.density);
      CHECK(a.color == b.color);
    }
  }
}

TEST_CASE("animation starts at the configured state and moves the box linearly") {
  const Scenario sc = builtin_scenario("factory");
  const SceneState s0 = animate(sc, 0);
  for (std::size_t i = 0; i < kJointCount; ++i) {
    CHECK(s0.arm_pose().joint_angles[i] == doctest::Approx(sc.arm_motion.initial[i]));
  }
  CHECK((s0.box().center - sc.box_initial.center).norm() < 1e-15);
  for (int t = 1; t < 6; ++t) {
    const SceneState st = animate(sc, t);
    const Vec3 expected = sc.box_initial.center + sc.box_velocity * (t * sc.frame_period_s);
    CHECK((st.box().center - expected).norm() < 1e-12);
    CHECK(st.time() == t);
  }
  CHECK_THROWS_AS(animate(sc, -1), ContractViolation);
  CHECK_THROWS_AS(builtin_scenario("nope"), ConfigError);
}

TEST_CASE("static_only drops the moving objects but keeps the background") {
  const SceneState state = animate(builtin_scenario("factory"), 0);
  const SceneState bg = state.static_only();
  CHECK_FALSE(bg.has_moving_objects());
  CHECK(scene_field(bg, state.keypoints()[3]).density == 0.0);
  CHECK(scene_field(bg, Vec3(0.0, -0.05, 0.0)).density == doctest::Approx(50.0));
}
