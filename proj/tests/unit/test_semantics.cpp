#include <cmath>
#include <limits>

#include <doctest.h>

#include "semcom/errors.hpp"
#include "semcom/semantics.hpp"
#include "test_support.hpp"

using namespace semcom;
using semcom::testing::Gen;

TEST_CASE("keypoints are the projected arm joints") {
  const SceneState state = animate(builtin_scenario("factory"), 3);
  for (const CameraConfig& cam : make_rig(RigSpec{})) {
    const auto kp = extract_keypoints(state, cam);
    for (std::size_t k = 0; k < kKeypointCount; ++k) {
      const ImagePoint p = project_point(cam, state.keypoints()[k]);
      CHECK(kp[k].x == p.x);
      CHECK(kp[k].y == p.y);
      CHECK(kp[k].in_frustum == p.in_frustum);
    }
  }
}

TEST_CASE("box rectangle is the clipped hull of the eight projected corners") {
  Gen gen(30);
  const auto rig = make_rig(RigSpec{});
  for (int trial = 0; trial < 100; ++trial) {
    BoxState box;
    box.center = gen.vec(-1.5, 1.5);
    box.half_extents = gen.vec(0.1, 0.5);
    box.yaw = gen.uniform(-3.0, 3.0);
    for (const CameraConfig& cam : rig) {
      double x0 = 1e300, y0 = 1e300, x1 = -1e300, y1 = -1e300;
      for (const Vec3& c : box.corners()) {
        const Vec3 v = cam.rotation.transpose() * (c - cam.position);
        // Hand projection, independent of the 4x4 pipeline.
        const double f = 1.0 / std::tan(cam.fov / 2.0);
        const double x = (f / cam.aspect * v.x() / -v.z() + 1.0) / 2.0 * cam.width;
        const double y = (1.0 - f * v.y() / -v.z()) / 2.0 * cam.height;
        x0 = std::min(x0, x);
        x1 = std::max(x1, x);
        y0 = std::min(y0, y);
        y1 = std::max(y1, y);
      }
      x0 = std::max(x0, 0.0);
      y0 = std::max(y0, 0.0);
      x1 = std::min(x1, static_cast<double>(cam.width));
      y1 = std::min(y1, static_cast<double>(cam.height));
      const BoxObservation b = project_box(box, cam);
      if (x1 <= x0 || y1 <= y0) {
        CHECK(b.empty());
        continue;
      }
      CHECK(b.cx == doctest::Approx((x0 + x1) / 2.0).epsilon(1e-9));
      CHECK(b.cy == doctest::Approx((y0 + y1) / 2.0).epsilon(1e-9));
      CHECK(b.w == doctest::Approx(x1 - x0).epsilon(1e-9));
      CHECK(b.h == doctest::Approx(y1 - y0).epsilon(1e-9));
    }
  }
}

TEST_CASE("a box behind the camera yields an empty rectangle") {
  CameraConfig cam;
  BoxState box;
  box.center = Vec3(0.0, 0.0, 5.0);
  CHECK(project_box(box, cam).empty());
  CHECK(project_box(box, cam) == BoxObservation{});
}

TEST_CASE("detector noise has the configured standard deviation") {
  const SceneState state = animate(builtin_scenario("factory"), 0);
  const auto rig = make_rig(RigSpec{});
  const SemanticFrame clean = extract_frame(state, rig);
  DetectorNoise noise;
  noise.keypoint_sigma = 2.0;
  noise.seed = 99;
  double sum = 0.0;
  double sum_sq = 0.0;
  std::size_t n = 0;
  for (std::int64_t t = 0; n < 10000; ++t) {
    SemanticFrame f = clean;
    f.time = t;
    const SemanticFrame noisy = apply_detector_noise(f, noise);
    for (std::size_t v = 0; v < f.views.size(); ++v) {
      for (std::size_t k = 0; k < kKeypointCount; ++k) {
        const double dx = noisy.views[v].keypoints[k].x - f.views[v].keypoints[k].x;
        sum += dx;
        sum_sq += dx * dx;
        ++n;
      }
    }
  }
  const double mean = sum / static_cast<double>(n);
  const double sd = std::sqrt(sum_sq / static_cast<double>(n) - mean * mean);
  CHECK(std::abs(sd - 2.0) < 0.1);
}

TEST_CASE("detector noise is deterministic per (seed, time) and misses drop boxes") {
  const SceneState state = animate(builtin_scenario("factory"), 0);
  const auto rig = make_rig(RigSpec{});
  DetectorNoise noise;
  noise.keypoint_sigma = 1.0;
  noise.box_sigma = 1.0;
  noise.seed = 5;
  const SemanticFrame a = extract_frame(state, rig, noise);
  const SemanticFrame b = extract_frame(state, rig, noise);
  for (std::size_t v = 0; v < a.views.size(); ++v) {
    CHECK(a.views[v].keypoints[2].x == b.views[v].keypoints[2].x);
    CHECK(a.views[v].box == b.views[v].box);
  }
  noise.seed = 6;
  const SemanticFrame c = extract_frame(state, rig, noise);
  CHECK(a.views[0].keypoints[2].x != c.views[0].keypoints[2].x);

  noise.miss_rate = 0.999;
  const SemanticFrame missed = extract_frame(state, rig, noise);
  int empty = 0;
  for (const ViewSemantics& v : missed.views) empty += v.box.empty() ? 1 : 0;
  CHECK(empty >= 7);

  noise.miss_rate = 1.0;
  CHECK_THROWS_AS(noise.validate(), ConfigError);
  CHECK_THROWS_AS(extract_frame(state, {}), ConfigError);
}

TEST_CASE("scalar count is 18 per view") {
  const SemanticFrame f = extract_frame(animate(builtin_scenario("factory"), 0), make_rig(RigSpec{}));
  CHECK(scalar_count(f) == 144);
}
