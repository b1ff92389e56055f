#include <cmath>
#include <memory>

#include <Eigen/Cholesky>
#include <doctest.h>

#include "semcom/channel.hpp"
#include "semcom/errors.hpp"
#include "semcom/levenberg_marquardt.hpp"
#include "semcom/reconstruct.hpp"
#include "test_support.hpp"

using namespace semcom;
using semcom::testing::Gen;

namespace {

// Small rig and base knowledge shared by the fitting tests (edge maps at low
// resolution keep construction cheap).
struct Fixture {
  Scenario scenario = builtin_scenario("factory");
  std::vector<CameraConfig> rig;
  std::shared_ptr<const BaseKnowledge> base;

  Fixture() {
    RigSpec spec;
    spec.width = 320;
    spec.height_px = 160;
    rig = make_rig(spec);
    BaseKnowledgeOptions opts;
    opts.render.steps = 64;
    base = std::make_shared<BaseKnowledge>(build_base_knowledge(scenario, rig, opts));
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

double max_angle_error(const ArmPose& a, const ArmPose& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.joint_angles.size(); ++i) {
    worst = std::max(worst, std::abs(wrap_angle(a.joint_angles[i] - b.joint_angles[i])));
  }
  return worst;
}

}  // namespace

TEST_CASE("LM solves a linear least-squares problem like the normal equations") {
  Gen gen(50);
  Eigen::MatrixXd a(30, 4);
  Eigen::VectorXd b(30);
  for (int i = 0; i < 30; ++i) {
    for (int j = 0; j < 4; ++j) a(i, j) = gen.uniform(-1.0, 1.0);
    b[i] = gen.uniform(-1.0, 1.0);
  }
  LmProblem problem = [&](const Eigen::VectorXd& x, Eigen::VectorXd& r, Eigen::MatrixXd* j) {
    r = a * x - b;
    if (j != nullptr) *j = a;
  };
  const LmResult res = levenberg_marquardt(problem, Eigen::VectorXd::Zero(4));
  const Eigen::VectorXd want = (a.transpose() * a).ldlt().solve(a.transpose() * b);
  CHECK((res.params - want).norm() < 1e-8);
  CHECK(res.converged);
  for (std::size_t i = 1; i < res.cost_history.size(); ++i) {
    CHECK(res.cost_history[i] <= res.cost_history[i - 1]);
  }
}

TEST_CASE("LM on Rosenbrock reaches the minimum with a non-increasing cost") {
  LmProblem problem = [](const Eigen::VectorXd& x, Eigen::VectorXd& r, Eigen::MatrixXd* j) {
    r.resize(2);
    r << 10.0 * (x[1] - x[0] * x[0]), 1.0 - x[0];
    if (j != nullptr) {
      j->resize(2, 2);
      *j << -20.0 * x[0], 10.0, -1.0, 0.0;
    }
  };
  Eigen::VectorXd start(2);
  start << -1.2, 1.0;
  const LmResult res = levenberg_marquardt(problem, start);
  CHECK(res.params[0] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(res.params[1] == doctest::Approx(1.0).epsilon(1e-6));
  for (std::size_t i = 1; i < res.cost_history.size(); ++i) {
    CHECK(res.cost_history[i] <= res.cost_history[i - 1]);
  }
}

TEST_CASE("reprojection Jacobian matches central differences") {
  const Fixture& fx = fixture();
  Gen gen(51);
  for (int trial = 0; trial < 20; ++trial) {
    const ArmPose pose = gen.pose(1.2);
    const SceneState state = animate(fx.scenario, 0).with_objects(pose, fx.scenario.box_initial);
    const auto obs = keypoint_observations(extract_frame(state, fx.rig), fx.rig);
    REQUIRE(!obs.empty());
    Eigen::MatrixXd j;
    arm_reprojection(fx.base->arm, fx.rig, obs, pose, &j);
    const double h = 1e-6;
    for (std::size_t q = 0; q < kJointCount; ++q) {
      ArmPose lo = pose;
      ArmPose hi = pose;
      lo.joint_angles[q] -= h;
      hi.joint_angles[q] += h;
      const Eigen::VectorXd fd = (arm_reprojection(fx.base->arm, fx.rig, obs, hi) -
                                  arm_reprojection(fx.base->arm, fx.rig, obs, lo)) /
                                 (2.0 * h);
      const Eigen::VectorXd an = j.col(static_cast<Eigen::Index>(q));
      CHECK((an - fd).norm() <= 1e-5 * std::max(1.0, fd.norm()));
    }
  }
}

TEST_CASE("triangulation recovers a point and rejects degenerate input") {
  const Fixture& fx = fixture();
  Gen gen(52);
  for (int trial = 0; trial < 50; ++trial) {
    const Vec3 p = gen.vec(-1.0, 1.0) + Vec3(0.0, 1.0, 0.0);
    std::vector<ImagePoint> pts;
    for (const CameraConfig& cam : fx.rig) pts.push_back(project_point(cam, p));
    CHECK((triangulate(fx.rig, pts) - p).norm() < 1e-8);
  }
  std::vector<CameraConfig> one{fx.rig[0], fx.rig[1]};
  std::vector<ImagePoint> pts{project_point(fx.rig[0], Vec3(0, 1, 0)), ImagePoint{}};
  CHECK_THROWS_AS(triangulate(one, pts), InsufficientObservations);
  std::vector<CameraConfig> same{fx.rig[0], fx.rig[0]};
  std::vector<ImagePoint> twice{pts[0], pts[0]};
  CHECK_THROWS_AS(triangulate(same, twice), DegenerateGeometry);
}

TEST_CASE("fit_arm recovers the pose from clean keypoints") {
  const Fixture& fx = fixture();
  Gen gen(53);
  for (int t = 0; t < 4; ++t) {
    const SceneState truth = animate(fx.scenario, t);
    ArmPose init = truth.arm_pose();
    for (double& q : init.joint_angles) q += gen.uniform(-0.1, 0.1);
    const FitResult fit = fit_arm(extract_frame(truth, fx.rig), *fx.base, init);
    CHECK(max_angle_error(fit.arm_pose, truth.arm_pose()) < 1e-6);
    CHECK(fit.residual_px < 1e-6);
    for (std::size_t i = 1; i < fit.cost_history.size(); ++i) {
      CHECK(fit.cost_history[i] <= fit.cost_history[i - 1]);
    }
  }
  SemanticFrame empty = extract_frame(animate(fx.scenario, 0), fx.rig);
  for (ViewSemantics& v : empty.views) {
    for (ImagePoint& kp : v.keypoints) kp.in_frustum = false;
  }
  CHECK_THROWS_AS(fit_arm(empty, *fx.base, fx.base->initial_pose), InsufficientObservations);
}

TEST_CASE("fit_box recovers the center despite perspective-biased rectangles") {
  const Fixture& fx = fixture();
  for (int t = 0; t < 4; ++t) {
    const SceneState truth = animate(fx.scenario, t);
    const BoxFit fit = fit_box(extract_frame(truth, fx.rig), *fx.base, fx.base->initial_box);
    CHECK_FALSE(fit.stale);
    CHECK((fit.box.center - truth.box().center).norm() < 1e-4);
  }
  SemanticFrame blind = extract_frame(animate(fx.scenario, 1), fx.rig);
  for (std::size_t v = 1; v < blind.views.size(); ++v) blind.views[v].box = {};
  const BoxFit stale = fit_box(blind, *fx.base, fx.base->initial_box);
  CHECK(stale.stale);
  CHECK((stale.box.center - fx.base->initial_box.center).norm() == 0.0);
}

TEST_CASE("model-based regeneration is exact on a clean channel") {
  const Fixture& fx = fixture();
  Regenerator regen(fx.base, ReconstructionMode::model_based);
  for (int t = 0; t < 4; ++t) {
    const SceneState truth = animate(fx.scenario, t);
    const Metaverse m = regen.step(extract_frame(truth, fx.rig));
    CHECK_FALSE(m.regeneration.arm_stale);
    CHECK_FALSE(m.regeneration.box_stale);
    CHECK(max_angle_error(m.regeneration.state.arm_pose(), truth.arm_pose()) < 1e-6);
    CHECK((m.regeneration.state.box().center - truth.box().center).norm() < 1e-4);
    for (const auto& log : m.regeneration.cost_logs) {
      for (std::size_t i = 1; i < log.size(); ++i) CHECK(log[i] <= log[i - 1]);
    }
  }
}

TEST_CASE("scenery-based regeneration with the edge term off matches model-based") {
  const Fixture& fx = fixture();
  ControlWeights w;
  w.canny = 0.0;
  const SceneState truth = animate(fx.scenario, 2);
  SemanticFrame frame = extract_frame(truth, fx.rig);
  DetectorNoise noise;
  noise.keypoint_sigma = 0.5;
  noise.box_sigma = 0.5;
  noise.seed = 3;
  frame = apply_detector_noise(frame, noise);
  const SceneState prev = fx.base->initial_state();
  const Regeneration m = regenerate_m(frame, *fx.base, prev);
  const Regeneration s = regenerate_s(frame, *fx.base, prev, w);
  CHECK(max_angle_error(m.state.arm_pose(), s.state.arm_pose()) < 1e-6);
  CHECK((m.state.box().center - s.state.box().center).norm() < 1e-6);
}

TEST_CASE("zero keypoint weight leaves the arm at its initial pose") {
  const Fixture& fx = fixture();
  ControlWeights w;
  w.keypoints = 0.0;
  const SceneState truth = animate(fx.scenario, 3);
  const SceneState prev = fx.base->initial_state();
  const Regeneration s = regenerate_s(extract_frame(truth, fx.rig), *fx.base, prev, w);
  CHECK(max_angle_error(s.state.arm_pose(), prev.arm_pose()) == 0.0);
  CHECK((s.state.box().center - truth.box().center).norm() < 1e-4);
  CHECK(s.edge_penalty >= 0.0);
  CHECK(s.edge_penalty <= 1.0);
}

TEST_CASE("raising the box weight never increases the box residual") {
  const Fixture& fx = fixture();
  const SceneState truth = animate(fx.scenario, 1);
  DetectorNoise noise;
  noise.keypoint_sigma = 1.0;
  noise.box_sigma = 1.5;
  noise.seed = 8;
  const SemanticFrame frame = apply_detector_noise(extract_frame(truth, fx.rig), noise);
  const SceneState prev = fx.base->initial_state();
  double last = std::numeric_limits<double>::infinity();
  for (double wb : {0.25, 0.5, 1.0, 2.0, 4.0}) {
    ControlWeights w;
    w.box = wb;
    const Regeneration s = regenerate_s(frame, *fx.base, prev, w, FitOptions{}, 0.1);
    CHECK(s.box_fit.residual_px <= last + 1e-9);
    last = s.box_fit.residual_px;
  }
}

TEST_CASE("robust fitting ignores grossly corrupted views") {
  const Fixture& fx = fixture();
  const SceneState truth = animate(fx.scenario, 1);
  SemanticFrame frame = extract_frame(truth, fx.rig);
  for (std::size_t v : {1u, 4u}) {
    for (ImagePoint& kp : frame.views[v].keypoints) kp.x = std::fmod(kp.x + 97.0, 320.0);
    frame.views[v].box.cx = std::fmod(frame.views[v].box.cx + 150.0, 320.0);
  }
  const Regeneration m = regenerate_m(frame, *fx.base, fx.base->initial_state());
  CHECK(max_angle_error(m.state.arm_pose(), truth.arm_pose()) < 1e-6);
  CHECK((m.state.box().center - truth.box().center).norm() < 1e-4);
}

TEST_CASE("a frame without usable evidence keeps the previous state") {
  const Fixture& fx = fixture();
  SemanticFrame frame = extract_frame(animate(fx.scenario, 2), fx.rig);
  for (ViewSemantics& v : frame.views) {
    for (ImagePoint& kp : v.keypoints) kp.in_frustum = false;
    v.box = {};
  }
  const SceneState prev = fx.base->initial_state();
  const Metaverse m = construct_metaverse(frame, *fx.base, prev, ReconstructionMode::model_based,
                                          ControlWeights{});
  CHECK(m.regeneration.arm_stale);
  CHECK(m.regeneration.box_stale);
  const PointCloud prev_cloud = extract_point_cloud(prev, fx.base->cloud_bounds, 0.1, 1.0);
  REQUIRE(m.cloud.points.size() == prev_cloud.points.size());
  for (std::size_t i = 0; i < prev_cloud.points.size(); ++i) {
    CHECK(m.cloud.points[i].position == prev_cloud.points[i].position);
  }
}

TEST_CASE("edge consistency ignores the moving objects") {
  const Fixture& fx = fixture();
  const SceneState a = fx.base->initial_state();
  const SceneState b = animate(fx.scenario, 3);
  const double pa = edge_consistency(*fx.base, a);
  CHECK(pa >= 0.0);
  CHECK(pa < 0.5);
  CHECK(pa == edge_consistency(*fx.base, b));
}

TEST_CASE("base knowledge serialization round trip") {
  const Fixture& fx = fixture();
  const std::vector<std::uint8_t> bytes = serialize_base_knowledge(*fx.base);
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "SCBK");
  const BaseKnowledge back = deserialize_base_knowledge(bytes);
  CHECK(back.edge_maps == fx.base->edge_maps);
  REQUIRE(back.cameras.size() == fx.base->cameras.size());
  for (std::size_t i = 0; i < back.cameras.size(); ++i) {
    CHECK(back.cameras[i].position == fx.base->cameras[i].position);
    CHECK(back.cameras[i].rotation == fx.base->cameras[i].rotation);
    CHECK(back.cameras[i].width == fx.base->cameras[i].width);
  }
  CHECK(back.initial_pose.joint_angles == fx.base->initial_pose.joint_angles);
  CHECK(back.initial_box.center == fx.base->initial_box.center);
  CHECK(*back.background == *fx.base->background);
  CHECK(serialize_base_knowledge(back) == bytes);

  std::vector<std::uint8_t> cut(bytes.begin(), bytes.end() - 1);
  CHECK_THROWS_AS(deserialize_base_knowledge(cut), DecodeError);
  std::vector<std::uint8_t> bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(deserialize_base_knowledge(bad), DecodeError);
}

TEST_CASE("control weights validation") {
  ControlWeights w;
  w.box = -1.0;
  CHECK_THROWS_AS(w.validate(), ConfigError);
  ControlWeights zero{0.0, 0.0, 0.0};
  CHECK_THROWS_AS(zero.validate(), ConfigError);
}
