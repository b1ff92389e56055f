#include <cmath>
#include <limits>

#include <doctest.h>

#include "semcom/errors.hpp"
#include "semcom/metrics.hpp"
#include "test_support.hpp"

using namespace semcom;
using semcom::testing::Gen;

namespace {

SemanticFrame random_frame(Gen& gen, std::size_t views) {
  SemanticFrame f;
  for (std::size_t v = 0; v < views; ++v) {
    ViewSemantics view;
    view.camera_id = static_cast<int>(v);
    for (ImagePoint& kp : view.keypoints) kp = {gen.uniform(0, 300), gen.uniform(0, 150), true};
    view.box = {gen.uniform(0, 300), gen.uniform(0, 150), gen.uniform(1, 60), gen.uniform(1, 60)};
    f.views.push_back(view);
  }
  return f;
}

PointCloud random_cloud(Gen& gen, std::size_t n) {
  PointCloud c;
  for (std::size_t i = 0; i < n; ++i) c.points.push_back({gen.vec(-2.0, 2.0), Rgb::Zero()});
  return c;
}

double brute_directed(const PointCloud& from, const PointCloud& to) {
  double sum = 0.0;
  for (const CloudPoint& p : from.points) {
    double best = std::numeric_limits<double>::infinity();
    for (const CloudPoint& q : to.points) best = std::min(best, (p.position - q.position).squaredNorm());
    sum += best;
  }
  return std::sqrt(sum / static_cast<double>(from.points.size()));
}

}  // namespace

TEST_CASE("kpe of identical frames is zero with full pck") {
  Gen gen(60);
  const SemanticFrame f = random_frame(gen, 8);
  const KpeReport r = kpe(f, f);
  CHECK(r.mean_px == 0.0);
  CHECK(r.pck == 1.0);
  CHECK(r.per_point_px.size() == 8 * kKpePointsPerView);
  CHECK(r.per_view_px.size() == 8);
}

TEST_CASE("shifting every point by (3, 4) gives a 5 px error") {
  Gen gen(61);
  const SemanticFrame f = random_frame(gen, 4);
  SemanticFrame g = f;
  for (ViewSemantics& v : g.views) {
    for (ImagePoint& kp : v.keypoints) {
      kp.x += 3.0;
      kp.y += 4.0;
    }
    v.box.cx += 3.0;
    v.box.cy += 4.0;
  }
  const KpeReport r = kpe(f, g, 4.9);
  CHECK(r.mean_px == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(r.pck == 0.0);
  CHECK(kpe(f, g, 5.0 + 1e-9).pck == 1.0);
}

TEST_CASE("kpe equals an independent per-point recomputation") {
  Gen gen(62);
  for (int trial = 0; trial < 100; ++trial) {
    const SemanticFrame a = random_frame(gen, 8);
    const SemanticFrame b = random_frame(gen, 8);
    double sum = 0.0;
    int within = 0;
    int n = 0;
    for (std::size_t v = 0; v < 8; ++v) {
      for (std::size_t k = 0; k < kKeypointCount; ++k) {
        const double d = std::hypot(a.views[v].keypoints[k].x - b.views[v].keypoints[k].x,
                                    a.views[v].keypoints[k].y - b.views[v].keypoints[k].y);
        sum += d;
        within += d <= 10.0;
        ++n;
      }
      const BoxObservation& p = a.views[v].box;
      const BoxObservation& q = b.views[v].box;
      for (double sign : {-1.0, 1.0}) {
        const double d = std::hypot((p.cx + sign * p.w / 2) - (q.cx + sign * q.w / 2),
                                    (p.cy + sign * p.h / 2) - (q.cy + sign * q.h / 2));
        sum += d;
        within += d <= 10.0;
        ++n;
      }
    }
    const KpeReport r = kpe(a, b);
    CHECK(r.mean_px == doctest::Approx(sum / n).epsilon(1e-12));
    CHECK(r.pck == doctest::Approx(static_cast<double>(within) / n));
  }
}

TEST_CASE("kpe behaves as a pseudometric on random triples") {
  Gen gen(63);
  for (int trial = 0; trial < 100; ++trial) {
    const SemanticFrame a = random_frame(gen, 3);
    const SemanticFrame b = random_frame(gen, 3);
    const SemanticFrame c = random_frame(gen, 3);
    CHECK(kpe(a, b).mean_px == doctest::Approx(kpe(b, a).mean_px).epsilon(1e-14));
    CHECK(kpe(a, c).mean_px <= kpe(a, b).mean_px + kpe(b, c).mean_px + 1e-9);
  }
}

TEST_CASE("kpe contract") {
  Gen gen(64);
  const SemanticFrame a = random_frame(gen, 3);
  const SemanticFrame b = random_frame(gen, 2);
  CHECK_THROWS_AS(kpe(a, b), ContractViolation);
  CHECK_THROWS_AS(kpe(a, a, 0.0), ContractViolation);
}

TEST_CASE("p2point equals brute-force nearest neighbors") {
  Gen gen(65);
  for (std::size_t n : {1u, 2u, 17u, 100u, 500u, 1000u}) {
    const PointCloud a = random_cloud(gen, n);
    const PointCloud b = random_cloud(gen, n / 2 + 1);
    const P2PointReport r = p2point(a, b);
    const double f = brute_directed(a, b);
    const double k = brute_directed(b, a);
    CHECK(std::abs(r.forward_rms_m - f) <= 1e-12);
    CHECK(std::abs(r.backward_rms_m - k) <= 1e-12);
    CHECK(std::abs(r.rms_m - std::sqrt((f * f + k * k) / 2.0)) <= 1e-12);
    const P2PointReport s = p2point(b, a);
    CHECK(s.forward_rms_m == r.backward_rms_m);
    CHECK(s.backward_rms_m == r.forward_rms_m);
  }
}

TEST_CASE("p2point trivial cases") {
  PointCloud a;
  a.points.push_back({Vec3(0, 0, 0), Rgb::Zero()});
  PointCloud b;
  b.points.push_back({Vec3(1, 0, 0), Rgb::Zero()});
  CHECK(p2point(a, b).rms_m == doctest::Approx(1.0));
  CHECK(p2point(a, a).rms_m == 0.0);
  CHECK_THROWS_AS(p2point(a, PointCloud{}), ContractViolation);
}

TEST_CASE("delay report arithmetic") {
  ChannelConfig cfg;
  const TdReport image = td(0.0, 8 * 17280000ull, 0.0, cfg, 0.0);
  CHECK(image.airtime_s == doctest::Approx(0.864).epsilon(1e-12));
  const TdReport sem = td(0.02, 2392, 0.0, cfg, 0.335);
  CHECK(sem.airtime_s == doctest::Approx(14.95e-6).epsilon(1e-12));
  CHECK(sem.total_s == doctest::Approx(0.02 + 14.95e-6 + 0.335));
  CHECK(sem.total_s == sem.extract_s + sem.airtime_s + sem.generate_s);
  const TdReport zero = td(0.0, 0, 0.0, cfg, 0.0);
  CHECK(zero.total_s == 0.0);
  const TdReport amortized = td(0.0, 0, 160e6, cfg, 0.0);
  CHECK(amortized.airtime_s == doctest::Approx(1.0));
  CHECK_THROWS_AS(td(-1.0, 0, 0.0, cfg, 0.0), ContractViolation);
}
