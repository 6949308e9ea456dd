#include "meshstyle/camera.hpp"
#include "meshstyle/error.hpp"
#include "meshstyle/renderer.hpp"
#include "meshstyle/sampling.hpp"

#include "test_support.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace meshstyle;
using testsupport::numeric_gradient;
using testsupport::relative_error;

namespace {

using Vec2 = Eigen::Vector2d;

Vec2 ndc_of(const Camera& cam, const Vec3& p) {
  const Vec3 q = cam.to_view(p);
  return {q.x() / (q.z() * cam.tan_half_fov()), q.y() / (q.z() * cam.tan_half_fov())};
}

Vec2 pixel(int x, int y, int res) { return {-1.0 + (2.0 * x + 1.0) / res, 1.0 - (2.0 * y + 1.0) / res}; }

double segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 e = b - a;
  const double t = std::clamp((p - a).dot(e) / e.squaredNorm(), 0.0, 1.0);
  return (p - (a + t * e)).norm();
}

// Signed distance to a triangle boundary, positive inside.
double signed_distance(const Vec2& p, const Vec2 t[3]) {
  auto side = [](const Vec2& a, const Vec2& b, const Vec2& q) {
    return (b - a).x() * (q - a).y() - (b - a).y() * (q - a).x();
  };
  const double s0 = side(t[0], t[1], p), s1 = side(t[1], t[2], p), s2 = side(t[2], t[0], p);
  const bool inside = (s0 >= 0 && s1 >= 0 && s2 >= 0) || (s0 <= 0 && s1 <= 0 && s2 <= 0);
  const double d = std::min({segment_distance(p, t[0], t[1]), segment_distance(p, t[1], t[2]),
                             segment_distance(p, t[2], t[0])});
  return inside ? d : -d;
}

}  // namespace

TEST_CASE("camera placement and view frame") {
  const Camera c(30.0, 5.0, 20.0, 60.0, 64);
  const double el = 20.0 * std::numbers::pi / 180.0, az = 60.0 * std::numbers::pi / 180.0;
  CHECK((c.eye() - 5.0 * Vec3(std::cos(el) * std::sin(az), std::sin(el), std::cos(el) * std::cos(az))).norm() <
        1e-12);
  CHECK((c.view_rotation() * c.view_rotation().transpose() - Mat3::Identity()).norm() < 1e-12);
  CHECK((c.to_view(Vec3::Zero()) - Vec3(0, 0, 5)).norm() < 1e-12);
  CHECK(c.view_rotation().row(1).dot(Vec3::UnitY()) > 0.0);  // up stays up
  CHECK(c.tan_half_fov() == doctest::Approx(std::tan(15.0 * std::numbers::pi / 180.0)));
  CHECK((c.headlight() - c.eye().normalized()).norm() < 1e-15);
  CHECK_THROWS_AS(Camera(0.0, 5, 0, 0, 64), ValidationError);
  CHECK_THROWS_AS(Camera(30, -1, 0, 0, 64), ValidationError);
  CHECK_THROWS_AS(Camera(30, 5, 90, 0, 64), ValidationError);
  CHECK_THROWS_AS(Camera(30, 5, 0, 0, 8), ValidationError);
}

TEST_CASE("sampled cameras follow the configured uniform ranges") {
  std::mt19937_64 rng(11);
  const CameraSamplingConfig cfg;
  const int n = 20000;
  double sum_el = 0.0, sum_az = 0.0, min_el = 90, max_el = -90;
  for (int i = 0; i < n; ++i) {
    const Camera c = sample_camera(rng, cfg);
    sum_el += c.elevation_deg();
    sum_az += c.azimuth_deg();
    min_el = std::min(min_el, c.elevation_deg());
    max_el = std::max(max_el, c.elevation_deg());
    CHECK(c.azimuth_deg() >= 0.0);
    CHECK(c.azimuth_deg() < 360.0);
  }
  // Means of U[10,30] and U[0,360); 4 standard errors.
  CHECK(std::abs(sum_el / n - 20.0) < 4.0 * (20.0 / std::sqrt(12.0)) / std::sqrt(double(n)));
  CHECK(std::abs(sum_az / n - 180.0) < 4.0 * (360.0 / std::sqrt(12.0)) / std::sqrt(double(n)));
  CHECK(min_el >= 10.0);
  CHECK(max_el <= 30.0);
  std::mt19937_64 a(5), b(5);
  CHECK(sample_camera(a, cfg).eye() == sample_camera(b, cfg).eye());
}

TEST_CASE("empty scene renders white with zero alpha") {
  const Camera c(30, 5, 10, 0, 16);
  const RenderOutput r = render_soft(VertexArray(0, 3), FaceArray(0, 3), c);
  for (double v : r.rgb.data) CHECK(v == 1.0);
  for (double v : r.alpha.data) CHECK(v == 0.0);
}

TEST_CASE("edge falloff: transparent beyond 3 sigma outside, opaque deeper than 5 sigma inside") {
  const int res = 64;
  const Camera cam(30, 5, 0, 0, res);
  VertexArray v(3, 3);
  v << -0.8, -0.6, 0.0, 0.9, -0.5, 0.0, 0.0, 0.9, 0.0;
  FaceArray f(1, 3);
  f << 0, 1, 2;
  SoftRasterParams p;
  p.sigma_edge = 0.03;
  const RenderOutput r = render_soft(v, f, cam, p);
  const Vec2 tri[3] = {ndc_of(cam, v.row(0)), ndc_of(cam, v.row(1)), ndc_of(cam, v.row(2))};
  int outside = 0, inside = 0;
  for (int y = 0; y < res; ++y)
    for (int x = 0; x < res; ++x) {
      const double d = signed_distance(pixel(x, y, res), tri);
      const double a = r.alpha.at(0, y, x);
      CHECK(a >= 0.0);
      CHECK(a <= 1.0);
      if (d < -3.0 * p.sigma_edge) {
        CHECK(a <= 1e-3);
        ++outside;
      }
      if (d > 5.0 * p.sigma_edge) {
        CHECK(a >= 1.0 - 1e-3);
        ++inside;
      }
      // Coverage is exactly the squared-distance sigmoid.
      if (d > -p.cutoff * p.sigma_edge)
        CHECK(a == doctest::Approx(1.0 / (1.0 + std::exp(-(d >= 0 ? 1 : -1) * d * d / (p.sigma_edge * p.sigma_edge))))
                       .epsilon(1e-9));
    }
  CHECK(outside > 100);
  CHECK(inside > 100);
}

TEST_CASE("sphere silhouette covers the analytic perspective disc") {
  // A unit sphere at distance 5 subtends a cone of half-angle asin(1/5); its
  // silhouette is a disc of NDC radius tan(asin(1/5)) / tan(15 deg).
  const Mesh sphere = icosphere(5);
  const Camera cam(30, 5, 0, 0, 256);
  const RenderOutput r = render_soft(sphere.vertices(), sphere.faces(), cam);
  double covered = 0.0;
  for (double a : hard_silhouette(r.alpha).data) covered += a;
  covered /= 256.0 * 256.0;
  const double r_ndc = (1.0 / std::sqrt(24.0)) / std::tan(15.0 * std::numbers::pi / 180.0);
  const double expect = std::numbers::pi * r_ndc * r_ndc / 4.0;
  CHECK(std::abs(covered - expect) / expect < 0.02);
}

TEST_CASE("nearer surfaces win the depth blend") {
  const Camera cam(30, 5, 0, 0, 32);
  // Face 0 faces the eye (shade 1); face 1 is tilted about the x axis.
  auto scene = [](double z_facing, double z_tilted) {
    VertexArray v(6, 3);
    v << -1, -1, z_facing, 1, -1, z_facing, 0, 1, z_facing,  //
        -1, -1, z_tilted - 0.5, 1, -1, z_tilted - 0.5, 0, 1, z_tilted + 0.5;
    return v;
  };
  FaceArray f(2, 3);
  f << 0, 1, 2, 3, 4, 5;
  SoftRasterParams p;
  p.gamma = 1e-3;
  const VertexArray tilted_front = scene(-1.0, 1.0);
  const Vec3 n = face_cross(tilted_front, f, 1).normalized();
  const double expect = 0.5 + 0.5 * n.dot(cam.headlight());
  REQUIRE(expect < 0.99);
  CHECK(render_soft(tilted_front, f, cam, p).rgb.at(0, 16, 16) == doctest::Approx(expect).epsilon(1e-6));
  CHECK(render_soft(scene(1.0, -1.0), f, cam, p).rgb.at(0, 16, 16) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("faces crossing the near plane are skipped") {
  const Camera cam(30, 5, 0, 0, 16);
  VertexArray v(3, 3);
  v << -1, -1, 4.5, 1, -1, 0, 0, 1, 0;  // first vertex 0.5 in front of the eye
  FaceArray f(1, 3);
  f << 0, 1, 2;
  const RenderOutput r = render_soft(v, f, cam);
  for (double a : r.alpha.data) CHECK(a == 0.0);
}

TEST_CASE("render backward matches finite differences") {
  const Mesh m = testsupport::jittered_icosahedron(31, 0.2);
  REQUIRE(m.num_faces() <= 20);
  const Camera cam(30, 5, 25, 40, 32);
  SoftRasterParams p;
  p.sigma_edge = 0.05;
  p.gamma = 0.05;
  p.cutoff = 8.0;  // keeps dropped coverage below 1e-27 so culling cannot bias differences

  std::mt19937_64 rng(2);
  std::normal_distribution<double> n(0.0, 1.0);
  Image wa(1, 32, 32), wr(3, 32, 32);
  for (double& x : wa.data) x = n(rng);
  for (double& x : wr.data) x = n(rng);

  auto loss = [&](const VertexArray& V) {
    const RenderOutput r = render_soft(V, m.faces(), cam, p);
    return dot(wa, r.alpha) + dot(wr, r.rgb);
  };
  const RenderOutput r0 = render_soft(m.vertices(), m.faces(), cam, p);
  SUBCASE("alpha and rgb together") {
    const VertexArray g = render_backward(r0, wr, wa);
    auto f = [&](const Eigen::VectorXd& x) { return loss(testsupport::unflatten(x)); };
    CHECK(relative_error(testsupport::flatten(g), numeric_gradient(f, testsupport::flatten(m.vertices()), 1e-6)) <=
          1e-3);
  }
  SUBCASE("alpha only, empty rgb gradient") {
    const VertexArray g = render_backward(r0, Image{}, wa);
    auto f = [&](const Eigen::VectorXd& x) {
      return dot(wa, render_soft(testsupport::unflatten(x), m.faces(), cam, p).alpha);
    };
    CHECK(relative_error(testsupport::flatten(g), numeric_gradient(f, testsupport::flatten(m.vertices()), 1e-6)) <=
          1e-3);
  }
  SUBCASE("intermediates are required") {
    SoftRasterParams q = p;
    q.keep_intermediates = false;
    const RenderOutput bare = render_soft(m.vertices(), m.faces(), cam, q);
    CHECK_FALSE(bare.tape);
    CHECK_THROWS(render_backward(bare, wr, wa));
  }
}

TEST_CASE("silhouette IoU") {
  Image a(1, 2, 2), b(1, 2, 2);
  a.data = {1, 1, 0, 0};
  b.data = {1, 0, 1, 0};
  CHECK(silhouette_iou(a, b) == doctest::Approx(1.0 / 3.0));
  CHECK(silhouette_iou(a, a) == 1.0);
  Image soft(1, 1, 3);
  soft.data = {0.2, 0.6, 0.8};
  CHECK(hard_silhouette(soft).data == std::vector<double>{0, 1, 1});
}
