#include "meshstyle/symmetry.hpp"
#include "meshstyle/sampling.hpp"

#include "test_support.hpp"

#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <random>

using namespace meshstyle;
using testsupport::numeric_gradient;
using testsupport::relative_error;

namespace {

// Brute-force residuals of mirroring every point across the plane through
// the centroid with normal `n`.
std::pair<double, double> brute_mirror_residuals(const VertexArray& v, const Vec3& n) {
  const Vec3 c = centroid_of(v);
  double mx = 0.0, sum = 0.0;
  for (int i = 0; i < v.rows(); ++i) {
    const Vec3 p = v.row(i).transpose();
    const Vec3 m = p - 2.0 * n.dot(p - c) * n;
    double best = std::numeric_limits<double>::infinity();
    for (int j = 0; j < v.rows(); ++j) best = std::min(best, (v.row(j).transpose() - m).norm());
    mx = std::max(mx, best);
    sum += best;
  }
  return {mx, sum};
}

VertexArray rigid(const VertexArray& v, const Mat3& R, const Vec3& t) {
  return (v * R.transpose()).rowwise() + t.transpose();
}

}  // namespace

TEST_CASE("a cuboid has three symmetry planes along its axes") {
  const Mesh box = testsupport::box_mesh(2.0, 1.0, 0.5, 3);
  const SymmetryDetection det = detect_symmetry(box.vertices());
  REQUIRE(det.planes.size() == 3);
  CHECK(det.candidates.size() == 3);
  for (const auto& p : det.planes) {
    CHECK(p.max_residual < 1e-12);
    CHECK(p.axis.cwiseAbs().maxCoeff() == doctest::Approx(1.0));
    CHECK(p.point.norm() < 1e-12);
    for (auto [i, j] : p.pairs) CHECK(i <= j);
  }
  // Every vertex appears in some pair of each plane.
  for (const auto& p : det.planes) {
    std::vector<char> seen(box.num_vertices(), 0);
    for (auto [i, j] : p.pairs) seen[i] = seen[j] = 1;
    CHECK(std::count(seen.begin(), seen.end(), 1) == box.num_vertices());
  }
}

TEST_CASE("a random cloud has no symmetry plane, confirmed by brute force") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  VertexArray v(200, 3);
  for (int i = 0; i < 200; ++i) v.row(i) << 3.0 * u(rng), 2.0 * u(rng) * u(rng), std::pow(u(rng), 3.0);
  const SymmetryDetection det = detect_symmetry(v);
  CHECK(det.planes.empty());
  const SymmetryThresholds th = SymmetryThresholds::relative_to(v);
  for (const auto& c : det.candidates) {
    const auto [mx, sum] = brute_mirror_residuals(v, c.axis);
    CHECK(c.max_residual == doctest::Approx(mx).epsilon(1e-12));
    CHECK(c.sum_residual == doctest::Approx(sum).epsilon(1e-12));
    CHECK((mx >= th.max_residual || sum >= th.sum_residual));
  }
}

TEST_CASE("detection is scale-consistent") {
  const Mesh box = testsupport::box_mesh(2.0, 1.0, 0.5, 2);
  VertexArray v = box.vertices();
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 0.004);
  for (Eigen::Index i = 0; i < v.size(); ++i) v.data()[i] += n(rng);
  const auto a = detect_symmetry(v).planes;
  const auto b = detect_symmetry(v * 37.0).planes;
  REQUIRE(a.size() == b.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    CHECK(a[k].axis_index == b[k].axis_index);
    CHECK(a[k].pairs == b[k].pairs);
  }
}

TEST_CASE("nearest vertex ties resolve to the lowest index") {
  VertexArray v(4, 3);
  v << 1, 0, 0, -1, 0, 0, 0, 1, 0, 1, 0, 0;
  VertexArray q(2, 3);
  q << 0, 0, 0, 0.9, 0, 0;
  const auto nn = nearest_vertices(v, q);
  CHECK(nn[0] == 0);  // vertices 0, 1, 2 and 3 are all at distance 1
  CHECK(nn[1] == 0);  // 0 and 3 coincide
}

TEST_CASE("symmetry loss vanishes on exact mirror symmetry") {
  const Mesh box = testsupport::box_mesh(2.0, 1.0, 0.5, 2);
  const auto planes = detect_symmetry(box.vertices()).planes;
  const SymmetryLoss l = symmetry_loss(box.vertices(), planes);
  CHECK(l.mid < 1e-24);
  CHECK(l.dir < 1e-12);
  CHECK(l.gradient.cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("an in-plane pair costs exactly one in the direction term") {
  VertexArray v(2, 3);
  v << 0, 1, 0, 0, -1, 0;  // d = (0, 2, 0) lies in the x = 0 plane
  SymmetryPlane p;
  p.axis = Vec3::UnitX();
  p.pairs = {{0, 1}};
  const SymmetryLoss l = symmetry_loss(v, {p}, {Vec3::UnitX()});
  CHECK(l.dir == 1.0);
  CHECK(l.mid == 0.0);
  // Perpendicular pair: zero.
  v << 1, 0, 0, -1, 0, 0;
  CHECK(symmetry_loss(v, {p}, {Vec3::UnitX()}).dir == doctest::Approx(0.0));
}

TEST_CASE("symmetry loss gradient matches finite differences with frozen normals") {
  const Mesh m = testsupport::jittered_icosahedron(21, 0.1);
  // Plane pairs taken from the unjittered icosahedron's x-mirror.
  const Mesh ico = icosphere(0);
  SymmetryPlane p;
  p.axis = Vec3::UnitX();
  const auto nn = nearest_vertices(ico.vertices(), (ico.vertices().array().rowwise() * Eigen::Array3d(-1, 1, 1).transpose()).matrix());
  for (int i = 0; i < ico.num_vertices(); ++i)
    if (i <= nn[i]) p.pairs.emplace_back(i, nn[i]);
  SymmetryPlane q = p;
  q.axis = Vec3::UnitY();
  const std::vector<Vec3> normals{Vec3(0.9, 0.1, -0.2).normalized(), Vec3(0.1, 1.0, 0.3).normalized()};
  const SymmetryLoss l = symmetry_loss(m.vertices(), {p, q}, normals);
  auto f = [&](const Eigen::VectorXd& x) {
    return symmetry_loss(testsupport::unflatten(x), {p, q}, normals).value();
  };
  CHECK(relative_error(testsupport::flatten(l.gradient), numeric_gradient(f, testsupport::flatten(m.vertices()), 1e-6)) <=
        1e-5);
}

TEST_CASE("symmetry loss is invariant under rigid motions") {
  const Mesh box = testsupport::box_mesh(2.0, 1.0, 0.5, 2);
  const auto planes = detect_symmetry(box.vertices()).planes;
  VertexArray v = box.vertices();
  std::mt19937_64 rng(7);
  std::normal_distribution<double> n(0.0, 0.05);
  for (Eigen::Index i = 0; i < v.size(); ++i) v.data()[i] += n(rng);
  const Mat3 R = Eigen::AngleAxisd(1.1, Vec3(0.3, -0.5, 0.8).normalized()).toRotationMatrix();
  const Vec3 t(4.0, -1.0, 2.5);
  const double before = symmetry_loss(v, planes).value();
  const double after = symmetry_loss(rigid(v, R, t), planes).value();
  CHECK(before > 1e-4);
  CHECK(std::abs(before - after) <= 1e-8);
}

TEST_CASE("midpoint plane fit") {
  std::vector<std::pair<int, int>> pairs{{0, 1}, {2, 3}, {4, 5}, {6, 7}};
  VertexArray v(8, 3);
  // Midpoints on the plane z = 0.3 with mirrored points along z.
  const double mids[4][2] = {{0, 0}, {1, 0}, {0, 1}, {1, 1}};
  for (int k = 0; k < 4; ++k) {
    v.row(2 * k) << mids[k][0], mids[k][1], 0.3 + 0.5;
    v.row(2 * k + 1) << mids[k][0], mids[k][1], 0.3 - 0.5;
  }
  MidplaneFit fit = fit_midpoint_plane(pairs, v, Vec3(0, 0, -1));
  CHECK_FALSE(fit.fallback);
  CHECK((fit.normal - Vec3(0, 0, -1)).norm() < 1e-12);  // oriented toward the reference
  CHECK(fit.point.z() == doctest::Approx(0.3));

  fit = fit_midpoint_plane({{0, 1}, {2, 3}}, v, Vec3(0, 1, 0));
  CHECK(fit.fallback);
  CHECK(fit.normal == Vec3(0, 1, 0));

  // Collinear midpoints (rank 1): fallback.
  const std::vector<std::pair<int, int>> line{{0, 1}, {2, 3}, {0, 3}};
  VertexArray w(4, 3);
  w << 0, 0, 1, 0, 0, -1, 1, 0, 1, 1, 0, -1;
  fit = fit_midpoint_plane(line, w, Vec3(1, 0, 0));
  CHECK(fit.fallback);
}
