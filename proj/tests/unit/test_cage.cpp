#include "meshstyle/cage.hpp"
#include "meshstyle/error.hpp"
#include "meshstyle/sampling.hpp"

#include "test_support.hpp"

#include <doctest.h>

#include <random>

using namespace meshstyle;
using testsupport::numeric_gradient;
using testsupport::relative_error;

namespace {

OBBCage random_box(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  OBBCage b;
  b.center = Vec3(u(rng), u(rng), u(rng));
  b.axes = Eigen::Quaterniond(u(rng), u(rng), u(rng), u(rng)).normalized().toRotationMatrix();
  b.half_extents = Vec3(0.3 + std::abs(u(rng)), 0.3 + std::abs(u(rng)), 0.3 + std::abs(u(rng)));
  return b;
}

CageTransform random_similarity(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  CageTransform t;
  t.scale = 0.5 + std::abs(u(rng)) * 2.0;
  t.rotation = Eigen::Quaterniond(u(rng), u(rng), u(rng), u(rng));  // left unnormalized on purpose
  t.translation = Vec3(u(rng), u(rng), u(rng)) * 3.0;
  return t;
}

}  // namespace

TEST_CASE("corner order follows the axis sign bits") {
  OBBCage b;
  b.center = Vec3(1, 2, 3);
  b.half_extents = Vec3(0.5, 1.0, 2.0);
  for (int j = 0; j < 8; ++j) {
    const Vec3 s((j >> 2 & 1) ? 1 : -1, (j >> 1 & 1) ? 1 : -1, (j & 1) ? 1 : -1);
    CHECK((b.corner(j) - (b.center + s.cwiseProduct(b.half_extents))).norm() < 1e-15);
    CageCoefficients e = CageCoefficients::Zero();
    e[j] = 1.0;
    CHECK((trilinear_coeffs(b, b.corner(j)) - e).norm() < 1e-14);
  }
  CHECK((b.local_coords(b.corner(0)) - Vec3::Zero()).norm() < 1e-15);
  CHECK((b.local_coords(b.corner(7)) - Vec3::Ones()).norm() < 1e-15);
}

TEST_CASE("partition of unity and affine reconstruction, inside and outside the box") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int trial = 0; trial < 50; ++trial) {
    const OBBCage b = random_box(rng);
    const Vec3 p(u(rng), u(rng), u(rng));
    const CageCoefficients w = trilinear_coeffs(b, p);
    CHECK(std::abs(w.sum() - 1.0) <= 1e-12);
    CHECK((reconstruct(b.corners(), w) - p).norm() <= 1e-9);
  }
}

TEST_CASE("coefficients are invariant under similarity transforms of box and point") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int trial = 0; trial < 50; ++trial) {
    const OBBCage b = random_box(rng);
    const CageTransform t = random_similarity(rng);
    const Vec3 p(u(rng), u(rng), u(rng));
    const OBBCage moved = apply_cage_transform(b, t);
    CHECK((trilinear_coeffs(moved, t.apply(p)) - trilinear_coeffs(b, p)).cwiseAbs().maxCoeff() <= 1e-9);
    const CornerArray corners = transformed_corners(b, t);
    for (int j = 0; j < 8; ++j) CHECK((corners[j] - t.apply(b.corner(j))).norm() < 1e-12);
  }
}

TEST_CASE("coefficient Jacobian matches finite differences") {
  std::mt19937_64 rng(3);
  const OBBCage b = random_box(rng);
  const Vec3 p(0.2, -0.4, 0.9);
  const Eigen::Matrix<double, 8, 3> J = trilinear_jacobian(b, p);
  for (int k = 0; k < 8; ++k) {
    auto f = [&](const Eigen::VectorXd& x) { return trilinear_coeffs(b, Vec3(x))[k]; };
    const Eigen::VectorXd num = numeric_gradient(f, Eigen::VectorXd(p), 1e-6);
    CHECK(relative_error(J.row(k).transpose(), num) <= 1e-8);
  }
}

TEST_CASE("OBB fit") {
  const Mesh ell = testsupport::scaled(icosphere(2), 2.0, 0.5, 1.0);
  // Rotate so the principal axes are not the coordinate axes.
  const Mat3 R = Eigen::AngleAxisd(0.7, Vec3(1, 2, 3).normalized()).toRotationMatrix();
  const VertexArray pts = (ell.vertices() * R.transpose()).rowwise() + Eigen::RowVector3d(1, -2, 0.5);
  const OBBCage b = fit_obb(pts);

  CHECK((b.axes.transpose() * b.axes - Mat3::Identity()).norm() < 1e-12);
  CHECK(b.axes.determinant() == doctest::Approx(1.0));
  CHECK((b.axes.col(2) - b.axes.col(0).cross(b.axes.col(1))).norm() < 1e-12);
  CHECK(b.axes.col(0).sum() >= 0.0);
  CHECK(b.axes.col(1).sum() >= 0.0);
  // Largest spread first, aligned with the rotated x axis.
  CHECK(std::abs(b.axes.col(0).dot(R.col(0))) == doctest::Approx(1.0));
  CHECK(b.half_extents[0] == doctest::Approx(2.0).epsilon(1e-9));
  for (int i = 0; i < pts.rows(); ++i) {
    const Vec3 u = b.local_coords(pts.row(i).transpose());
    CHECK(u.minCoeff() >= -1e-12);
    CHECK(u.maxCoeff() <= 1.0 + 1e-12);
  }
}

TEST_CASE("OBB fit floors flat extents") {
  const Mesh g = testsupport::grid_mesh(4);
  const OBBCage b = fit_obb(g.vertices());
  CHECK(b.half_extents.minCoeff() == doctest::Approx(1e-4 * std::sqrt(2.0)));
  CHECK(fit_obb(g.vertices(), 0.25).half_extents.minCoeff() == doctest::Approx(0.25));
  const OBBCage sub = fit_obb(g.vertices(), std::vector<int>{0, 1, 2, 4, 5, 6});
  CHECK(sub.half_extents[0] == doctest::Approx(1.0 / 3.0));
  CHECK(sub.half_extents[1] == doctest::Approx(1.0 / 6.0));
  CHECK((sub.center - Vec3(1.0 / 3.0, 1.0 / 6.0, 0.0)).norm() < 1e-12);
}

TEST_CASE("cage loss is zero when vertices follow their cages") {
  const Mesh m = icosphere(2);
  std::vector<long long> raw(m.num_vertices());
  for (int i = 0; i < m.num_vertices(); ++i) raw[i] = m.vertex(i).x() > 0.0 ? 1 : 2;
  const PartSet parts(raw);
  std::vector<OBBCage> boxes;
  for (int l = 1; l <= parts.num_parts(); ++l) boxes.push_back(fit_obb(m.vertices(), parts.members(l)));
  const auto rest = rest_cage_coefficients(parts, boxes, m.vertices());

  std::mt19937_64 rng(4);
  std::vector<CageTransform> xf{random_similarity(rng), random_similarity(rng)};
  VertexArray moved = m.vertices();
  std::vector<OBBCage> moved_boxes;
  for (int l = 1; l <= 2; ++l) {
    moved_boxes.push_back(apply_cage_transform(boxes[l - 1], xf[l - 1]));
    for (int i : parts.members(l)) moved.row(i) = xf[l - 1].apply(m.vertex(i)).transpose();
  }
  const CageLoss at_rest = cage_loss(parts, rest, boxes, m.vertices());
  const CageLoss tracked = cage_loss(parts, rest, moved_boxes, moved);
  CHECK(at_rest.value <= 1e-24);
  CHECK(tracked.value <= 1e-20);
  CHECK(tracked.gradient.cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("cage loss closed form for a single displaced vertex") {
  // Unit box, vertex at the center: every coefficient is 1/8. Moving it so
  // u0 = 1/2 + d changes each coefficient by +-d/4, so the loss is d^2/2.
  OBBCage unit;
  unit.half_extents = Vec3::Constant(0.5);
  const PartSet parts(std::vector<long long>{0});
  VertexArray v = VertexArray::Zero(1, 3);
  const auto rest = rest_cage_coefficients(parts, {unit}, v);
  CHECK((rest[0] - CageCoefficients::Constant(0.125)).norm() < 1e-15);
  for (double d : {0.01, 0.1, 0.3, 0.7}) {
    v(0, 0) = d;
    CHECK(cage_loss(parts, rest, {unit}, v).value == doctest::Approx(0.5 * d * d).epsilon(1e-12));
  }
}

TEST_CASE("cage loss gradient matches finite differences") {
  const Mesh m = testsupport::jittered_icosahedron(14);
  std::vector<long long> raw(m.num_vertices());
  for (int i = 0; i < m.num_vertices(); ++i) raw[i] = i % 2;
  const PartSet parts(raw);
  std::vector<OBBCage> boxes;
  for (int l = 1; l <= 2; ++l) boxes.push_back(fit_obb(m.vertices(), parts.members(l)));
  const auto rest = rest_cage_coefficients(parts, boxes, m.vertices());
  std::mt19937_64 rng(6);
  std::vector<OBBCage> cur{apply_cage_transform(boxes[0], random_similarity(rng)),
                           apply_cage_transform(boxes[1], random_similarity(rng))};
  const VertexArray target = m.vertices() * 1.1;
  const CageLoss l = cage_loss(parts, rest, cur, target);
  auto f = [&](const Eigen::VectorXd& x) { return cage_loss(parts, rest, cur, testsupport::unflatten(x)).value; };
  CHECK(relative_error(testsupport::flatten(l.gradient), numeric_gradient(f, testsupport::flatten(target), 1e-6)) <=
        1e-5);
  CHECK_THROWS_AS(cage_loss(parts, rest, {boxes[0]}, target), DimensionError);
}

TEST_CASE("cage transform helpers") {
  CageTransform id;
  CHECK(id.is_identity());
  id.scale = 1.5;
  CHECK_FALSE(id.is_identity());
  CageTransform t;
  t.rotation = Eigen::Quaterniond(2.0, 0.0, 0.0, 0.0);  // unnormalized identity
  CHECK((t.apply(Vec3(1, 2, 3)) - Vec3(1, 2, 3)).norm() < 1e-15);
}
