#include "meshstyle/jacobian.hpp"
#include "meshstyle/sampling.hpp"

#include "test_support.hpp"

#include <doctest.h>

#include <Eigen/Dense>

#include <random>

using namespace meshstyle;
using testsupport::flatten;
using testsupport::numeric_gradient;
using testsupport::relative_error;

namespace {

JacobianField random_field(int faces, unsigned seed, double spread = 0.3) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, spread);
  JacobianField J(faces);
  for (auto& j : J) {
    j = Mat3::Identity();
    for (int k = 0; k < 9; ++k) j.data()[k] += n(rng);
  }
  return J;
}

// Dense oracle: x_c = pinv(G^T M G) G^T M j_c, then each component shifted
// to its rest centroid.
VertexArray dense_poisson(const Mesh& mesh, const JacobianField& J) {
  const GradientOperator g(mesh);
  const Eigen::MatrixXd G = Eigen::MatrixXd(g.matrix());
  Eigen::VectorXd w(3 * mesh.num_faces());
  for (int f = 0; f < mesh.num_faces(); ++f) w.segment<3>(3 * f).setConstant(mesh.face_areas()[f]);
  const Eigen::MatrixXd L = G.transpose() * w.asDiagonal() * G;
  const Eigen::MatrixXd Lp = L.completeOrthogonalDecomposition().pseudoInverse();
  VertexArray out(mesh.num_vertices(), 3);
  for (int c = 0; c < 3; ++c) {
    Eigen::VectorXd jc(3 * mesh.num_faces());
    for (int f = 0; f < mesh.num_faces(); ++f) jc.segment<3>(3 * f) = J[f].row(c).transpose();
    out.col(c) = Lp * (G.transpose() * (w.asDiagonal() * jc));
  }
  const auto comp = vertex_components(mesh.num_vertices(), mesh.faces());
  const int nc = *std::max_element(comp.begin(), comp.end()) + 1;
  for (int k = 0; k < nc; ++k) {
    Vec3 rest = Vec3::Zero(), cur = Vec3::Zero();
    int cnt = 0;
    for (int i = 0; i < mesh.num_vertices(); ++i)
      if (comp[i] == k) {
        rest += mesh.vertex(i);
        cur += out.row(i).transpose();
        ++cnt;
      }
    for (int i = 0; i < mesh.num_vertices(); ++i)
      if (comp[i] == k) out.row(i) += ((rest - cur) / cnt).transpose();
  }
  return out;
}

Mesh two_pieces() {
  const Mesh a = testsupport::jittered_icosahedron(11);
  const Mesh b = testsupport::jittered_icosahedron(12);
  VertexArray v(a.num_vertices() + b.num_vertices(), 3);
  v << a.vertices(), (b.vertices().rowwise() + Eigen::RowVector3d(4, 0, 0));
  FaceArray f(a.num_faces() + b.num_faces(), 3);
  f << a.faces(), (b.faces().array() + a.num_vertices()).matrix();
  return Mesh(v, f);
}

}  // namespace

TEST_CASE("identity Jacobians reproduce the rest mesh") {
  const Mesh m = icosphere(3);
  const PoissonFactorization fact(m);
  const VertexArray v = fact.solve(init_identity(m));
  CHECK((v - m.vertices()).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("uniform and affine Jacobians scale about the centroid") {
  const Mesh m = testsupport::jittered_icosahedron(2);
  const PoissonFactorization fact(m);
  const Vec3 c = m.centroid();
  JacobianField J(m.num_faces(), 2.0 * Mat3::Identity());
  VertexArray expect = (2.0 * (m.vertices().rowwise() - c.transpose())).rowwise() + c.transpose();
  CHECK((fact.solve(J) - expect).cwiseAbs().maxCoeff() <= 1e-7);

  Mat3 A;
  A << 1.2, 0.3, -0.1, 0.0, 0.8, 0.2, 0.4, -0.3, 1.1;
  J.assign(m.num_faces(), A);
  expect = ((m.vertices().rowwise() - c.transpose()) * A.transpose()).rowwise() + c.transpose();
  CHECK((fact.solve(J) - expect).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("sparse solve matches the dense pseudoinverse oracle") {
  SUBCASE("single component") {
    const Mesh m = testsupport::jittered_icosahedron(4);
    const JacobianField J = random_field(m.num_faces(), 17);
    CHECK((solve_poisson(PoissonFactorization(m), J) - dense_poisson(m, J)).cwiseAbs().maxCoeff() <= 1e-8);
  }
  SUBCASE("two components keep their own centroids") {
    const Mesh m = two_pieces();
    const JacobianField J = random_field(m.num_faces(), 23);
    const PoissonFactorization fact(m);
    CHECK(fact.pinned_vertices().size() == 2);
    CHECK((fact.solve(J) - dense_poisson(m, J)).cwiseAbs().maxCoeff() <= 1e-8);
  }
  SUBCASE("open grid") {
    const Mesh m = testsupport::grid_mesh(6);
    const JacobianField J = random_field(m.num_faces(), 29);
    CHECK((solve_poisson(PoissonFactorization(m), J) - dense_poisson(m, J)).cwiseAbs().maxCoeff() <= 1e-8);
  }
}

TEST_CASE("deformation gradients of a solve reproduce realizable fields") {
  const Mesh m = testsupport::jittered_icosahedron(6);
  const PoissonFactorization fact(m);
  VertexArray target = m.vertices();
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 0.1);
  for (Eigen::Index i = 0; i < target.size(); ++i) target.data()[i] += n(rng);
  const JacobianField J = deformation_gradients(fact.gradient(), target);
  const VertexArray v = fact.solve(J);
  // Same up to translation.
  const Eigen::RowVector3d shift = (target.colwise().mean() - v.colwise().mean());
  CHECK(((v.rowwise() + shift) - target).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("adjoint matches finite differences of a scalar loss") {
  const Mesh m = two_pieces();
  const PoissonFactorization fact(m);
  const JacobianField J0 = random_field(m.num_faces(), 31);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 1.0);
  VertexArray W(m.num_vertices(), 3);
  for (Eigen::Index i = 0; i < W.size(); ++i) W.data()[i] = n(rng);

  // L = sum W.V + 0.5 |V|^2
  auto loss_of = [&](const JacobianField& J) {
    const VertexArray V = fact.solve(J);
    return (W.array() * V.array()).sum() + 0.5 * V.squaredNorm();
  };
  const VertexArray V0 = fact.solve(J0);
  const JacobianField g = fact.adjoint(W + V0);

  Eigen::VectorXd x(9 * J0.size());
  for (std::size_t f = 0; f < J0.size(); ++f) x.segment<9>(9 * f) = Eigen::Map<const Eigen::Matrix<double, 9, 1>>(J0[f].data());
  auto f = [&](const Eigen::VectorXd& p) {
    JacobianField J(J0.size());
    for (std::size_t k = 0; k < J.size(); ++k) J[k] = Eigen::Map<const Mat3>(p.data() + 9 * k);
    return loss_of(J);
  };
  Eigen::VectorXd analytic(x.size());
  for (std::size_t k = 0; k < g.size(); ++k) analytic.segment<9>(9 * k) = Eigen::Map<const Eigen::Matrix<double, 9, 1>>(g[k].data());
  CHECK(relative_error(analytic, numeric_gradient(f, x, 1e-5)) <= 1e-5);
  CHECK(poisson_adjoint(fact, W + V0)[3] == g[3]);
}

TEST_CASE("factorization happens once per mesh") {
  const Mesh m = icosphere(2);
  const long before = PoissonFactorization::factorizations_performed();
  const PoissonFactorization fact(m);
  for (int i = 0; i < 5; ++i) {
    const VertexArray v = fact.solve(random_field(m.num_faces(), i));
    (void)fact.adjoint(v);
  }
  CHECK(PoissonFactorization::factorizations_performed() == before + 1);
}

TEST_CASE("identity regularizer value and gradient") {
  const Mesh m = testsupport::jittered_icosahedron(8);
  const JacobianField J = random_field(m.num_faces(), 41);
  const JacobianLoss r = identity_reg(J, m.face_areas());
  double expect = 0.0;
  for (int f = 0; f < m.num_faces(); ++f) expect += m.face_areas()[f] * (J[f] - Mat3::Identity()).squaredNorm();
  expect /= m.total_area();
  CHECK(r.value == doctest::Approx(expect).epsilon(1e-14));
  CHECK(identity_reg(init_identity(m), m.face_areas()).value == 0.0);

  Eigen::VectorXd x(9 * J.size()), analytic(9 * J.size());
  for (std::size_t f = 0; f < J.size(); ++f) {
    x.segment<9>(9 * f) = Eigen::Map<const Eigen::Matrix<double, 9, 1>>(J[f].data());
    analytic.segment<9>(9 * f) = Eigen::Map<const Eigen::Matrix<double, 9, 1>>(r.gradient[f].data());
  }
  auto f = [&](const Eigen::VectorXd& p) {
    JacobianField K(J.size());
    for (std::size_t k = 0; k < K.size(); ++k) K[k] = Eigen::Map<const Mat3>(p.data() + 9 * k);
    return identity_reg(K, m.face_areas()).value;
  };
  CHECK(relative_error(analytic, numeric_gradient(f, x, 1e-6)) <= 1e-5);
}

TEST_CASE("solve rejects a field of the wrong size") {
  const Mesh m = icosphere(0);
  const PoissonFactorization fact(m);
  CHECK_THROWS(fact.solve(JacobianField(3, Mat3::Identity())));
  CHECK_THROWS(fact.adjoint(VertexArray::Zero(2, 3)));
}
