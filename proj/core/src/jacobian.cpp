#include "meshstyle/jacobian.hpp"

#include "meshstyle/error.hpp"

#include <algorithm>

namespace meshstyle {

std::atomic<long> PoissonFactorization::counter_{0};

JacobianField init_identity(int num_faces) {
  return JacobianField(static_cast<std::size_t>(num_faces), Mat3::Identity());
}

JacobianField init_identity(const Mesh& mesh) { return init_identity(mesh.num_faces()); }

JacobianField deformation_gradients(const GradientOperator& grad, const VertexArray& deformed) {
  if (deformed.rows() != grad.num_vertices())
    throw DimensionError("deformation_gradients: vertex count mismatch");
  JacobianField J(static_cast<std::size_t>(grad.num_faces()));
  for (int c = 0; c < 3; ++c) {
    const Eigen::MatrixX3d g = grad.apply(deformed.col(c));
    for (int f = 0; f < grad.num_faces(); ++f) J[f].row(c) = g.row(f);
  }
  return J;
}

PoissonFactorization::PoissonFactorization(const Mesh& mesh)
    : num_vertices_(mesh.num_vertices()), grad_(mesh), areas_(mesh.face_areas()) {
  const auto& G = grad_.matrix();
  Eigen::VectorXd row_weights(G.rows());
  for (int f = 0; f < num_faces(); ++f) row_weights.segment<3>(3 * f).setConstant(areas_[f]);
  const Eigen::SparseMatrix<double> L = G.transpose() * row_weights.asDiagonal() * G;

  component_ = vertex_components(num_vertices_, mesh.faces());
  const int ncomp = component_.empty() ? 0 : *std::max_element(component_.begin(), component_.end()) + 1;
  pinned_.assign(static_cast<std::size_t>(ncomp), -1);
  for (int v = 0; v < num_vertices_; ++v)
    if (pinned_[component_[v]] < 0) pinned_[component_[v]] = v;

  rest_component_centroids_ = Eigen::MatrixXd::Zero(ncomp, 3);
  component_sizes_ = Eigen::VectorXd::Zero(ncomp);
  for (int v = 0; v < num_vertices_; ++v) {
    rest_component_centroids_.row(component_[v]) += mesh.vertices().row(v);
    component_sizes_[component_[v]] += 1.0;
  }
  for (int c = 0; c < ncomp; ++c) rest_component_centroids_.row(c) /= component_sizes_[c];

  reduced_index_.assign(static_cast<std::size_t>(num_vertices_), -1);
  std::vector<char> is_pinned(static_cast<std::size_t>(num_vertices_), 0);
  for (int p : pinned_) is_pinned[p] = 1;
  int next = 0;
  for (int v = 0; v < num_vertices_; ++v)
    if (!is_pinned[v]) reduced_index_[v] = next++;

  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(L.nonZeros()));
  for (int k = 0; k < L.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(L, k); it; ++it) {
      const int r = reduced_index_[it.row()], c = reduced_index_[it.col()];
      if (r >= 0 && c >= 0) trips.emplace_back(r, c, it.value());
    }
  Eigen::SparseMatrix<double> reduced(next, next);
  reduced.setFromTriplets(trips.begin(), trips.end());

  if (next > 0) {
    solver_.compute(reduced);
    if (solver_.info() != Eigen::Success)
      throw ValidationError("Poisson system factorization failed (mesh not well conditioned)");
  }
  ++counter_;
}

void PoissonFactorization::center_components(Eigen::MatrixXd& values, bool add_rest) const {
  const auto ncomp = component_sizes_.size();
  Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(ncomp, values.cols());
  for (int v = 0; v < num_vertices_; ++v) mean.row(component_[v]) += values.row(v);
  for (Eigen::Index c = 0; c < ncomp; ++c) mean.row(c) /= component_sizes_[c];
  for (int v = 0; v < num_vertices_; ++v) {
    values.row(v) -= mean.row(component_[v]);
    if (add_rest) values.row(v) += rest_component_centroids_.row(component_[v]);
  }
}

Eigen::MatrixXd PoissonFactorization::apply_inverse(const Eigen::MatrixXd& rhs) const {
  if (rhs.rows() != num_vertices_) throw DimensionError("apply_inverse: row count mismatch");
  const int nred = static_cast<int>(num_vertices_ - pinned_.size());
  Eigen::MatrixXd reduced_rhs(nred, rhs.cols());
  for (int v = 0; v < num_vertices_; ++v)
    if (reduced_index_[v] >= 0) reduced_rhs.row(reduced_index_[v]) = rhs.row(v);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(num_vertices_, rhs.cols());
  if (nred == 0) return out;
  const Eigen::MatrixXd sol = solver_.solve(reduced_rhs);
  for (int v = 0; v < num_vertices_; ++v)
    if (reduced_index_[v] >= 0) out.row(v) = sol.row(reduced_index_[v]);
  return out;
}

VertexArray PoissonFactorization::solve(const JacobianField& J) const {
  if (static_cast<int>(J.size()) != num_faces())
    throw DimensionError("solve_poisson: Jacobian field has " + std::to_string(J.size()) +
                         " entries, mesh has " + std::to_string(num_faces()) + " faces");
  // rhs_c = G^T M j_c, with j_c stacking row c of every J_i
  Eigen::MatrixXd targets(3 * num_faces(), 3);
  for (int f = 0; f < num_faces(); ++f)
    for (int c = 0; c < 3; ++c) targets.block<3, 1>(3 * f, c) = areas_[f] * J[f].row(c).transpose();
  Eigen::MatrixXd x = apply_inverse(grad_.matrix().transpose() * targets);
  center_components(x, true);
  return x;
}

JacobianField PoissonFactorization::adjoint(const VertexArray& dL_dV) const {
  if (dL_dV.rows() != num_vertices_)
    throw DimensionError("poisson_adjoint: gradient has " + std::to_string(dL_dV.rows()) +
                         " rows, mesh has " + std::to_string(num_vertices_) + " vertices");
  Eigen::MatrixXd g = dL_dV;
  center_components(g, false);
  const Eigen::MatrixXd r = apply_inverse(g);
  const Eigen::MatrixXd Gr = grad_.matrix() * r;  // 3F x 3, column c = channel c
  JacobianField out(static_cast<std::size_t>(num_faces()));
  for (int f = 0; f < num_faces(); ++f)
    for (int c = 0; c < 3; ++c) out[f].row(c) = areas_[f] * Gr.block<3, 1>(3 * f, c).transpose();
  return out;
}

VertexArray solve_poisson(const PoissonFactorization& fact, const JacobianField& J) {
  return fact.solve(J);
}

JacobianField poisson_adjoint(const PoissonFactorization& fact, const VertexArray& dL_dV) {
  return fact.adjoint(dL_dV);
}

JacobianLoss identity_reg(const JacobianField& J, const Eigen::VectorXd& face_areas) {
  if (static_cast<Eigen::Index>(J.size()) != face_areas.size())
    throw DimensionError("identity_reg: field/area size mismatch");
  JacobianLoss out;
  out.gradient.resize(J.size());
  const double total = face_areas.sum();
  if (J.empty() || !(total > 0.0)) {
    std::fill(out.gradient.begin(), out.gradient.end(), Mat3::Zero());
    return out;
  }
  for (std::size_t f = 0; f < J.size(); ++f) {
    const Mat3 diff = J[f] - Mat3::Identity();
    out.value += face_areas[f] * diff.squaredNorm();
    out.gradient[f] = (2.0 * face_areas[f] / total) * diff;
  }
  out.value /= total;
  return out;
}

double dot(const JacobianField& a, const JacobianField& b) {
  if (a.size() != b.size()) throw DimensionError("dot: Jacobian field size mismatch");
  double s = 0.0;
  for (std::size_t f = 0; f < a.size(); ++f) s += a[f].cwiseProduct(b[f]).sum();
  return s;
}

}  // namespace meshstyle
