#pragma once

#include "meshstyle/gradient_operator.hpp"
#include "meshstyle/mesh.hpp"

#include <Eigen/SparseCholesky>

#include <atomic>
#include <vector>

namespace meshstyle {

/// One 3x3 deformation gradient per face. Row c of J_i is the target
/// gradient of output coordinate c on face i.
using JacobianField = std::vector<Mat3>;

JacobianField init_identity(const Mesh& mesh);
JacobianField init_identity(int num_faces);

/// Per-face deformation gradients of `deformed` with respect to the rest
/// mesh (tangential part only; the normal column direction maps to zero).
JacobianField deformation_gradients(const GradientOperator& grad, const VertexArray& deformed);

/// Prefactored area-weighted Poisson system L = G^T M G.
///
/// L has one constant null vector per connected component. One vertex per
/// component is pinned to remove it; solutions are then translated so that
/// every component's centroid equals its rest centroid. The pinned vertex
/// choice does not affect results.
class PoissonFactorization {
 public:
  explicit PoissonFactorization(const Mesh& mesh);

  PoissonFactorization(const PoissonFactorization&) = delete;
  PoissonFactorization& operator=(const PoissonFactorization&) = delete;

  int num_vertices() const noexcept { return num_vertices_; }
  int num_faces() const noexcept { return static_cast<int>(areas_.size()); }
  const GradientOperator& gradient() const noexcept { return grad_; }
  const Eigen::VectorXd& face_areas() const noexcept { return areas_; }
  const std::vector<int>& components() const noexcept { return component_; }
  const std::vector<int>& pinned_vertices() const noexcept { return pinned_; }

  // Minimizer of sum_i |t_i| ||grad_i phi - J_i||^2 with pinned centroids.
  VertexArray solve(const JacobianField& J) const;

  // Gradient of a loss w.r.t. J given its gradient w.r.t. solve(J).
  JacobianField adjoint(const VertexArray& dL_dV) const;

  // Applies the pinned inverse to arbitrary right-hand sides (V x k).
  Eigen::MatrixXd apply_inverse(const Eigen::MatrixXd& rhs) const;

  // Process-wide count of factorizations, for tests asserting reuse.
  static long factorizations_performed() noexcept { return counter_.load(); }

 private:
  void center_components(Eigen::MatrixXd& values, bool add_rest) const;

  int num_vertices_;
  GradientOperator grad_;
  Eigen::VectorXd areas_;
  std::vector<int> component_;
  std::vector<int> pinned_;
  std::vector<int> reduced_index_;
  Eigen::MatrixXd rest_component_centroids_;  // C x 3
  Eigen::VectorXd component_sizes_;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver_;
  static std::atomic<long> counter_;
};

VertexArray solve_poisson(const PoissonFactorization& fact, const JacobianField& J);
JacobianField poisson_adjoint(const PoissonFactorization& fact, const VertexArray& dL_dV);

struct JacobianLoss {
  double value = 0.0;
  JacobianField gradient;
};

/// Area-weighted mean squared Frobenius distance to the identity.
JacobianLoss identity_reg(const JacobianField& J, const Eigen::VectorXd& face_areas);

double dot(const JacobianField& a, const JacobianField& b);

}  // namespace meshstyle
