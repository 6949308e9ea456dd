#pragma once

#include "meshstyle/mesh.hpp"

#include <Eigen/SparseCore>

namespace meshstyle {

/// Per-face intrinsic gradient of piecewise-linear vertex functions.
///
/// The matrix has 3F rows and V columns: rows 3f, 3f+1, 3f+2 hold the x, y, z
/// components of the gradient on face f. Each face's rows depend only on the
/// rest positions of its three vertices, and the result always lies in the
/// face's tangent plane.
class GradientOperator {
 public:
  explicit GradientOperator(const Mesh& mesh);

  const Eigen::SparseMatrix<double>& matrix() const noexcept { return op_; }
  int num_faces() const noexcept { return static_cast<int>(op_.rows() / 3); }
  int num_vertices() const noexcept { return static_cast<int>(op_.cols()); }

  // Gradient of a scalar vertex field, one row per face.
  Eigen::MatrixX3d apply(const Eigen::VectorXd& field) const;

 private:
  Eigen::SparseMatrix<double> op_;
};

GradientOperator face_gradient_operator(const Mesh& mesh);

}  // namespace meshstyle
