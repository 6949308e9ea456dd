#include "meshstyle/gradient_operator.hpp"

#include "meshstyle/error.hpp"

#include <vector>

namespace meshstyle {

GradientOperator::GradientOperator(const Mesh& mesh) {
  const auto& V = mesh.vertices();
  const auto& F = mesh.faces();
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(F.rows()) * 9);

  for (int f = 0; f < mesh.num_faces(); ++f) {
    const Vec3 cross = face_cross(V, F, f);
    const double twice_area = cross.norm();
    if (!(twice_area > 0.0))
      throw ValidationError("singular face " + std::to_string(f) + " in gradient operator");
    const Vec3 n = cross / twice_area;
    // grad of the hat function at corner c is n x (opposite edge, ccw) / 2A
    for (int c = 0; c < 3; ++c) {
      const Vec3 a = V.row(F(f, (c + 1) % 3)).transpose();
      const Vec3 b = V.row(F(f, (c + 2) % 3)).transpose();
      const Vec3 g = n.cross(b - a) / twice_area;
      for (int d = 0; d < 3; ++d) trips.emplace_back(3 * f + d, F(f, c), g[d]);
    }
  }
  op_.resize(3 * static_cast<Eigen::Index>(F.rows()), V.rows());
  op_.setFromTriplets(trips.begin(), trips.end());
  op_.makeCompressed();
}

Eigen::MatrixX3d GradientOperator::apply(const Eigen::VectorXd& field) const {
  if (field.size() != op_.cols()) throw DimensionError("gradient operator: field size mismatch");
  const Eigen::VectorXd g = op_ * field;
  return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>>(
      g.data(), num_faces(), 3);
}

GradientOperator face_gradient_operator(const Mesh& mesh) { return GradientOperator(mesh); }

}  // namespace meshstyle
