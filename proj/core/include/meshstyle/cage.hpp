#pragma once

#include "meshstyle/mesh.hpp"
#include "meshstyle/parts.hpp"

#include <Eigen/Geometry>

#include <array>
#include <optional>
#include <vector>

namespace meshstyle {

using CageCoefficients = Eigen::Matrix<double, 8, 1>;
using CornerArray = std::array<Vec3, 8>;

/// Oriented box used as an 8-corner deformation cage.
///
/// Corner j has axis-sign bits (b0 b1 b2) = (j>>2 & 1, j>>1 & 1, j & 1), so
/// the order is ---, --+, -+-, -++, +--, +-+, ++-, +++ over (axis0, axis1,
/// axis2). Columns of `axes` are the box axes.
struct OBBCage {
  Vec3 center = Vec3::Zero();
  Mat3 axes = Mat3::Identity();
  Vec3 half_extents = Vec3::Ones();

  Vec3 corner(int j) const;
  CornerArray corners() const;
  // Normalized box coordinates: 0 at the --- corner, 1 at +++.
  Vec3 local_coords(const Vec3& p) const;
};

/// Similarity p' = s R p + T (about the origin). R is the normalized form of
/// `rotation`, so an unnormalized quaternion is tolerated.
struct CageTransform {
  double scale = 1.0;
  Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();
  Vec3 translation = Vec3::Zero();

  Mat3 rotation_matrix() const { return rotation.normalized().toRotationMatrix(); }
  Vec3 apply(const Vec3& p) const { return scale * (rotation_matrix() * p) + translation; }
  bool is_identity() const;
};

/// PCA box fit. Axes follow descending covariance eigenvalue; the first two
/// have non-negative dot with (1,1,1) (ties toward +x, then +y), the third is
/// their cross product. Half-extents are floored at `min_extent`, which
/// defaults to 1e-4 x the point set's bbox diagonal (1e-12 absolute minimum).
OBBCage fit_obb(const VertexArray& points, std::optional<double> min_extent = std::nullopt);
OBBCage fit_obb(const VertexArray& points, const std::vector<int>& subset,
                std::optional<double> min_extent = std::nullopt);

/// Trilinear weights of `p` in `box`; defined everywhere, sums to 1.
CageCoefficients trilinear_coeffs(const OBBCage& box, const Vec3& p);

/// d(coeffs)/d(p), 8 x 3.
Eigen::Matrix<double, 8, 3> trilinear_jacobian(const OBBCage& box, const Vec3& p);

Vec3 reconstruct(const CornerArray& corners, const CageCoefficients& w);

OBBCage apply_cage_transform(const OBBCage& box, const CageTransform& xf);
CornerArray transformed_corners(const OBBCage& box, const CageTransform& xf);

/// Rest coefficients of every vertex in its own part's box.
std::vector<CageCoefficients> rest_cage_coefficients(const PartSet& parts,
                                                     const std::vector<OBBCage>& boxes,
                                                     const VertexArray& vertices);

struct CageLoss {
  double value = 0.0;
  VertexArray gradient;  // d value / d target vertices
};

/// Mean over parts of the per-part mean squared coefficient difference
/// between the rest coefficients and the target vertices' coefficients in
/// the transformed part boxes. `boxes[l-1]` is part l's current box.
CageLoss cage_loss(const PartSet& parts, const std::vector<CageCoefficients>& rest_coeffs,
                   const std::vector<OBBCage>& boxes, const VertexArray& target_vertices);

}  // namespace meshstyle
