#include "meshstyle/cage.hpp"

#include "meshstyle/error.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>

namespace meshstyle {

namespace {

constexpr int bit(int j, int axis) { return (j >> (2 - axis)) & 1; }

// Canonical sign: non-negative dot with (1,1,1); on a tie, first nonzero
// component positive.
Vec3 canonical_sign(Vec3 a) {
  const double s = a.sum();
  constexpr double tie = 1e-12;
  if (s < -tie) return -a;
  if (s > tie) return a;
  for (int k = 0; k < 3; ++k) {
    if (a[k] > tie) return a;
    if (a[k] < -tie) return -a;
  }
  return a;
}

}  // namespace

Vec3 OBBCage::corner(int j) const {
  Vec3 p = center;
  for (int k = 0; k < 3; ++k) p += (bit(j, k) ? 1.0 : -1.0) * half_extents[k] * axes.col(k);
  return p;
}

CornerArray OBBCage::corners() const {
  CornerArray out;
  for (int j = 0; j < 8; ++j) out[j] = corner(j);
  return out;
}

Vec3 OBBCage::local_coords(const Vec3& p) const {
  const Vec3 local = axes.transpose() * (p - center);
  return (local.array() + half_extents.array()) / (2.0 * half_extents.array());
}

bool CageTransform::is_identity() const {
  return scale == 1.0 && translation.isZero(0.0) &&
         rotation.normalized().coeffs().isApprox(Eigen::Quaterniond::Identity().coeffs(), 0.0);
}

OBBCage fit_obb(const VertexArray& points, std::optional<double> min_extent) {
  if (points.rows() < 1) throw ValidationError("fit_obb: need at least one point");
  const Vec3 mean = points.colwise().mean().transpose();
  const Eigen::MatrixX3d centered = points.rowwise() - mean.transpose();
  const Mat3 cov = centered.transpose() * centered / static_cast<double>(points.rows());

  Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
  Mat3 axes;
  // Eigen sorts ascending; take descending.
  axes.col(0) = canonical_sign(eig.eigenvectors().col(2));
  axes.col(1) = canonical_sign(eig.eigenvectors().col(1));
  axes.col(1) = (axes.col(1) - axes.col(1).dot(axes.col(0)) * axes.col(0)).normalized();
  axes.col(2) = axes.col(0).cross(axes.col(1)).normalized();

  const Eigen::MatrixX3d proj = points * axes;
  const Vec3 lo = proj.colwise().minCoeff().transpose();
  const Vec3 hi = proj.colwise().maxCoeff().transpose();
  const double floor =
      std::max(min_extent.value_or(1e-4 * bbox_diagonal_of(points)), 1e-12);

  OBBCage box;
  box.axes = axes;
  box.center = axes * (0.5 * (lo + hi));
  box.half_extents = (0.5 * (hi - lo)).cwiseMax(floor);
  return box;
}

OBBCage fit_obb(const VertexArray& points, const std::vector<int>& subset,
                std::optional<double> min_extent) {
  VertexArray sub(static_cast<Eigen::Index>(subset.size()), 3);
  for (std::size_t i = 0; i < subset.size(); ++i) sub.row(static_cast<Eigen::Index>(i)) = points.row(subset[i]);
  return fit_obb(sub, min_extent);
}

CageCoefficients trilinear_coeffs(const OBBCage& box, const Vec3& p) {
  const Vec3 u = box.local_coords(p);
  CageCoefficients w;
  for (int j = 0; j < 8; ++j) {
    double prod = 1.0;
    for (int k = 0; k < 3; ++k) prod *= bit(j, k) ? u[k] : 1.0 - u[k];
    w[j] = prod;
  }
  return w;
}

Eigen::Matrix<double, 8, 3> trilinear_jacobian(const OBBCage& box, const Vec3& p) {
  const Vec3 u = box.local_coords(p);
  Eigen::Matrix<double, 8, 3> dw_du;
  for (int j = 0; j < 8; ++j) {
    for (int k = 0; k < 3; ++k) {
      double prod = bit(j, k) ? 1.0 : -1.0;
      for (int m = 0; m < 3; ++m)
        if (m != k) prod *= bit(j, m) ? u[m] : 1.0 - u[m];
      dw_du(j, k) = prod;
    }
  }
  // du/dp = diag(1 / 2h) * axes^T
  const Mat3 du_dp = (0.5 * box.half_extents.cwiseInverse()).asDiagonal() * box.axes.transpose();
  return dw_du * du_dp;
}

Vec3 reconstruct(const CornerArray& corners, const CageCoefficients& w) {
  Vec3 p = Vec3::Zero();
  for (int j = 0; j < 8; ++j) p += w[j] * corners[j];
  return p;
}

OBBCage apply_cage_transform(const OBBCage& box, const CageTransform& xf) {
  if (!(xf.scale > 0.0)) throw ValidationError("cage transform scale must be positive");
  const Mat3 R = xf.rotation_matrix();
  OBBCage out;
  out.center = xf.scale * (R * box.center) + xf.translation;
  out.axes = R * box.axes;
  out.half_extents = xf.scale * box.half_extents;
  return out;
}

CornerArray transformed_corners(const OBBCage& box, const CageTransform& xf) {
  return apply_cage_transform(box, xf).corners();
}

std::vector<CageCoefficients> rest_cage_coefficients(const PartSet& parts,
                                                     const std::vector<OBBCage>& boxes,
                                                     const VertexArray& vertices) {
  if (parts.num_vertices() != vertices.rows() ||
      static_cast<int>(boxes.size()) != parts.num_parts())
    throw DimensionError("rest_cage_coefficients: part/box/vertex arity mismatch");
  std::vector<CageCoefficients> out(static_cast<std::size_t>(vertices.rows()));
  for (Eigen::Index i = 0; i < vertices.rows(); ++i)
    out[i] = trilinear_coeffs(boxes[parts.label(static_cast<int>(i)) - 1], vertices.row(i).transpose());
  return out;
}

CageLoss cage_loss(const PartSet& parts, const std::vector<CageCoefficients>& rest_coeffs,
                   const std::vector<OBBCage>& boxes, const VertexArray& target_vertices) {
  const auto n = target_vertices.rows();
  if (parts.num_vertices() != n || static_cast<Eigen::Index>(rest_coeffs.size()) != n ||
      static_cast<int>(boxes.size()) != parts.num_parts())
    throw DimensionError("cage_loss: part/coefficient/box/vertex arity mismatch");

  CageLoss out;
  out.gradient = VertexArray::Zero(n, 3);
  const int L = parts.num_parts();
  if (L == 0) return out;
  for (int l = 1; l <= L; ++l) {
    const auto& members = parts.members(l);
    const double weight = 1.0 / (static_cast<double>(L) * static_cast<double>(members.size()));
    double part_sum = 0.0;
    for (int i : members) {
      const Vec3 p = target_vertices.row(i).transpose();
      const CageCoefficients diff = rest_coeffs[i] - trilinear_coeffs(boxes[l - 1], p);
      part_sum += diff.squaredNorm();
      out.gradient.row(i) = (-2.0 * weight) * (diff.transpose() * trilinear_jacobian(boxes[l - 1], p));
    }
    out.value += weight * part_sum;
  }
  return out;
}

}  // namespace meshstyle
