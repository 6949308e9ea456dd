#include "meshstyle/symmetry.hpp"

#include "meshstyle/error.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <boost/geometry.hpp>
#include <boost/geometry/index/rtree.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace bg = boost::geometry;
namespace bgi = boost::geometry::index;

namespace meshstyle {

namespace {

using BPoint = bg::model::point<double, 3, bg::cs::cartesian>;
using Entry = std::pair<BPoint, int>;

BPoint to_bpoint(const Vec3& p) { return BPoint(p.x(), p.y(), p.z()); }

Mat3 pca_axes(const VertexArray& vertices) {
  const Vec3 mean = centroid_of(vertices);
  const Eigen::MatrixX3d centered = vertices.rowwise() - mean.transpose();
  const Mat3 cov = centered.transpose() * centered / static_cast<double>(vertices.rows());
  Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
  Mat3 axes;
  for (int k = 0; k < 3; ++k) axes.col(k) = eig.eigenvectors().col(2 - k);
  return axes;
}

}  // namespace

SymmetryThresholds SymmetryThresholds::relative_to(const VertexArray& vertices) {
  const double diag = bbox_diagonal_of(vertices);
  return {0.02 * diag, 0.002 * static_cast<double>(vertices.rows()) * diag};
}

std::vector<int> nearest_vertices(const VertexArray& vertices, const VertexArray& queries) {
  std::vector<Entry> entries;
  entries.reserve(static_cast<std::size_t>(vertices.rows()));
  for (Eigen::Index i = 0; i < vertices.rows(); ++i)
    entries.emplace_back(to_bpoint(vertices.row(i).transpose()), static_cast<int>(i));
  const bgi::rtree<Entry, bgi::rstar<16>> tree(entries.begin(), entries.end());

  std::vector<int> out(static_cast<std::size_t>(queries.rows()), -1);
  std::vector<Entry> hits;
  for (Eigen::Index q = 0; q < queries.rows(); ++q) {
    const Vec3 p = queries.row(q).transpose();
    hits.clear();
    tree.query(bgi::nearest(to_bpoint(p), 8), std::back_inserter(hits));
    double best = std::numeric_limits<double>::infinity();
    for (const auto& [pt, idx] : hits) {
      const double d = (vertices.row(idx).transpose() - p).squaredNorm();
      if (d < best || (d == best && idx < out[q])) {
        best = d;
        out[q] = idx;
      }
    }
  }
  return out;
}

SymmetryDetection detect_symmetry(const VertexArray& vertices,
                                  std::optional<SymmetryThresholds> thresholds) {
  if (vertices.rows() < 3) throw ValidationError("detect_symmetry: need at least 3 vertices");
  const SymmetryThresholds tau = thresholds.value_or(SymmetryThresholds::relative_to(vertices));
  const Vec3 centroid = centroid_of(vertices);
  const Mat3 axes = pca_axes(vertices);

  SymmetryDetection out;
  for (int k = 0; k < 3; ++k) {
    const Vec3 a = axes.col(k).normalized();
    VertexArray mirrored(vertices.rows(), 3);
    for (Eigen::Index i = 0; i < vertices.rows(); ++i) {
      const Vec3 v = vertices.row(i).transpose();
      mirrored.row(i) = (v - 2.0 * (v - centroid).dot(a) * a).transpose();
    }
    const std::vector<int> match = nearest_vertices(vertices, mirrored);

    AxisCandidate cand{k, a, 0.0, 0.0, false};
    for (Eigen::Index i = 0; i < vertices.rows(); ++i) {
      const double r = (mirrored.row(i) - vertices.row(match[i])).norm();
      cand.max_residual = std::max(cand.max_residual, r);
      cand.sum_residual += r;
    }
    cand.accepted = cand.max_residual < tau.max_residual && cand.sum_residual < tau.sum_residual;
    out.candidates.push_back(cand);
    if (!cand.accepted) continue;

    std::set<std::pair<int, int>> unique;
    for (Eigen::Index i = 0; i < vertices.rows(); ++i)
      unique.insert(std::minmax(static_cast<int>(i), match[i]));
    SymmetryPlane plane;
    plane.axis_index = k;
    plane.axis = a;
    plane.point = centroid;
    plane.pairs.assign(unique.begin(), unique.end());
    plane.thresholds = tau;
    plane.max_residual = cand.max_residual;
    plane.sum_residual = cand.sum_residual;
    out.planes.push_back(std::move(plane));
  }
  return out;
}

std::vector<SymmetryPlane> detect_symmetry_planes(const VertexArray& vertices, double tau1,
                                                  double tau2) {
  return detect_symmetry(vertices, SymmetryThresholds{tau1, tau2}).planes;
}

MidplaneFit fit_midpoint_plane(const std::vector<std::pair<int, int>>& pairs,
                               const VertexArray& vertices, const Vec3& reference_axis) {
  MidplaneFit fit;
  fit.normal = reference_axis.normalized();
  fit.fallback = true;
  if (pairs.empty()) return fit;

  Eigen::MatrixX3d mids(static_cast<Eigen::Index>(pairs.size()), 3);
  for (std::size_t p = 0; p < pairs.size(); ++p)
    mids.row(static_cast<Eigen::Index>(p)) = 0.5 * (vertices.row(pairs[p].first) + vertices.row(pairs[p].second));
  fit.point = mids.colwise().mean().transpose();
  if (pairs.size() < 3) return fit;

  const Eigen::MatrixX3d centered = mids.rowwise() - fit.point.transpose();
  const Mat3 cov = centered.transpose() * centered / static_cast<double>(pairs.size());
  Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullV);
  fit.singular_values = svd.singularValues();
  const double scale = std::max(fit.singular_values[0], std::numeric_limits<double>::min());
  // rank < 2: midpoints collinear or coincident, plane undetermined
  if (fit.singular_values[0] <= 0.0 || fit.singular_values[1] <= 1e-12 * scale) return fit;

  Vec3 n = svd.matrixV().col(2).normalized();
  if (n.dot(reference_axis) < 0.0) n = -n;
  fit.normal = n;
  fit.fallback = false;
  return fit;
}

SymmetryLoss symmetry_loss(const VertexArray& vertices, const std::vector<SymmetryPlane>& planes) {
  std::vector<Vec3> normals;
  normals.reserve(planes.size());
  for (const auto& plane : planes)
    normals.push_back(fit_midpoint_plane(plane.pairs, vertices, plane.axis).normal);
  return symmetry_loss(vertices, planes, normals);
}

SymmetryLoss symmetry_loss(const VertexArray& vertices, const std::vector<SymmetryPlane>& planes,
                           const std::vector<Vec3>& normals) {
  if (normals.size() != planes.size()) throw DimensionError("symmetry_loss: one normal per plane required");
  const auto nv = vertices.rows();
  SymmetryLoss out;
  out.gradient = VertexArray::Zero(nv, 3);
  out.normals = normals;
  if (nv == 0) return out;
  const Vec3 centroid = centroid_of(vertices);
  // d(centroid)/d(v_i) = I / V; accumulated then spread to all vertices
  Vec3 centroid_grad = Vec3::Zero();

  for (std::size_t k = 0; k < planes.size(); ++k) {
    const auto& pairs = planes[k].pairs;
    if (pairs.empty()) continue;
    const Vec3& n = normals[k];
    const double inv = 1.0 / static_cast<double>(pairs.size());
    for (const auto& [i, j] : pairs) {
      if (i < 0 || j < 0 || i >= nv || j >= nv)
        throw DimensionError("symmetry_loss: pair references an invalid vertex");
      const Vec3 vi = vertices.row(i).transpose();
      const Vec3 vj = vertices.row(j).transpose();

      const double r = n.dot(0.5 * (vi + vj) - centroid);
      out.mid += inv * r * r;
      const Vec3 g_mid = inv * 2.0 * r * n;  // w.r.t. the midpoint
      out.gradient.row(i) += 0.5 * g_mid.transpose();
      out.gradient.row(j) += 0.5 * g_mid.transpose();
      centroid_grad -= g_mid;

      const Vec3 d = vi - vj;
      const double len = d.norm();
      if (len < 1e-9) continue;
      const Vec3 dhat = d / len;
      const double c = n.dot(dhat);
      out.dir += inv * (1.0 - std::abs(c));
      if (c == 0.0) continue;  // |.| kink; subgradient 0
      const Vec3 g_d = -inv * (c > 0.0 ? 1.0 : -1.0) * (n - c * dhat) / len;
      out.gradient.row(i) += g_d.transpose();
      out.gradient.row(j) -= g_d.transpose();
    }
  }
  out.gradient.rowwise() += (centroid_grad / static_cast<double>(nv)).transpose();
  return out;
}

}  // namespace meshstyle
