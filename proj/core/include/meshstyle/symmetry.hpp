#pragma once

#include "meshstyle/mesh.hpp"

#include <optional>
#include <utility>
#include <vector>

namespace meshstyle {

struct SymmetryThresholds {
  double max_residual = 0.0;  // every mirrored vertex must land closer than this
  double sum_residual = 0.0;  // and the summed residual must stay below this

  // 0.02 x diag and 0.002 x V x diag.
  static SymmetryThresholds relative_to(const VertexArray& vertices);
};

/// A reflection plane through the vertex centroid, normal to one PCA axis,
/// with the matched vertex pairs it induced at detection time.
struct SymmetryPlane {
  int axis_index = 0;
  Vec3 axis = Vec3::UnitX();
  Vec3 point = Vec3::Zero();
  // Unordered, deduplicated (i <= j). Self-pairs (i, i) are allowed.
  std::vector<std::pair<int, int>> pairs;
  SymmetryThresholds thresholds;
  double max_residual = 0.0;
  double sum_residual = 0.0;

  double offset() const { return axis.dot(point); }
};

struct AxisCandidate {
  int axis_index = 0;
  Vec3 axis;
  double max_residual = 0.0;
  double sum_residual = 0.0;
  bool accepted = false;
};

struct SymmetryDetection {
  std::vector<SymmetryPlane> planes;
  std::vector<AxisCandidate> candidates;  // all three axes, accepted or not
};

/// Mirror-and-match detection over the three PCA axes of `vertices`.
SymmetryDetection detect_symmetry(const VertexArray& vertices,
                                  std::optional<SymmetryThresholds> thresholds = std::nullopt);
std::vector<SymmetryPlane> detect_symmetry_planes(const VertexArray& vertices, double tau1,
                                                  double tau2);

/// Nearest vertex to each query point; ties resolve to the lowest index.
std::vector<int> nearest_vertices(const VertexArray& vertices, const VertexArray& queries);

struct MidplaneFit {
  Vec3 normal = Vec3::UnitX();
  Vec3 point = Vec3::Zero();  // mean of the midpoints
  Vec3 singular_values = Vec3::Zero();  // descending
  bool fallback = false;
};

/// Total-least-squares plane through the pair midpoints, normal oriented
/// toward `reference_axis`. Falls back to `reference_axis` when there are
/// fewer than three pairs or the midpoints are (numerically) collinear.
MidplaneFit fit_midpoint_plane(const std::vector<std::pair<int, int>>& pairs,
                               const VertexArray& vertices, const Vec3& reference_axis);

struct SymmetryLoss {
  double mid = 0.0;
  double dir = 0.0;
  double value() const { return mid + dir; }
  VertexArray gradient;
  std::vector<Vec3> normals;  // the (frozen) plane normals used
};

/// Midpoint-on-plane plus pair-direction-alignment loss. Plane normals are
/// refit from the current vertices and treated as constants.
SymmetryLoss symmetry_loss(const VertexArray& vertices, const std::vector<SymmetryPlane>& planes);

/// Same loss with caller-supplied normals (one per plane).
SymmetryLoss symmetry_loss(const VertexArray& vertices, const std::vector<SymmetryPlane>& planes,
                           const std::vector<Vec3>& normals);

}  // namespace meshstyle
