#include "meshstyle/mesh.hpp"

#include "meshstyle/error.hpp"

#include <numeric>
#include <sstream>

namespace meshstyle {

namespace {

int find_root(std::vector<int>& parent, int x) {
  while (parent[x] != x) {
    parent[x] = parent[parent[x]];
    x = parent[x];
  }
  return x;
}

}  // namespace

Mesh::Mesh(VertexArray vertices, FaceArray faces)
    : vertices_(std::move(vertices)), faces_(std::move(faces)) {
  const int nv = num_vertices();
  if (!vertices_.allFinite()) throw ValidationError("mesh has non-finite vertex coordinates");

  std::vector<int> bad_index, degenerate, zero_area;
  face_areas_.resize(faces_.rows());
  for (int f = 0; f < num_faces(); ++f) {
    const int a = faces_(f, 0), b = faces_(f, 1), c = faces_(f, 2);
    if (a < 0 || b < 0 || c < 0 || a >= nv || b >= nv || c >= nv) {
      bad_index.push_back(f);
      continue;
    }
    if (a == b || b == c || a == c) {
      degenerate.push_back(f);
      continue;
    }
    face_areas_[f] = 0.5 * face_cross(vertices_, faces_, f).norm();
    if (!(face_areas_[f] > 0.0)) zero_area.push_back(f);
  }

  auto list = [](const std::vector<int>& ids) {
    std::ostringstream os;
    for (std::size_t i = 0; i < ids.size() && i < 20; ++i) os << (i ? ", " : "") << ids[i];
    if (ids.size() > 20) os << ", ... (" << ids.size() << " total)";
    return os.str();
  };
  if (!bad_index.empty())
    throw ValidationError("face vertex index out of range in faces: " + list(bad_index));
  if (!degenerate.empty())
    throw ValidationError("degenerate faces (repeated vertex index): " + list(degenerate));
  if (!zero_area.empty()) throw ValidationError("zero-area faces: " + list(zero_area));

  centroid_ = centroid_of(vertices_);
}

double Mesh::bbox_diagonal() const noexcept { return bbox_diagonal_of(vertices_); }

Mesh Mesh::with_vertices(VertexArray vertices) const {
  if (vertices.rows() != vertices_.rows())
    throw DimensionError("with_vertices: vertex count mismatch");
  return Mesh(std::move(vertices), faces_);
}

Vec3 centroid_of(const VertexArray& vertices) {
  if (vertices.rows() == 0) return Vec3::Zero();
  return vertices.colwise().sum().transpose() / static_cast<double>(vertices.rows());
}

double bbox_diagonal_of(const VertexArray& vertices) {
  if (vertices.rows() == 0) return 0.0;
  return (vertices.colwise().maxCoeff() - vertices.colwise().minCoeff()).norm();
}

Vec3 face_cross(const VertexArray& vertices, const FaceArray& faces, int f) {
  const Vec3 p0 = vertices.row(faces(f, 0)).transpose();
  const Vec3 p1 = vertices.row(faces(f, 1)).transpose();
  const Vec3 p2 = vertices.row(faces(f, 2)).transpose();
  return (p1 - p0).cross(p2 - p0);
}

std::vector<int> vertex_components(int num_vertices, const FaceArray& faces) {
  std::vector<int> parent(num_vertices);
  std::iota(parent.begin(), parent.end(), 0);
  for (int f = 0; f < faces.rows(); ++f) {
    for (int k = 1; k < 3; ++k) {
      const int a = find_root(parent, faces(f, 0));
      const int b = find_root(parent, faces(f, k));
      if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
  }
  std::vector<int> id(num_vertices, -1), out(num_vertices);
  int next = 0;
  for (int v = 0; v < num_vertices; ++v) {
    const int r = find_root(parent, v);
    if (id[r] < 0) id[r] = next++;
    out[v] = id[r];
  }
  return out;
}

}  // namespace meshstyle
