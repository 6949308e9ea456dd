#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <filesystem>
#include <vector>

namespace meshstyle {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using VertexArray = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;
using FaceArray = Eigen::Matrix<int, Eigen::Dynamic, 3, Eigen::RowMajor>;

/// Immutable triangle mesh with cached per-face areas and vertex centroid.
///
/// Construction validates that every face references three distinct,
/// in-range vertices and that no face has zero area; a ValidationError
/// lists the offending faces otherwise.
class Mesh {
 public:
  Mesh() = default;
  Mesh(VertexArray vertices, FaceArray faces);

  const VertexArray& vertices() const noexcept { return vertices_; }
  const FaceArray& faces() const noexcept { return faces_; }
  const Eigen::VectorXd& face_areas() const noexcept { return face_areas_; }
  const Vec3& centroid() const noexcept { return centroid_; }

  int num_vertices() const noexcept { return static_cast<int>(vertices_.rows()); }
  int num_faces() const noexcept { return static_cast<int>(faces_.rows()); }

  Vec3 vertex(int i) const { return vertices_.row(i).transpose(); }
  double total_area() const noexcept { return face_areas_.sum(); }
  double bbox_diagonal() const noexcept;

  // Same connectivity with new vertex positions (re-validated).
  Mesh with_vertices(VertexArray vertices) const;

 private:
  VertexArray vertices_;
  FaceArray faces_;
  Eigen::VectorXd face_areas_;
  Vec3 centroid_ = Vec3::Zero();
};

Vec3 centroid_of(const VertexArray& vertices);
double bbox_diagonal_of(const VertexArray& vertices);

// Unnormalized face normal (cross product of the two edges at corner 0).
Vec3 face_cross(const VertexArray& vertices, const FaceArray& faces, int f);

// Connected components over face adjacency; isolated vertices form their own
// component. Returns a component id per vertex, ids dense from 0.
std::vector<int> vertex_components(int num_vertices, const FaceArray& faces);

/// OBJ reader. `v` and `f` records are used; `vt`, `vn`, `o`, `g`, `s`,
/// `usemtl`, `mtllib` are accepted and ignored. Polygons are fan-triangulated
/// as (1,2,3),(1,3,4),... and negative (relative) indices are resolved.
Mesh load_obj(const std::filesystem::path& path);
Mesh parse_obj(const std::string& text);

/// Vertex positions are written with 9 significant digits.
void save_obj(const std::filesystem::path& path, const VertexArray& vertices,
              const FaceArray& faces);
void save_obj(const std::filesystem::path& path, const Mesh& mesh);
std::string format_obj(const VertexArray& vertices, const FaceArray& faces);

}  // namespace meshstyle
