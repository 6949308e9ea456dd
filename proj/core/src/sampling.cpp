#include "meshstyle/sampling.hpp"

#include "meshstyle/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>

namespace meshstyle {

std::vector<int> farthest_point_sample(const VertexArray& vertices, int count, int seed_index) {
  const int n = static_cast<int>(vertices.rows());
  if (count < 1 || count > n)
    throw ValidationError("farthest_point_sample: count must be in [1, " + std::to_string(n) +
                          "], got " + std::to_string(count));
  if (seed_index < 0 || seed_index >= n)
    throw ValidationError("farthest_point_sample: seed index out of range");

  std::vector<int> chosen{seed_index};
  chosen.reserve(static_cast<std::size_t>(count));
  std::vector<double> min_d2(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  int last = seed_index;
  while (static_cast<int>(chosen.size()) < count) {
    int best = -1;
    double best_d2 = -1.0;
    for (int i = 0; i < n; ++i) {
      const double d2 = (vertices.row(i) - vertices.row(last)).squaredNorm();
      min_d2[i] = std::min(min_d2[i], d2);
      if (min_d2[i] > best_d2) {
        best_d2 = min_d2[i];
        best = i;
      }
    }
    // Duplicate positions leave best_d2 == 0; pick any unchosen index then.
    if (best_d2 <= 0.0) {
      std::vector<char> taken(static_cast<std::size_t>(n), 0);
      for (int c : chosen) taken[c] = 1;
      best = static_cast<int>(std::find(taken.begin(), taken.end(), 0) - taken.begin());
    }
    chosen.push_back(best);
    min_d2[best] = 0.0;
    last = best;
  }
  return chosen;
}

std::vector<int> farthest_point_sample(const Mesh& mesh, int count, int seed_index) {
  return farthest_point_sample(mesh.vertices(), count, seed_index);
}

Mesh icosphere(int subdivisions) {
  if (subdivisions < 0) throw ValidationError("icosphere: negative subdivision count");
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> verts = {
      {-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
      {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  for (auto& v : verts) v.normalize();
  std::vector<std::array<int, 3>> faces = {
      {0, 11, 5}, {0, 5, 1}, {0, 1, 7}, {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
      {11, 10, 2}, {10, 7, 6}, {7, 1, 8}, {3, 9, 4}, {3, 4, 2}, {3, 2, 6}, {3, 6, 8},
      {3, 8, 9}, {4, 9, 5}, {2, 4, 11}, {6, 2, 10}, {8, 6, 7}, {9, 8, 1}};

  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      if (auto it = midpoint.find(key); it != midpoint.end()) return it->second;
      verts.push_back((verts[a] + verts[b]).normalized());
      const int id = static_cast<int>(verts.size()) - 1;
      midpoint.emplace(key, id);
      return id;
    };
    std::vector<std::array<int, 3>> next;
    next.reserve(faces.size() * 4);
    for (const auto& f : faces) {
      const int ab = mid(f[0], f[1]), bc = mid(f[1], f[2]), ca = mid(f[2], f[0]);
      next.push_back({f[0], ab, ca});
      next.push_back({f[1], bc, ab});
      next.push_back({f[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    faces = std::move(next);
  }

  VertexArray V(static_cast<Eigen::Index>(verts.size()), 3);
  for (std::size_t i = 0; i < verts.size(); ++i) V.row(static_cast<Eigen::Index>(i)) = verts[i].transpose();
  FaceArray F(static_cast<Eigen::Index>(faces.size()), 3);
  for (std::size_t i = 0; i < faces.size(); ++i)
    F.row(static_cast<Eigen::Index>(i)) << faces[i][0], faces[i][1], faces[i][2];
  return Mesh(std::move(V), std::move(F));
}

SphereAuxMesh build_sphere_aux_mesh(const VertexArray& centers, double radius, int subdivisions) {
  if (centers.rows() < 1) throw ValidationError("build_sphere_aux_mesh: need at least one center");
  if (!(radius > 0.0)) throw ValidationError("build_sphere_aux_mesh: radius must be positive");
  const Mesh unit = icosphere(subdivisions);
  const auto nv = unit.vertices().rows();
  const auto nf = unit.faces().rows();
  const auto k = centers.rows();

  VertexArray V(nv * k, 3);
  FaceArray F(nf * k, 3);
  std::vector<int> owner(static_cast<std::size_t>(nv * k));
  for (Eigen::Index s = 0; s < k; ++s) {
    V.middleRows(s * nv, nv) = (unit.vertices() * radius).rowwise() + centers.row(s);
    F.middleRows(s * nf, nf) = unit.faces().array() + static_cast<int>(s * nv);
    std::fill_n(owner.begin() + s * nv, nv, static_cast<int>(s));
  }
  return {Mesh(std::move(V), std::move(F)), std::move(owner), centers, radius};
}

double default_sphere_radius(const VertexArray& centers) {
  const auto k = centers.rows();
  if (k < 2) return 1e-2;
  std::vector<double> nn(static_cast<std::size_t>(k), std::numeric_limits<double>::infinity());
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = 0; j < k; ++j)
      if (i != j) nn[i] = std::min(nn[i], (centers.row(i) - centers.row(j)).norm());
  auto mid = nn.begin() + static_cast<std::ptrdiff_t>(nn.size() / 2);
  std::nth_element(nn.begin(), mid, nn.end());
  double median = *mid;
  if (nn.size() % 2 == 0) {
    const double lower = *std::max_element(nn.begin(), mid);
    median = 0.5 * (median + lower);
  }
  if (median > 0.0) return 0.5 * median;
  const double diag = bbox_diagonal_of(centers);
  return diag > 0.0 ? 1e-2 * diag : 1e-2;
}

}  // namespace meshstyle
