#pragma once

#include "meshstyle/mesh.hpp"

#include <vector>

namespace meshstyle {

/// Greedy farthest-point sampling over mesh vertices, Euclidean metric.
/// Ties on the max-min distance go to the lowest vertex index.
std::vector<int> farthest_point_sample(const VertexArray& vertices, int count,
                                       int seed_index = 0);
std::vector<int> farthest_point_sample(const Mesh& mesh, int count,
                                       int seed_index = 0);

/// Unit icosphere (radius 1, centered at the origin) after `subdivisions`
/// rounds of 4-to-1 midpoint subdivision; 20 * 4^s faces, outward winding.
Mesh icosphere(int subdivisions);

struct SphereAuxMesh {
  Mesh mesh;
  // Sphere (== center) index owning each aux vertex.
  std::vector<int> owner;
  VertexArray centers;
  double radius = 0.0;
};

/// Union of one icosphere of `radius` per center; components are disjoint in
/// connectivity (they may still intersect geometrically).
SphereAuxMesh build_sphere_aux_mesh(const VertexArray& centers, double radius,
                                    int subdivisions);

// 0.5 x median nearest-neighbour distance among the centers. Falls back to
// 1e-2 x bbox diagonal (or 1e-2 for a single center) when all centers coincide.
double default_sphere_radius(const VertexArray& centers);

}  // namespace meshstyle
