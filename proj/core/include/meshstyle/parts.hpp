#pragma once

#include "meshstyle/mesh.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace meshstyle {

/// Hard per-vertex part assignment with labels compacted to 1..L.
class PartSet {
 public:
  PartSet() = default;
  // Raw labels are compacted in order of first appearance.
  explicit PartSet(const std::vector<long long>& raw_labels);

  int num_parts() const noexcept { return static_cast<int>(members_.size()); }
  int num_vertices() const noexcept { return static_cast<int>(labels_.size()); }
  // 1-based part id of vertex i.
  int label(int vertex) const { return labels_[vertex]; }
  const std::vector<int>& labels() const noexcept { return labels_; }
  // Vertex indices of part `part` (1-based), ascending.
  const std::vector<int>& members(int part) const { return members_[part - 1]; }

  /// Majority vote of a face's three vertex labels; ties go to the lowest id.
  std::vector<int> face_labels(const FaceArray& faces) const;

 private:
  std::vector<int> labels_;
  std::vector<std::vector<int>> members_;
};

/// Reads one non-negative integer per vertex per line; `#` starts a comment
/// and blank lines are skipped.
PartSet ingest_part_labels(const Mesh& mesh, const std::filesystem::path& path);
PartSet parse_part_labels(int num_vertices, const std::string& text);
void save_part_labels(const std::filesystem::path& path, const PartSet& parts);

/// Lloyd k-means on vertex positions with k-means++ seeding drawn from a
/// generator seeded by `seed`. Clusters that empty out are re-seeded at the
/// vertex farthest from its assigned center.
PartSet fallback_segment(const Mesh& mesh, int num_parts, std::uint64_t seed);
PartSet fallback_segment(const VertexArray& points, int num_parts, std::uint64_t seed);

}  // namespace meshstyle
