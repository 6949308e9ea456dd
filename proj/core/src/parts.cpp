#include "meshstyle/parts.hpp"

#include "meshstyle/error.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>
#include <unordered_map>

namespace meshstyle {

PartSet::PartSet(const std::vector<long long>& raw_labels) {
  std::unordered_map<long long, int> remap;
  labels_.reserve(raw_labels.size());
  for (std::size_t i = 0; i < raw_labels.size(); ++i) {
    auto [it, inserted] = remap.try_emplace(raw_labels[i], static_cast<int>(remap.size()) + 1);
    if (inserted) members_.emplace_back();
    labels_.push_back(it->second);
    members_[it->second - 1].push_back(static_cast<int>(i));
  }
}

std::vector<int> PartSet::face_labels(const FaceArray& faces) const {
  std::vector<int> out(static_cast<std::size_t>(faces.rows()));
  for (Eigen::Index f = 0; f < faces.rows(); ++f) {
    const int a = labels_[faces(f, 0)], b = labels_[faces(f, 1)], c = labels_[faces(f, 2)];
    if (a == b || a == c)
      out[f] = a;
    else if (b == c)
      out[f] = b;
    else
      out[f] = std::min({a, b, c});
  }
  return out;
}

PartSet parse_part_labels(int num_vertices, const std::string& text) {
  std::vector<long long> raw;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto last = line.find_last_not_of(" \t\r");
    const std::string_view tok(line.data() + first, last - first + 1);
    long long value = 0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
    if (ec != std::errc() || ptr != tok.data() + tok.size() || value < 0)
      throw ParseError("part label must be a non-negative integer, got '" + std::string(tok) + "'",
                       lineno);
    raw.push_back(value);
  }
  if (static_cast<int>(raw.size()) != num_vertices)
    throw ValidationError("part label count mismatch: file has " + std::to_string(raw.size()) +
                          " labels, mesh has " + std::to_string(num_vertices) + " vertices");
  return PartSet(raw);
}

PartSet ingest_part_labels(const Mesh& mesh, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open label file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_part_labels(mesh.num_vertices(), buf.str());
}

void save_part_labels(const std::filesystem::path& path, const PartSet& parts) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write label file: " + path.string());
  for (int l : parts.labels()) out << l << '\n';
}

PartSet fallback_segment(const VertexArray& points, int num_parts, std::uint64_t seed) {
  const int n = static_cast<int>(points.rows());
  if (num_parts < 1 || num_parts > n)
    throw ValidationError("fallback_segment: part count must be in [1, " + std::to_string(n) + "]");

  std::mt19937_64 rng(seed);
  Eigen::MatrixX3d centers(num_parts, 3);
  std::vector<double> d2(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());

  // k-means++ seeding
  centers.row(0) = points.row(static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(n)));
  for (int k = 1; k < num_parts; ++k) {
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], (points.row(i) - centers.row(k - 1)).squaredNorm());
      total += d2[i];
    }
    int pick = 0;
    if (total > 0.0) {
      const double r = std::uniform_real_distribution<double>(0.0, total)(rng);
      double acc = 0.0;
      pick = n - 1;
      for (int i = 0; i < n; ++i) {
        acc += d2[i];
        if (acc > r && d2[i] > 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<int>(rng() % static_cast<std::uint64_t>(n));
    }
    centers.row(k) = points.row(pick);
  }

  std::vector<int> assign(static_cast<std::size_t>(n), -1);
  for (int iter = 0; iter < 300; ++iter) {
    bool changed = false;
    for (int i = 0; i < n; ++i) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (int k = 0; k < num_parts; ++k) {
        const double d = (points.row(i) - centers.row(k)).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = k;
        }
      }
      if (assign[i] != best) {
        assign[i] = best;
        changed = true;
      }
    }
    Eigen::MatrixX3d sums = Eigen::MatrixX3d::Zero(num_parts, 3);
    std::vector<int> counts(static_cast<std::size_t>(num_parts), 0);
    for (int i = 0; i < n; ++i) {
      sums.row(assign[i]) += points.row(i);
      ++counts[assign[i]];
    }
    for (int k = 0; k < num_parts; ++k) {
      if (counts[k] > 0) {
        centers.row(k) = sums.row(k) / counts[k];
        continue;
      }
      // re-seed an empty cluster at the point farthest from its own center
      int far = 0;
      double far_d = -1.0;
      for (int i = 0; i < n; ++i) {
        const double d = (points.row(i) - centers.row(assign[i])).squaredNorm();
        if (d > far_d && counts[assign[i]] > 1) {
          far_d = d;
          far = i;
        }
      }
      --counts[assign[far]];
      assign[far] = k;
      counts[k] = 1;
      centers.row(k) = points.row(far);
      changed = true;
    }
    if (!changed) break;
  }

  std::vector<long long> raw(assign.begin(), assign.end());
  return PartSet(raw);
}

PartSet fallback_segment(const Mesh& mesh, int num_parts, std::uint64_t seed) {
  return fallback_segment(mesh.vertices(), num_parts, seed);
}

}  // namespace meshstyle
