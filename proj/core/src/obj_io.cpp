#include "meshstyle/error.hpp"
#include "meshstyle/mesh.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace meshstyle {

namespace {

// Parses the vertex index of an OBJ face token ("7", "7/2", "7//3", "-1").
int parse_face_index(std::string_view token, int vertex_count, std::size_t line) {
  const auto slash = token.find('/');
  const std::string_view head = token.substr(0, slash);
  int idx = 0;
  auto [ptr, ec] = std::from_chars(head.data(), head.data() + head.size(), idx);
  if (ec != std::errc() || ptr != head.data() + head.size() || idx == 0)
    throw ParseError("bad face index '" + std::string(token) + "'", line);
  const int resolved = idx > 0 ? idx - 1 : vertex_count + idx;
  if (resolved < 0 || resolved >= vertex_count)
    throw ParseError("face index " + std::to_string(idx) + " out of range (" +
                         std::to_string(vertex_count) + " vertices defined)",
                     line);
  return resolved;
}

}  // namespace

Mesh parse_obj(const std::string& text) {
  std::vector<Vec3> verts;
  std::vector<Eigen::Vector3i> tris;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag)) continue;
    if (tag == "v") {
      Vec3 p;
      if (!(ls >> p.x() >> p.y() >> p.z())) throw ParseError("malformed vertex record", lineno);
      verts.push_back(p);
    } else if (tag == "f") {
      std::vector<int> poly;
      std::string tok;
      while (ls >> tok) poly.push_back(parse_face_index(tok, static_cast<int>(verts.size()), lineno));
      if (poly.size() < 3) throw ParseError("face with fewer than 3 vertices", lineno);
      for (std::size_t k = 1; k + 1 < poly.size(); ++k)
        tris.emplace_back(poly[0], poly[k], poly[k + 1]);
    }
    // vt, vn, o, g, s, usemtl, mtllib and unknown tags are ignored
  }

  VertexArray V(static_cast<Eigen::Index>(verts.size()), 3);
  for (std::size_t i = 0; i < verts.size(); ++i) V.row(static_cast<Eigen::Index>(i)) = verts[i].transpose();
  FaceArray F(static_cast<Eigen::Index>(tris.size()), 3);
  for (std::size_t i = 0; i < tris.size(); ++i) F.row(static_cast<Eigen::Index>(i)) = tris[i].transpose();
  return Mesh(std::move(V), std::move(F));
}

Mesh load_obj(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open mesh file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_obj(buf.str());
}

std::string format_obj(const VertexArray& vertices, const FaceArray& faces) {
  std::string out;
  out.reserve(static_cast<std::size_t>(vertices.rows() * 48 + faces.rows() * 24));
  char buf[128];
  for (Eigen::Index i = 0; i < vertices.rows(); ++i) {
    std::snprintf(buf, sizeof buf, "v %.17g %.17g %.17g\n", vertices(i, 0), vertices(i, 1), vertices(i, 2));
    out += buf;
  }
  for (Eigen::Index f = 0; f < faces.rows(); ++f) {
    std::snprintf(buf, sizeof buf, "f %d %d %d\n", faces(f, 0) + 1, faces(f, 1) + 1, faces(f, 2) + 1);
    out += buf;
  }
  return out;
}

void save_obj(const std::filesystem::path& path, const VertexArray& vertices,
              const FaceArray& faces) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write mesh file: " + path.string());
  out << format_obj(vertices, faces);
  if (!out) throw IoError("write failed: " + path.string());
}

void save_obj(const std::filesystem::path& path, const Mesh& mesh) {
  save_obj(path, mesh.vertices(), mesh.faces());
}

}  // namespace meshstyle
