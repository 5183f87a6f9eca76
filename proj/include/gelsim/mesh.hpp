#pragma once

#include <Eigen/Dense>

#include <array>
#include <map>
#include <stdexcept>
#include <utility>
#include <vector>

namespace gelsim {

/// Boundary classification of the unit square: Gamma0 = {x=0} u {x=1}
/// carries the displacement condition, GammaP = {y=0} u {y=1} carries the
/// traction/permeability condition. The four corner vertices belong to
/// Gamma0 (the displacement condition wins).
enum class BoundaryTag { Interior, Gamma0, GammaP };

struct MeshEdge {
  int a, b;  // vertex indices, a < b
  BoundaryTag tag;
};

/// Structured triangulation of [0,1]^2: (2^k+1)^2 lattice vertices, every
/// cell split along its lower-left to upper-right diagonal, so the triangle
/// count is 2 * 4^k and the minimum angle is 45 degrees.
struct Mesh {
  int level = 0;
  int n = 0;  // cells per side, 2^level
  std::vector<Eigen::Vector2d> vertices;
  std::vector<std::array<int, 3>> triangles;
  std::vector<MeshEdge> edges;
  /// Per-triangle global edge indices; local edge k is opposite local
  /// vertex k, i.e. edge 0 = (v1,v2), edge 1 = (v2,v0), edge 2 = (v0,v1).
  std::vector<std::array<int, 3>> triangle_edges;

  double h() const { return 1.0 / n; }

  bool vertex_on_gamma0(int v) const {
    const double x = vertices[v].x();
    return x == 0.0 || x == 1.0;
  }
  bool vertex_on_gammap(int v) const {
    if (vertex_on_gamma0(v)) return false;  // corners owned by Gamma0
    const double y = vertices[v].y();
    return y == 0.0 || y == 1.0;
  }

  double triangle_area(int t) const {
    const auto& tri = triangles[t];
    const Eigen::Vector2d e1 = vertices[tri[1]] - vertices[tri[0]];
    const Eigen::Vector2d e2 = vertices[tri[2]] - vertices[tri[0]];
    return 0.5 * (e1.x() * e2.y() - e1.y() * e2.x());
  }
};

namespace detail {

inline void build_edges(Mesh& mesh) {
  std::map<std::pair<int, int>, int> index;
  std::vector<int> use_count;
  mesh.triangle_edges.assign(mesh.triangles.size(), {-1, -1, -1});
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const auto& tri = mesh.triangles[t];
    for (int k = 0; k < 3; ++k) {
      int a = tri[(k + 1) % 3], b = tri[(k + 2) % 3];
      if (a > b) std::swap(a, b);
      auto [it, inserted] = index.try_emplace({a, b},
                                              static_cast<int>(mesh.edges.size()));
      if (inserted) {
        mesh.edges.push_back({a, b, BoundaryTag::Interior});
        use_count.push_back(0);
      }
      mesh.triangle_edges[t][k] = it->second;
      ++use_count[it->second];
    }
  }
  for (std::size_t e = 0; e < mesh.edges.size(); ++e) {
    if (use_count[e] != 1) continue;  // interior edges are shared by two cells
    const Eigen::Vector2d& pa = mesh.vertices[mesh.edges[e].a];
    const Eigen::Vector2d& pb = mesh.vertices[mesh.edges[e].b];
    if ((pa.x() == 0.0 && pb.x() == 0.0) || (pa.x() == 1.0 && pb.x() == 1.0))
      mesh.edges[e].tag = BoundaryTag::Gamma0;
    else if ((pa.y() == 0.0 && pb.y() == 0.0) ||
             (pa.y() == 1.0 && pb.y() == 1.0))
      mesh.edges[e].tag = BoundaryTag::GammaP;
    else
      throw std::logic_error("boundary edge not on any side of the square");
  }
}

}  // namespace detail

inline Mesh build_unit_square(int level) {
  if (level < 1 || level > 10)
    throw std::invalid_argument("mesh level must lie in [1, 10]");
  Mesh mesh;
  mesh.level = level;
  mesh.n = 1 << level;
  const int n = mesh.n;
  const double h = 1.0 / n;

  mesh.vertices.reserve((n + 1) * (n + 1));
  for (int j = 0; j <= n; ++j)
    for (int i = 0; i <= n; ++i)
      mesh.vertices.emplace_back(i * h, j * h);

  auto vid = [n](int i, int j) { return j * (n + 1) + i; };
  mesh.triangles.reserve(2 * n * n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      const int v00 = vid(i, j), v10 = vid(i + 1, j);
      const int v01 = vid(i, j + 1), v11 = vid(i + 1, j + 1);
      mesh.triangles.push_back({v00, v10, v11});
      mesh.triangles.push_back({v00, v11, v01});
    }
  detail::build_edges(mesh);
  return mesh;
}

/// Mirror image of the mesh under x -> 1-x, with triangle orientation
/// restored. Vertex indices are preserved, so the mirrored mesh has the
/// opposite diagonal direction relative to its own coordinates; used by the
/// symmetry checks.
inline Mesh mirror_x(const Mesh& src) {
  Mesh mesh;
  mesh.level = src.level;
  mesh.n = src.n;
  mesh.vertices = src.vertices;
  for (auto& v : mesh.vertices) v.x() = 1.0 - v.x();
  mesh.triangles = src.triangles;
  for (auto& tri : mesh.triangles) std::swap(tri[1], tri[2]);
  detail::build_edges(mesh);
  return mesh;
}

struct BoundaryStats {
  int gamma0_edges = 0;
  int gammap_edges = 0;
  int interior_edges = 0;
};

/// Counts edges per tag and verifies the boundary tagging is consistent
/// with edge incidence (every once-used edge tagged, twice-used untagged).
inline BoundaryStats classify_boundary(const Mesh& mesh) {
  std::vector<int> use_count(mesh.edges.size(), 0);
  for (const auto& te : mesh.triangle_edges)
    for (int k = 0; k < 3; ++k) ++use_count[te[k]];
  BoundaryStats st;
  for (std::size_t e = 0; e < mesh.edges.size(); ++e) {
    const bool on_boundary = use_count[e] == 1;
    const bool tagged = mesh.edges[e].tag != BoundaryTag::Interior;
    if (on_boundary != tagged)
      throw std::logic_error("edge tag inconsistent with incidence");
    switch (mesh.edges[e].tag) {
      case BoundaryTag::Gamma0: ++st.gamma0_edges; break;
      case BoundaryTag::GammaP: ++st.gammap_edges; break;
      case BoundaryTag::Interior: ++st.interior_edges; break;
    }
  }
  return st;
}

}  // namespace gelsim
