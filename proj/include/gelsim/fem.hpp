#pragma once

#include <Eigen/Dense>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include <array>
#include <cmath>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "gelsim/mesh.hpp"

namespace gelsim {

// ---------------------------------------------------------------------------
// Quadrature
// ---------------------------------------------------------------------------

struct TriQuadPoint {
  double xi, eta, w;  // weights sum to 1; integral ~ area * sum w*f
};

/// Six-point rule on the reference triangle, exact for polynomials of total
/// degree 4 (enough for products of quadratic basis functions).
inline const std::array<TriQuadPoint, 6>& triangle_rule() {
  static const std::array<TriQuadPoint, 6> rule = [] {
    const double a = 0.445948490915965;
    const double wa = 0.223381589678011;
    const double b = 0.091576213509771;
    const double wb = 0.109951743655322;
    return std::array<TriQuadPoint, 6>{{{a, a, wa},
                                        {1.0 - 2.0 * a, a, wa},
                                        {a, 1.0 - 2.0 * a, wa},
                                        {b, b, wb},
                                        {1.0 - 2.0 * b, b, wb},
                                        {b, 1.0 - 2.0 * b, wb}}};
  }();
  return rule;
}

struct EdgeQuadPoint {
  double t, w;  // parameter in [0,1]; weights sum to 1
};

/// Three-point Gauss rule on [0,1], exact for polynomials of degree 5.
inline const std::array<EdgeQuadPoint, 3>& edge_rule() {
  static const std::array<EdgeQuadPoint, 3> rule = [] {
    const double s = std::sqrt(3.0 / 5.0) / 2.0;
    return std::array<EdgeQuadPoint, 3>{
        {{0.5 - s, 5.0 / 18.0}, {0.5, 8.0 / 18.0}, {0.5 + s, 5.0 / 18.0}}};
  }();
  return rule;
}

// ---------------------------------------------------------------------------
// Reference shape functions
// ---------------------------------------------------------------------------

/// Values and reference-coordinate gradients of the scalar basis at one
/// point of the reference triangle. Local numbering: nodes 0..2 are the
/// vertices; for quadratics, nodes 3..5 are the edge midpoints opposite
/// vertices 0..2 (midpoint 3 on edge (1,2), 4 on (2,0), 5 on (0,1)).
struct ShapeEval {
  int n = 0;
  std::array<double, 6> N{};
  std::array<Eigen::Vector2d, 6> dref{};
};

inline ShapeEval eval_p1(double xi, double eta) {
  ShapeEval s;
  s.n = 3;
  s.N = {1.0 - xi - eta, xi, eta, 0, 0, 0};
  s.dref[0] = {-1.0, -1.0};
  s.dref[1] = {1.0, 0.0};
  s.dref[2] = {0.0, 1.0};
  return s;
}

inline ShapeEval eval_p2(double xi, double eta) {
  ShapeEval s;
  s.n = 6;
  const double L0 = 1.0 - xi - eta, L1 = xi, L2 = eta;
  const Eigen::Vector2d d0(-1.0, -1.0), d1(1.0, 0.0), d2(0.0, 1.0);
  s.N = {L0 * (2 * L0 - 1), L1 * (2 * L1 - 1), L2 * (2 * L2 - 1),
         4 * L1 * L2,       4 * L2 * L0,       4 * L0 * L1};
  s.dref[0] = (4 * L0 - 1) * d0;
  s.dref[1] = (4 * L1 - 1) * d1;
  s.dref[2] = (4 * L2 - 1) * d2;
  s.dref[3] = 4 * (L1 * d2 + L2 * d1);
  s.dref[4] = 4 * (L2 * d0 + L0 * d2);
  s.dref[5] = 4 * (L0 * d1 + L1 * d0);
  return s;
}

// ---------------------------------------------------------------------------
// Finite element spaces
// ---------------------------------------------------------------------------

enum class SpaceKind { ScalarP1, ScalarP2, VectorP2 };

/// Degree-of-freedom bookkeeping over a mesh. Scalar nodes are the vertices
/// (linear) or vertices followed by edge midpoints (quadratic); vector
/// fields interleave the two components per node, dof = 2*node + component.
struct FemSpace {
  SpaceKind kind;
  const Mesh* mesh = nullptr;
  int nodes = 0;
  int components = 1;
  int dof_count = 0;
  int element_nodes = 0;  // scalar nodes per element (3 or 6)
  int element_dofs = 0;   // element_nodes * components

  bool quadratic() const { return kind != SpaceKind::ScalarP1; }

  /// Global scalar node of local node `ln` in element `t`.
  int element_node(int t, int ln) const {
    const auto& tri = mesh->triangles[t];
    if (ln < 3) return tri[ln];
    const int nv = static_cast<int>(mesh->vertices.size());
    return nv + mesh->triangle_edges[t][ln - 3];
  }

  int dof_of(int node, int comp) const { return components * node + comp; }

  /// Global dof of local dof `l` (local dof = components*local_node + comp).
  int element_dof(int t, int l) const {
    const int ln = l / components, c = l % components;
    return dof_of(element_node(t, ln), c);
  }

  Eigen::Vector2d node_position(int node) const {
    const int nv = static_cast<int>(mesh->vertices.size());
    if (node < nv) return mesh->vertices[node];
    const MeshEdge& e = mesh->edges[node - nv];
    return 0.5 * (mesh->vertices[e.a] + mesh->vertices[e.b]);
  }

  /// All dofs attached to the given boundary part: vertex nodes on it plus,
  /// for quadratic spaces, midpoint nodes of its edges. Corner vertices are
  /// attributed to Gamma0 only. Sorted, unique.
  std::vector<int> boundary_dofs(BoundaryTag tag) const {
    std::vector<int> out;
    const int nv = static_cast<int>(mesh->vertices.size());
    for (int v = 0; v < nv; ++v) {
      const bool on = tag == BoundaryTag::Gamma0 ? mesh->vertex_on_gamma0(v)
                                                 : mesh->vertex_on_gammap(v);
      if (on)
        for (int c = 0; c < components; ++c) out.push_back(dof_of(v, c));
    }
    if (quadratic())
      for (std::size_t e = 0; e < mesh->edges.size(); ++e)
        if (mesh->edges[e].tag == tag)
          for (int c = 0; c < components; ++c)
            out.push_back(dof_of(nv + static_cast<int>(e), c));
    std::sort(out.begin(), out.end());
    return out;
  }
};

inline FemSpace make_space(const Mesh& mesh, SpaceKind kind) {
  FemSpace sp;
  sp.kind = kind;
  sp.mesh = &mesh;
  const int nv = static_cast<int>(mesh.vertices.size());
  const int ne = static_cast<int>(mesh.edges.size());
  sp.nodes = kind == SpaceKind::ScalarP1 ? nv : nv + ne;
  sp.components = kind == SpaceKind::VectorP2 ? 2 : 1;
  sp.dof_count = sp.components * sp.nodes;
  sp.element_nodes = kind == SpaceKind::ScalarP1 ? 3 : 6;
  sp.element_dofs = sp.element_nodes * sp.components;
  return sp;
}

// ---------------------------------------------------------------------------
// Element geometry
// ---------------------------------------------------------------------------

struct ElementGeometry {
  Eigen::Matrix2d J;      // columns p1-p0, p2-p0
  Eigen::Matrix2d JinvT;  // maps reference gradients to physical gradients
  double area = 0.0;
  Eigen::Vector2d p0;
};

inline ElementGeometry element_geometry(const Mesh& mesh, int t) {
  const auto& tri = mesh.triangles[t];
  ElementGeometry g;
  g.p0 = mesh.vertices[tri[0]];
  g.J.col(0) = mesh.vertices[tri[1]] - g.p0;
  g.J.col(1) = mesh.vertices[tri[2]] - g.p0;
  const double det = g.J.determinant();
  g.area = 0.5 * det;
  g.JinvT = g.J.inverse().transpose();
  return g;
}

inline Eigen::Vector2d map_point(const ElementGeometry& g, double xi,
                                 double eta) {
  return g.p0 + g.J * Eigen::Vector2d(xi, eta);
}

// ---------------------------------------------------------------------------
// Sparse operators and assembly
// ---------------------------------------------------------------------------

struct SparseOperator {
  Eigen::SparseMatrix<double> matrix;
  bool symmetric = false;

  Eigen::Index rows() const { return matrix.rows(); }
  Eigen::Index cols() const { return matrix.cols(); }
};

// Form descriptors. The bilinear forms they denote:
//   VectorElasticity: 2*mu_t (D(u):D(w)) + lambda_t (div u)(div w)
//   VectorViscosity:  2*eta  (D(u):D(w)) + mu_bulk  (div u)(div w)
//   ScalarDiffusion:  kappa grad p . grad s
//   Mass:             u . w (or p s)
//   DivCoupling:      weight * s (div u)   [scalar test x vector trial]
//   BoundaryTraction: linear load integrating a given traction over the
//                     edges carrying one boundary tag
// where D is the symmetric gradient.
struct VectorElasticity {
  double lambda_t, mu_t;
};
struct VectorViscosity {
  double eta, mu_bulk;
};
struct ScalarDiffusion {
  double kappa;
};
struct Mass {};
struct DivCoupling {
  double weight = 1.0;
};
struct BoundaryTraction {
  BoundaryTag tag;
};

namespace detail {

inline ShapeEval shapes_at(SpaceKind kind, double xi, double eta) {
  return kind == SpaceKind::ScalarP1 ? eval_p1(xi, eta) : eval_p2(xi, eta);
}

/// Element matrix of c_eps * D(u):D(w) + c_div * div u div w on the
/// quadratic vector element with the given vertex coordinates.
inline Eigen::MatrixXd element_strain(const std::array<Eigen::Vector2d, 3>& p,
                                      double c_eps, double c_div) {
  ElementGeometry g;
  g.p0 = p[0];
  g.J.col(0) = p[1] - p[0];
  g.J.col(1) = p[2] - p[0];
  g.area = 0.5 * g.J.determinant();
  g.JinvT = g.J.inverse().transpose();

  Eigen::MatrixXd ke = Eigen::MatrixXd::Zero(12, 12);
  for (const TriQuadPoint& q : triangle_rule()) {
    const ShapeEval s = eval_p2(q.xi, q.eta);
    std::array<Eigen::Vector2d, 6> grad;
    for (int i = 0; i < 6; ++i) grad[i] = g.JinvT * s.dref[i];
    const double wq = q.w * g.area;
    for (int i = 0; i < 6; ++i)
      for (int ci = 0; ci < 2; ++ci)
        for (int j = 0; j < 6; ++j)
          for (int cj = 0; cj < 2; ++cj) {
            // D(N_i e_ci):D(N_j e_cj)
            //   = 0.5*(grad_i.grad_j * delta_{ci,cj} + grad_i[cj]*grad_j[ci])
            const double dd =
                0.5 * ((ci == cj ? grad[i].dot(grad[j]) : 0.0) +
                       grad[i](cj) * grad[j](ci));
            const double dv = grad[i](ci) * grad[j](cj);
            ke(2 * i + ci, 2 * j + cj) += wq * (c_eps * dd + c_div * dv);
          }
  }
  return ke;
}

inline Eigen::MatrixXd element_mass(const std::array<Eigen::Vector2d, 3>& p,
                                    SpaceKind kind) {
  const double area =
      0.5 * ((p[1] - p[0]).x() * (p[2] - p[0]).y() -
             (p[1] - p[0]).y() * (p[2] - p[0]).x());
  const int ns = kind == SpaceKind::ScalarP1 ? 3 : 6;
  const int comps = kind == SpaceKind::VectorP2 ? 2 : 1;
  Eigen::MatrixXd ke = Eigen::MatrixXd::Zero(ns * comps, ns * comps);
  for (const TriQuadPoint& q : triangle_rule()) {
    const ShapeEval s = shapes_at(kind, q.xi, q.eta);
    const double wq = q.w * area;
    for (int i = 0; i < ns; ++i)
      for (int j = 0; j < ns; ++j)
        for (int c = 0; c < comps; ++c)
          ke(comps * i + c, comps * j + c) += wq * s.N[i] * s.N[j];
  }
  return ke;
}

inline Eigen::MatrixXd element_diffusion(
    const std::array<Eigen::Vector2d, 3>& p, double kappa, SpaceKind kind) {
  ElementGeometry g;
  g.p0 = p[0];
  g.J.col(0) = p[1] - p[0];
  g.J.col(1) = p[2] - p[0];
  g.area = 0.5 * g.J.determinant();
  g.JinvT = g.J.inverse().transpose();
  const int ns = kind == SpaceKind::ScalarP1 ? 3 : 6;
  Eigen::MatrixXd ke = Eigen::MatrixXd::Zero(ns, ns);
  for (const TriQuadPoint& q : triangle_rule()) {
    const ShapeEval s = shapes_at(kind, q.xi, q.eta);
    const double wq = q.w * g.area;
    for (int i = 0; i < ns; ++i)
      for (int j = 0; j < ns; ++j) {
        const Eigen::Vector2d gi = g.JinvT * s.dref[i];
        const Eigen::Vector2d gj = g.JinvT * s.dref[j];
        ke(i, j) += wq * kappa * gi.dot(gj);
      }
  }
  return ke;
}

/// Rows: scalar test space, columns: quadratic vector trial space.
inline Eigen::MatrixXd element_div_coupling(
    const std::array<Eigen::Vector2d, 3>& p, SpaceKind scalar_kind,
    double weight) {
  ElementGeometry g;
  g.p0 = p[0];
  g.J.col(0) = p[1] - p[0];
  g.J.col(1) = p[2] - p[0];
  g.area = 0.5 * g.J.determinant();
  g.JinvT = g.J.inverse().transpose();
  const int ns = scalar_kind == SpaceKind::ScalarP1 ? 3 : 6;
  Eigen::MatrixXd ke = Eigen::MatrixXd::Zero(ns, 12);
  for (const TriQuadPoint& q : triangle_rule()) {
    const ShapeEval ss = shapes_at(scalar_kind, q.xi, q.eta);
    const ShapeEval sv = eval_p2(q.xi, q.eta);
    const double wq = q.w * g.area;
    for (int i = 0; i < ns; ++i)
      for (int j = 0; j < 6; ++j) {
        const Eigen::Vector2d gj = g.JinvT * sv.dref[j];
        for (int c = 0; c < 2; ++c)
          ke(i, 2 * j + c) += wq * weight * ss.N[i] * gj(c);
      }
  }
  return ke;
}

inline std::array<Eigen::Vector2d, 3> element_coords(const Mesh& mesh, int t) {
  const auto& tri = mesh.triangles[t];
  return {mesh.vertices[tri[0]], mesh.vertices[tri[1]], mesh.vertices[tri[2]]};
}

template <class ElementFn>
SparseOperator assemble_square(const FemSpace& sp, bool symmetric,
                               ElementFn&& element) {
  std::vector<Eigen::Triplet<double>> trips;
  const int nt = static_cast<int>(sp.mesh->triangles.size());
  trips.reserve(static_cast<std::size_t>(nt) * sp.element_dofs *
                sp.element_dofs);
  for (int t = 0; t < nt; ++t) {
    const Eigen::MatrixXd ke = element(element_coords(*sp.mesh, t));
    for (int i = 0; i < sp.element_dofs; ++i)
      for (int j = 0; j < sp.element_dofs; ++j)
        trips.emplace_back(sp.element_dof(t, i), sp.element_dof(t, j),
                           ke(i, j));
  }
  SparseOperator op;
  op.symmetric = symmetric;
  op.matrix.resize(sp.dof_count, sp.dof_count);
  op.matrix.setFromTriplets(trips.begin(), trips.end());
  op.matrix.makeCompressed();
  return op;
}

}  // namespace detail

inline SparseOperator assemble_form(const VectorElasticity& f,
                                    const FemSpace& sp) {
  if (sp.kind != SpaceKind::VectorP2)
    throw std::invalid_argument("elasticity form needs the vector space");
  return detail::assemble_square(sp, true, [&](const auto& p) {
    return detail::element_strain(p, 2.0 * f.mu_t, f.lambda_t);
  });
}

inline SparseOperator assemble_form(const VectorViscosity& f,
                                    const FemSpace& sp) {
  if (sp.kind != SpaceKind::VectorP2)
    throw std::invalid_argument("viscosity form needs the vector space");
  return detail::assemble_square(sp, true, [&](const auto& p) {
    return detail::element_strain(p, 2.0 * f.eta, f.mu_bulk);
  });
}

inline SparseOperator assemble_form(const ScalarDiffusion& f,
                                    const FemSpace& sp) {
  if (sp.kind == SpaceKind::VectorP2)
    throw std::invalid_argument("diffusion form needs a scalar space");
  return detail::assemble_square(sp, true, [&](const auto& p) {
    return detail::element_diffusion(p, f.kappa, sp.kind);
  });
}

inline SparseOperator assemble_form(const Mass&, const FemSpace& sp) {
  return detail::assemble_square(sp, true, [&](const auto& p) {
    return detail::element_mass(p, sp.kind);
  });
}

/// Rectangular coupling with scalar test rows and vector trial columns.
inline SparseOperator assemble_form(const DivCoupling& f,
                                    const FemSpace& scalar_sp,
                                    const FemSpace& vector_sp) {
  if (scalar_sp.mesh != vector_sp.mesh)
    throw std::invalid_argument("coupling spaces must share a mesh");
  if (vector_sp.kind != SpaceKind::VectorP2 ||
      scalar_sp.kind == SpaceKind::VectorP2)
    throw std::invalid_argument("coupling needs scalar rows, vector columns");
  std::vector<Eigen::Triplet<double>> trips;
  const Mesh& mesh = *scalar_sp.mesh;
  for (int t = 0; t < static_cast<int>(mesh.triangles.size()); ++t) {
    const Eigen::MatrixXd ke = detail::element_div_coupling(
        detail::element_coords(mesh, t), scalar_sp.kind, f.weight);
    for (int i = 0; i < scalar_sp.element_dofs; ++i)
      for (int j = 0; j < vector_sp.element_dofs; ++j)
        trips.emplace_back(scalar_sp.element_dof(t, i),
                           vector_sp.element_dof(t, j), ke(i, j));
  }
  SparseOperator op;
  op.matrix.resize(scalar_sp.dof_count, vector_sp.dof_count);
  op.matrix.setFromTriplets(trips.begin(), trips.end());
  op.matrix.makeCompressed();
  return op;
}

/// Load vector of a traction g integrated against the vector test functions
/// over all edges carrying the given tag. Quadratic edge traces are
/// integrated with the three-point Gauss rule (exact for these traces).
template <class TractionFn>
Eigen::VectorXd assemble_form(const BoundaryTraction& f, const FemSpace& sp,
                              TractionFn&& g) {
  if (sp.kind != SpaceKind::VectorP2)
    throw std::invalid_argument("traction load needs the vector space");
  const Mesh& mesh = *sp.mesh;
  const int nv = static_cast<int>(mesh.vertices.size());
  Eigen::VectorXd load = Eigen::VectorXd::Zero(sp.dof_count);
  for (std::size_t e = 0; e < mesh.edges.size(); ++e) {
    if (mesh.edges[e].tag != f.tag) continue;
    const Eigen::Vector2d pa = mesh.vertices[mesh.edges[e].a];
    const Eigen::Vector2d pb = mesh.vertices[mesh.edges[e].b];
    const double len = (pb - pa).norm();
    const int na = mesh.edges[e].a, nb = mesh.edges[e].b;
    const int nm = nv + static_cast<int>(e);
    for (const EdgeQuadPoint& q : edge_rule()) {
      const Eigen::Vector2d x = pa + q.t * (pb - pa);
      const Eigen::Vector2d gv = g(x);
      const double phia = (1.0 - q.t) * (1.0 - 2.0 * q.t);
      const double phib = q.t * (2.0 * q.t - 1.0);
      const double phim = 4.0 * q.t * (1.0 - q.t);
      for (int c = 0; c < 2; ++c) {
        load(sp.dof_of(na, c)) += len * q.w * gv(c) * phia;
        load(sp.dof_of(nb, c)) += len * q.w * gv(c) * phib;
        load(sp.dof_of(nm, c)) += len * q.w * gv(c) * phim;
      }
    }
  }
  return load;
}

/// Volume load of a scalar source against the scalar test functions.
template <class SourceFn>
Eigen::VectorXd scalar_load(const FemSpace& sp, SourceFn&& f) {
  if (sp.kind == SpaceKind::VectorP2)
    throw std::invalid_argument("scalar load needs a scalar space");
  const Mesh& mesh = *sp.mesh;
  Eigen::VectorXd load = Eigen::VectorXd::Zero(sp.dof_count);
  for (int t = 0; t < static_cast<int>(mesh.triangles.size()); ++t) {
    const ElementGeometry g = element_geometry(mesh, t);
    for (const TriQuadPoint& q : triangle_rule()) {
      const ShapeEval s = detail::shapes_at(sp.kind, q.xi, q.eta);
      const double fv = f(map_point(g, q.xi, q.eta));
      for (int i = 0; i < sp.element_nodes; ++i)
        load(sp.element_dof(t, i)) += q.w * g.area * fv * s.N[i];
    }
  }
  return load;
}

/// Volume load of a vector source against the vector test functions.
template <class SourceFn>
Eigen::VectorXd vector_load(const FemSpace& sp, SourceFn&& f) {
  if (sp.kind != SpaceKind::VectorP2)
    throw std::invalid_argument("vector load needs the vector space");
  const Mesh& mesh = *sp.mesh;
  Eigen::VectorXd load = Eigen::VectorXd::Zero(sp.dof_count);
  for (int t = 0; t < static_cast<int>(mesh.triangles.size()); ++t) {
    const ElementGeometry g = element_geometry(mesh, t);
    for (const TriQuadPoint& q : triangle_rule()) {
      const ShapeEval s = eval_p2(q.xi, q.eta);
      const Eigen::Vector2d fv = f(map_point(g, q.xi, q.eta));
      for (int i = 0; i < 6; ++i)
        for (int c = 0; c < 2; ++c)
          load(sp.element_dof(t, 2 * i + c)) +=
              q.w * g.area * fv(c) * s.N[i];
    }
  }
  return load;
}

// ---------------------------------------------------------------------------
// Dirichlet conditions
// ---------------------------------------------------------------------------

/// Eliminates the listed dofs symmetrically: the constrained columns are
/// moved to the right-hand side, constrained rows and columns are zeroed,
/// unit diagonal entries are inserted, and rhs entries at constrained dofs
/// are set to the prescribed values. Repeating a dof with a different value
/// is rejected.
inline void apply_dirichlet(SparseOperator& op, Eigen::VectorXd& rhs,
                            const std::vector<int>& dofs,
                            const Eigen::VectorXd& values) {
  if (static_cast<int>(dofs.size()) != values.size())
    throw std::invalid_argument("dof/value count mismatch");
  const Eigen::Index n = op.matrix.rows();
  if (op.matrix.cols() != n || rhs.size() != n)
    throw std::invalid_argument("dirichlet elimination needs a square system");
  std::vector<char> constrained(n, 0);
  Eigen::VectorXd xb = Eigen::VectorXd::Zero(n);
  for (std::size_t k = 0; k < dofs.size(); ++k) {
    const int d = dofs[k];
    if (d < 0 || d >= n) throw std::invalid_argument("dof out of range");
    if (constrained[d] && xb(d) != values(k))
      throw std::invalid_argument("conflicting values for one dof");
    constrained[d] = 1;
    xb(d) = values(k);
  }
  rhs -= op.matrix * xb;
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(op.matrix.nonZeros() + dofs.size());
  for (int j = 0; j < op.matrix.outerSize(); ++j)
    for (Eigen::SparseMatrix<double>::InnerIterator it(op.matrix, j); it;
         ++it) {
      if (constrained[it.row()] || constrained[it.col()]) continue;
      trips.emplace_back(it.row(), it.col(), it.value());
    }
  for (Eigen::Index d = 0; d < n; ++d)
    if (constrained[d]) {
      trips.emplace_back(d, d, 1.0);
      rhs(d) = xb(d);
    }
  Eigen::SparseMatrix<double> out(n, n);
  out.setFromTriplets(trips.begin(), trips.end());
  out.makeCompressed();
  op.matrix = std::move(out);
}

// ---------------------------------------------------------------------------
// Linear solves
// ---------------------------------------------------------------------------

struct SingularMatrix : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IterationLimit : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ResidualCheckFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Factors once, solves many times. Sparse LU for systems up to 2e5
/// unknowns, BiCGSTAB with an incomplete-LU preconditioner beyond that.
/// Every solve is verified against
///   ||A x - b|| <= 1e-10 (||A||_F ||x|| + ||b||).
class LinearSolver {
 public:
  enum class Method { Direct, Iterative };

  explicit LinearSolver(const SparseOperator& op,
                        std::optional<Method> force = std::nullopt)
      : A_(op.matrix) {
    if (A_.rows() != A_.cols())
      throw std::invalid_argument("solver needs a square matrix");
    A_.makeCompressed();
    frob_ = std::sqrt(Eigen::Map<const Eigen::VectorXd>(A_.valuePtr(),
                                                        A_.nonZeros())
                          .squaredNorm());
    method_ = force.value_or(A_.rows() > 200000 ? Method::Iterative
                                                : Method::Direct);
    if (method_ == Method::Direct) {
      lu_ = std::make_unique<Eigen::SparseLU<Eigen::SparseMatrix<double>>>();
      lu_->compute(A_);
      if (lu_->info() != Eigen::Success)
        throw SingularMatrix("sparse LU factorization failed: " +
                             lu_->lastErrorMessage());
    } else {
      bicg_ = std::make_unique<Eigen::BiCGSTAB<
          Eigen::SparseMatrix<double>, Eigen::IncompleteLUT<double>>>();
      bicg_->preconditioner().setDroptol(1e-8);
      bicg_->preconditioner().setFillfactor(40);
      bicg_->setTolerance(1e-13);
      bicg_->setMaxIterations(20000);
      bicg_->compute(A_);
      if (bicg_->info() != Eigen::Success)
        throw SingularMatrix("iterative setup failed");
    }
  }

  Method method() const { return method_; }

  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const {
    Eigen::VectorXd x;
    if (method_ == Method::Direct) {
      x = lu_->solve(rhs);
      if (lu_->info() != Eigen::Success)
        throw SingularMatrix("sparse LU solve failed");
    } else {
      x = bicg_->solve(rhs);
      if (bicg_->info() != Eigen::Success)
        throw IterationLimit("iterative solve did not converge in " +
                             std::to_string(bicg_->iterations()) +
                             " iterations");
    }
    const double resid = (A_ * x - rhs).norm();
    const double bound = 1e-10 * (frob_ * x.norm() + rhs.norm());
    if (resid > bound)
      throw ResidualCheckFailure(
          "solution residual " + std::to_string(resid) +
          " exceeds certified bound " + std::to_string(bound));
    return x;
  }

 private:
  Eigen::SparseMatrix<double> A_;
  double frob_ = 0.0;
  Method method_ = Method::Direct;
  std::unique_ptr<Eigen::SparseLU<Eigen::SparseMatrix<double>>> lu_;
  std::unique_ptr<Eigen::BiCGSTAB<Eigen::SparseMatrix<double>,
                                  Eigen::IncompleteLUT<double>>>
      bicg_;
};

inline Eigen::VectorXd solve_sparse(const SparseOperator& op,
                                    const Eigen::VectorXd& rhs) {
  return LinearSolver(op).solve(rhs);
}

// ---------------------------------------------------------------------------
// Interpolation and error measures
// ---------------------------------------------------------------------------

/// Nodal interpolation; F maps a position to a double (scalar spaces) or an
/// Eigen::Vector2d (vector spaces).
template <class F>
Eigen::VectorXd interpolate(const FemSpace& sp, F&& f) {
  Eigen::VectorXd out(sp.dof_count);
  for (int node = 0; node < sp.nodes; ++node) {
    const Eigen::Vector2d x = sp.node_position(node);
    if constexpr (std::is_convertible_v<decltype(f(x)), double>) {
      out(node) = f(x);
    } else {
      const Eigen::Vector2d v = f(x);
      out(sp.dof_of(node, 0)) = v(0);
      out(sp.dof_of(node, 1)) = v(1);
    }
  }
  return out;
}

/// L2 distance between a coefficient vector and an exact field, by element
/// quadrature. Exact field returns double (scalar) or Vector2d (vector).
template <class F>
double l2_error(const FemSpace& sp, const Eigen::VectorXd& coeffs, F&& exact) {
  const Mesh& mesh = *sp.mesh;
  double acc = 0.0;
  for (int t = 0; t < static_cast<int>(mesh.triangles.size()); ++t) {
    const ElementGeometry g = element_geometry(mesh, t);
    for (const TriQuadPoint& q : triangle_rule()) {
      const ShapeEval s = detail::shapes_at(sp.kind, q.xi, q.eta);
      const Eigen::Vector2d x = map_point(g, q.xi, q.eta);
      if constexpr (std::is_convertible_v<decltype(exact(x)), double>) {
        double uh = 0.0;
        for (int i = 0; i < sp.element_nodes; ++i)
          uh += s.N[i] * coeffs(sp.element_dof(t, i));
        const double diff = uh - exact(x);
        acc += q.w * g.area * diff * diff;
      } else {
        Eigen::Vector2d uh = Eigen::Vector2d::Zero();
        for (int i = 0; i < sp.element_nodes; ++i)
          for (int c = 0; c < 2; ++c)
            uh(c) += s.N[i] * coeffs(sp.element_dof(t, 2 * i + c));
        const Eigen::Vector2d diff = uh - exact(x);
        acc += q.w * g.area * diff.squaredNorm();
      }
    }
  }
  return std::sqrt(acc);
}

/// H1-seminorm distance to an exact gradient. For scalar spaces `exact_grad`
/// returns the gradient as Vector2d; for vector spaces it returns the 2x2
/// Jacobian (rows = components).
template <class F>
double h1_error(const FemSpace& sp, const Eigen::VectorXd& coeffs,
                F&& exact_grad) {
  using Returned =
      std::decay_t<decltype(exact_grad(std::declval<Eigen::Vector2d>()))>;
  const Mesh& mesh = *sp.mesh;
  double acc = 0.0;
  for (int t = 0; t < static_cast<int>(mesh.triangles.size()); ++t) {
    const ElementGeometry g = element_geometry(mesh, t);
    for (const TriQuadPoint& q : triangle_rule()) {
      const ShapeEval s = detail::shapes_at(sp.kind, q.xi, q.eta);
      const Eigen::Vector2d x = map_point(g, q.xi, q.eta);
      if constexpr (Returned::ColsAtCompileTime == 1) {
        Eigen::Vector2d gh = Eigen::Vector2d::Zero();
        for (int i = 0; i < sp.element_nodes; ++i)
          gh += coeffs(sp.element_dof(t, i)) * (g.JinvT * s.dref[i]);
        acc += q.w * g.area *
               (gh - Eigen::Vector2d(exact_grad(x))).squaredNorm();
      } else {
        Eigen::Matrix2d gh = Eigen::Matrix2d::Zero();
        for (int i = 0; i < sp.element_nodes; ++i) {
          const Eigen::Vector2d gi = g.JinvT * s.dref[i];
          for (int c = 0; c < 2; ++c)
            gh.row(c) += coeffs(sp.element_dof(t, 2 * i + c)) *
                         gi.transpose();
        }
        acc += q.w * g.area *
               (gh - Eigen::Matrix2d(exact_grad(x))).squaredNorm();
      }
    }
  }
  return std::sqrt(acc);
}

/// Adds scale * A (optionally transposed) into a triplet list with row and
/// column offsets; used to compose block systems.
inline void add_block(std::vector<Eigen::Triplet<double>>& trips,
                      const Eigen::SparseMatrix<double>& A, int row0, int col0,
                      double scale, bool transpose = false) {
  for (int j = 0; j < A.outerSize(); ++j)
    for (Eigen::SparseMatrix<double>::InnerIterator it(A, j); it; ++it) {
      const int r = transpose ? static_cast<int>(it.col())
                              : static_cast<int>(it.row());
      const int c = transpose ? static_cast<int>(it.row())
                              : static_cast<int>(it.col());
      trips.emplace_back(row0 + r, col0 + c, scale * it.value());
    }
}

}  // namespace gelsim
