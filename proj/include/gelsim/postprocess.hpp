#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "gelsim/dynamics.hpp"
#include "gelsim/fem.hpp"
#include "gelsim/material.hpp"
#include "gelsim/mesh.hpp"

namespace gelsim {

/// Coefficients for elementwise stress recovery. The recovered tensor is
///   sigma = 2 mu_t D(u) + lambda_t (div u) I
///         + 2 eta1 D(v1) + mu1 (div v1) I          (network rate terms)
///         [+ 2 eta2 D(v2) + mu2 (div v2) I]        (solvent, viscous only)
///         - p I,
/// with v1 the backward-difference network velocity (u - u_prev)/dt. The
/// dilatation enters through div u directly rather than its projection.
struct StressModel {
  double mu_t = 0.0, lambda_t = 0.0;
  double eta1 = 0.0, mu1 = 0.0, eta2 = 0.0, mu2 = 0.0;
  bool viscous = false;  ///< include the solvent-phase rate terms
  double dt = 1.0;
};

/// Per-cell stress components: the mean of the recovered tensor over the
/// element quadrature points.
struct StressField {
  std::vector<double> sxx, syy, sxy;
  bool includes_viscous = false;
  double t = 0.0;
};

inline StressField compute_stress(const FemSpace& vec, const FemSpace& p1,
                                  const StressModel& model,
                                  const Eigen::VectorXd& u,
                                  const Eigen::VectorXd& uprev,
                                  const Eigen::VectorXd& v2,
                                  const Eigen::VectorXd& p, double t) {
  const Mesh& mesh = *vec.mesh;
  const int nt = static_cast<int>(mesh.triangles.size());
  StressField out;
  out.sxx.assign(nt, 0.0);
  out.syy.assign(nt, 0.0);
  out.sxy.assign(nt, 0.0);
  out.includes_viscous = model.viscous;
  out.t = t;

  const Eigen::Matrix2d I = Eigen::Matrix2d::Identity();
  for (int e = 0; e < nt; ++e) {
    const ElementGeometry g = element_geometry(mesh, e);
    double axx = 0.0, ayy = 0.0, axy = 0.0;
    for (const TriQuadPoint& q : triangle_rule()) {
      const ShapeEval sv = detail::shapes_at(vec.kind, q.xi, q.eta);
      const ShapeEval sp = detail::shapes_at(p1.kind, q.xi, q.eta);

      Eigen::Matrix2d Gu = Eigen::Matrix2d::Zero();
      Eigen::Matrix2d Gv1 = Eigen::Matrix2d::Zero();
      Eigen::Matrix2d Gv2 = Eigen::Matrix2d::Zero();
      for (int i = 0; i < vec.element_nodes; ++i) {
        const Eigen::Vector2d gi = g.JinvT * sv.dref[i];
        for (int c = 0; c < 2; ++c) {
          const int d = vec.element_dof(e, 2 * i + c);
          Gu.row(c) += u[d] * gi.transpose();
          Gv1.row(c) += ((u[d] - uprev[d]) / model.dt) * gi.transpose();
          if (model.viscous) Gv2.row(c) += v2[d] * gi.transpose();
        }
      }
      double pval = 0.0;
      for (int i = 0; i < p1.element_nodes; ++i)
        pval += sp.N[i] * p[p1.element_dof(e, i)];

      Eigen::Matrix2d sig =
          model.mu_t * (Gu + Gu.transpose()) +
          (model.lambda_t * Gu.trace() - pval) * I +
          model.eta1 * (Gv1 + Gv1.transpose()) + model.mu1 * Gv1.trace() * I;
      if (model.viscous)
        sig += model.eta2 * (Gv2 + Gv2.transpose()) +
               model.mu2 * Gv2.trace() * I;

      axx += q.w * sig(0, 0);
      ayy += q.w * sig(1, 1);
      axy += q.w * sig(0, 1);
    }
    out.sxx[e] = axx;  // quadrature weights sum to one: weighted mean
    out.syy[e] = ayy;
    out.sxy[e] = axy;
  }
  return out;
}

inline StressField stress_field(const Simulator& sim) {
  const MaterialParams& mat = sim.config().material;
  StressModel model;
  model.mu_t = sim.moduli().mu_t;
  model.lambda_t = sim.moduli().lambda_t;
  model.eta1 = mat.eta1;
  model.mu1 = mat.mu1;
  model.eta2 = mat.eta2;
  model.mu2 = mat.mu2;
  model.viscous = is_viscous(sim.config().variant);
  model.dt = sim.config().dt;
  return compute_stress(sim.vector_space(), sim.pressure_space(), model,
                        sim.u(), sim.u_prev(), sim.v2(), sim.p(), sim.time());
}

/// A cell counts as wall-adjacent when it owns at least one vertex on a
/// clamped wall (x = 0 or x = 1).
inline bool touches_clamped_wall(const Mesh& mesh, int cell) {
  for (int k = 0; k < 3; ++k) {
    const Eigen::Vector2d& v = mesh.vertices[mesh.triangles[cell][k]];
    if (v.x() == 0.0 || v.x() == 1.0) return true;
  }
  return false;
}

enum class DebondStatus { Safe, Warning, Exceeded };

inline const char* debond_status_name(DebondStatus s) {
  switch (s) {
    case DebondStatus::Safe: return "safe";
    case DebondStatus::Warning: return "warning";
    case DebondStatus::Exceeded: return "exceeded";
  }
  return "?";
}

/// Peak normal-stress magnitude |sigma_yy| over wall-adjacent cells, held
/// against debonding thresholds of 0.5 and 10 times the network shear
/// modulus (same units as the stress field).
struct DebondReport {
  double max_abs_syy = 0.0;
  int cell = -1;
  double warn_threshold = 0.0;
  double fail_threshold = 0.0;
  DebondStatus status = DebondStatus::Safe;
};

inline DebondReport debonding_report(const Mesh& mesh, const StressField& s,
                                     double mu_E) {
  DebondReport rep;
  rep.warn_threshold = 0.5 * mu_E;
  rep.fail_threshold = 10.0 * mu_E;
  for (int e = 0; e < static_cast<int>(s.syy.size()); ++e) {
    if (!touches_clamped_wall(mesh, e)) continue;
    const double v = std::abs(s.syy[e]);
    if (v > rep.max_abs_syy) {
      rep.max_abs_syy = v;
      rep.cell = e;
    }
  }
  rep.status = rep.max_abs_syy >= rep.fail_threshold ? DebondStatus::Exceeded
               : rep.max_abs_syy >= rep.warn_threshold ? DebondStatus::Warning
                                                       : DebondStatus::Safe;
  return rep;
}

/// Lower median of |sigma_yy| over cells that do not touch a clamped wall.
inline double interior_median_abs_syy(const Mesh& mesh, const StressField& s) {
  std::vector<double> vals;
  for (int e = 0; e < static_cast<int>(s.syy.size()); ++e)
    if (!touches_clamped_wall(mesh, e)) vals.push_back(std::abs(s.syy[e]));
  if (vals.empty())
    throw std::invalid_argument("mesh has no interior cells");
  std::sort(vals.begin(), vals.end());
  return vals[(vals.size() - 1) / 2];
}

/// Osmotic-pressure curve for one interaction strength, sampled uniformly
/// over [0.01, 0.99]. `monotone` reports whether the samples are
/// nondecreasing; it trips for demixing-strength interaction.
struct PiCurve {
  double chi = 0.0;
  std::vector<double> phi, pi;
  bool monotone = true;
};

inline std::vector<PiCurve> pi_curves(const MaterialParams& base,
                                      const std::vector<double>& chis,
                                      int n_points = 199) {
  if (n_points < 2) throw std::invalid_argument("need at least two samples");
  std::vector<PiCurve> out;
  for (double chi : chis) {
    MaterialParams m = base;
    m.c = 0.5 * chi;
    PiCurve c;
    c.chi = chi;
    c.phi.resize(n_points);
    c.pi.resize(n_points);
    for (int i = 0; i < n_points; ++i) {
      const double phi =
          std::lerp(0.01, 0.99, static_cast<double>(i) / (n_points - 1));
      c.phi[i] = phi;
      c.pi[i] = osmotic_pressure(m, phi).pi;
      if (i > 0 && c.pi[i] < c.pi[i - 1]) c.monotone = false;
    }
    out.push_back(std::move(c));
  }
  return out;
}

namespace detail {

inline std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_or_throw(const std::string& path, const std::string& body) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  f << body;
  f.flush();
  if (!f.good())
    throw std::runtime_error("failed to write " + path);
}

}  // namespace detail

struct ExportResult {
  std::string vtk, vertices_csv, cells_csv, energy_csv;
};

/// Writes the solution snapshot and the energy log into `dir`:
///   solution.vtk         legacy ASCII unstructured grid (point data u, p,
///                        dilatation; cell data stress components)
///   fields_vertices.csv  id,x,y,ux,uy,p,q per vertex
///   fields_cells.csv     cell,sxx,syy,sxy
///   energy.csv           one row per completed step
/// All numbers are printed with %.17g so files round-trip bit-exactly and
/// reruns of the same scenario are byte-identical.
inline ExportResult export_fields(const Simulator& sim, const StressField& s,
                                  const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec)
    throw std::runtime_error("cannot create output directory " + dir);

  const Mesh& mesh = sim.mesh();
  const int nv = static_cast<int>(mesh.vertices.size());
  const int nt = static_cast<int>(mesh.triangles.size());
  const Eigen::VectorXd& u = sim.u();
  const Eigen::VectorXd& p = sim.p();
  const Eigen::VectorXd& q = sim.q();
  using detail::g17;

  ExportResult res;
  res.vtk = (fs::path(dir) / "solution.vtk").string();
  res.vertices_csv = (fs::path(dir) / "fields_vertices.csv").string();
  res.cells_csv = (fs::path(dir) / "fields_cells.csv").string();
  res.energy_csv = (fs::path(dir) / "energy.csv").string();

  std::string vtk;
  vtk += "# vtk DataFile Version 3.0\n";
  vtk += std::string("gelsim ") + variant_name(sim.config().variant) +
         " t=" + g17(sim.time()) + "\n";
  vtk += "ASCII\nDATASET UNSTRUCTURED_GRID\n";
  vtk += "POINTS " + std::to_string(nv) + " double\n";
  for (int k = 0; k < nv; ++k)
    vtk += g17(mesh.vertices[k].x()) + " " + g17(mesh.vertices[k].y()) +
           " 0\n";
  vtk += "CELLS " + std::to_string(nt) + " " + std::to_string(4 * nt) + "\n";
  for (int e = 0; e < nt; ++e)
    vtk += "3 " + std::to_string(mesh.triangles[e][0]) + " " +
           std::to_string(mesh.triangles[e][1]) + " " +
           std::to_string(mesh.triangles[e][2]) + "\n";
  vtk += "CELL_TYPES " + std::to_string(nt) + "\n";
  for (int e = 0; e < nt; ++e) vtk += "5\n";
  vtk += "POINT_DATA " + std::to_string(nv) + "\n";
  vtk += "VECTORS displacement double\n";
  for (int k = 0; k < nv; ++k)
    vtk += g17(u[2 * k]) + " " + g17(u[2 * k + 1]) + " 0\n";
  vtk += "SCALARS pressure double 1\nLOOKUP_TABLE default\n";
  for (int k = 0; k < nv; ++k) vtk += g17(p[k]) + "\n";
  vtk += "SCALARS dilatation double 1\nLOOKUP_TABLE default\n";
  for (int k = 0; k < nv; ++k) vtk += g17(q[k]) + "\n";
  vtk += "CELL_DATA " + std::to_string(nt) + "\n";
  const std::pair<const char*, const std::vector<double>*> comps[] = {
      {"stress_xx", &s.sxx}, {"stress_yy", &s.syy}, {"stress_xy", &s.sxy}};
  for (const auto& [name, vals] : comps) {
    vtk += std::string("SCALARS ") + name + " double 1\nLOOKUP_TABLE default\n";
    for (int e = 0; e < nt; ++e) vtk += g17((*vals)[e]) + "\n";
  }
  detail::write_or_throw(res.vtk, vtk);

  std::string vcsv = "id,x,y,ux,uy,p,q\n";
  for (int k = 0; k < nv; ++k) {
    vcsv += std::to_string(k) + "," + g17(mesh.vertices[k].x()) + "," +
            g17(mesh.vertices[k].y()) + "," + g17(u[2 * k]) + "," +
            g17(u[2 * k + 1]) + "," + g17(p[k]) + "," + g17(q[k]) + "\n";
  }
  detail::write_or_throw(res.vertices_csv, vcsv);

  std::string ccsv = "cell,sxx,syy,sxy\n";
  for (int e = 0; e < nt; ++e)
    ccsv += std::to_string(e) + "," + g17(s.sxx[e]) + "," + g17(s.syy[e]) +
            "," + g17(s.sxy[e]) + "\n";
  detail::write_or_throw(res.cells_csv, ccsv);

  std::string ecsv = "step,t,energy,dissipation,work,residual,num_dissipation\n";
  for (const EnergyRecord& r : sim.energy_history())
    ecsv += std::to_string(r.step) + "," + g17(r.t) + "," + g17(r.energy) +
            "," + g17(r.dissipation) + "," + g17(r.work) + "," +
            g17(r.residual) + "," + g17(r.num_dissipation) + "\n";
  detail::write_or_throw(res.energy_csv, ecsv);
  return res;
}

}  // namespace gelsim
