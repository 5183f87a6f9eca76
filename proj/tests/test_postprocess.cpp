#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "gelsim/dynamics.hpp"
#include "gelsim/postprocess.hpp"

namespace {

using namespace gelsim;

MaterialParams swelling_material() {
  MaterialParams m;
  m.a = 1e-3;
  m.b = 1.0;
  m.c = 0.25;
  m.fh_scale = 1e-4;
  m.mu_E = 1.0;
  m.a1 = 1.0;
  m.s = 3.0;
  m.alpha = 20.0;
  m.r = 4.0;
  m.a3 = 1.0;
  m.q = 1.5;
  m.phi_I = 0.5;
  m.beta = 1.0;
  m.eta1 = 1.0;
  m.mu1 = 1.0;
  m.eta2 = 0.1;
  m.mu2 = 0.1;
  return m;
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  EXPECT_TRUE(f.good()) << path;
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::vector<std::string> lines_of(const std::string& body) {
  std::vector<std::string> out;
  std::istringstream ss(body);
  std::string line;
  while (std::getline(ss, line)) out.push_back(line);
  return out;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

TEST(StressRecovery, UniaxialStretchGivesConstantStress) {
  const Mesh mesh = build_unit_square(2);
  const FemSpace vec = make_space(mesh, SpaceKind::VectorP2);
  const FemSpace p1 = make_space(mesh, SpaceKind::ScalarP1);

  const double eps = 0.01;
  const Eigen::VectorXd u = interpolate(vec, [eps](const Eigen::Vector2d& x) {
    return Eigen::Vector2d(eps * x.x(), 0.0);
  });
  const Eigen::VectorXd zerov = Eigen::VectorXd::Zero(vec.dof_count);
  const Eigen::VectorXd zerop = Eigen::VectorXd::Zero(p1.dof_count);

  StressModel model;
  model.mu_t = 2.0;
  model.lambda_t = 3.0;
  model.dt = 1.0;
  const StressField s =
      compute_stress(vec, p1, model, u, u, zerov, zerop, 0.0);

  ASSERT_EQ(s.sxx.size(), mesh.triangles.size());
  for (size_t e = 0; e < s.sxx.size(); ++e) {
    EXPECT_NEAR(s.sxx[e], (2.0 * model.mu_t + model.lambda_t) * eps, 1e-14);
    EXPECT_NEAR(s.syy[e], model.lambda_t * eps, 1e-14);
    EXPECT_NEAR(s.sxy[e], 0.0, 1e-14);
  }
  EXPECT_FALSE(s.includes_viscous);
}

TEST(StressRecovery, RatePressureAndSolventTermsEnter) {
  const Mesh mesh = build_unit_square(2);
  const FemSpace vec = make_space(mesh, SpaceKind::VectorP2);
  const FemSpace p1 = make_space(mesh, SpaceKind::ScalarP1);

  const double eps = 0.01, gamma = 0.03, pi0 = 0.7, dt = 0.5;
  const Eigen::VectorXd u = interpolate(vec, [&](const Eigen::Vector2d& x) {
    return Eigen::Vector2d(eps * x.x(), 0.0);
  });
  const Eigen::VectorXd uprev = Eigen::VectorXd::Zero(vec.dof_count);
  const Eigen::VectorXd v2 = interpolate(vec, [&](const Eigen::Vector2d& x) {
    return Eigen::Vector2d(0.0, gamma * x.y());
  });
  const Eigen::VectorXd p = Eigen::VectorXd::Constant(p1.dof_count, pi0);

  StressModel model;
  model.mu_t = 2.0;
  model.lambda_t = 3.0;
  model.eta1 = 0.5;
  model.mu1 = 0.25;
  model.eta2 = 0.1;
  model.mu2 = 0.2;
  model.viscous = true;
  model.dt = dt;
  const StressField s =
      compute_stress(vec, p1, model, u, uprev, v2, p, 1.25);

  const double rate = eps / dt;  // v1 = u/dt
  const double sxx = (2.0 * model.mu_t + model.lambda_t) * eps +
                     (2.0 * model.eta1 + model.mu1) * rate +
                     model.mu2 * gamma - pi0;
  const double syy = model.lambda_t * eps + model.mu1 * rate +
                     (2.0 * model.eta2 + model.mu2) * gamma - pi0;
  for (size_t e = 0; e < s.sxx.size(); ++e) {
    EXPECT_NEAR(s.sxx[e], sxx, 1e-13);
    EXPECT_NEAR(s.syy[e], syy, 1e-13);
    EXPECT_NEAR(s.sxy[e], 0.0, 1e-13);
  }
  EXPECT_TRUE(s.includes_viscous);
  EXPECT_EQ(s.t, 1.25);
}

TEST(Debonding, ThresholdsClassifyPeakWallStress) {
  const Mesh mesh = build_unit_square(2);
  const int nt = static_cast<int>(mesh.triangles.size());
  StressField s;
  s.sxx.assign(nt, 0.0);
  s.syy.assign(nt, 0.0);
  s.sxy.assign(nt, 0.0);

  int wall_cell = -1, interior_cell = -1;
  for (int e = 0; e < nt; ++e) {
    if (wall_cell < 0 && touches_clamped_wall(mesh, e)) wall_cell = e;
    if (interior_cell < 0 && !touches_clamped_wall(mesh, e))
      interior_cell = e;
  }
  ASSERT_GE(wall_cell, 0);
  ASSERT_GE(interior_cell, 0);

  const double mu_E = 1.0;
  s.syy[wall_cell] = -0.1;
  DebondReport rep = debonding_report(mesh, s, mu_E);
  EXPECT_EQ(rep.status, DebondStatus::Safe);
  EXPECT_NEAR(rep.max_abs_syy, 0.1, 1e-15);
  EXPECT_EQ(rep.cell, wall_cell);
  EXPECT_EQ(rep.warn_threshold, 0.5);
  EXPECT_EQ(rep.fail_threshold, 10.0);

  s.syy[wall_cell] = 0.6;
  rep = debonding_report(mesh, s, mu_E);
  EXPECT_EQ(rep.status, DebondStatus::Warning);

  s.syy[wall_cell] = -20.0;
  rep = debonding_report(mesh, s, mu_E);
  EXPECT_EQ(rep.status, DebondStatus::Exceeded);
  EXPECT_NEAR(rep.max_abs_syy, 20.0, 1e-15);

  // A large interior value is invisible to the wall-debonding metric.
  s.syy[wall_cell] = 0.1;
  s.syy[interior_cell] = 99.0;
  rep = debonding_report(mesh, s, mu_E);
  EXPECT_EQ(rep.status, DebondStatus::Safe);
  EXPECT_NEAR(rep.max_abs_syy, 0.1, 1e-15);
}

TEST(Debonding, InteriorMedianIgnoresWallCells) {
  const Mesh mesh = build_unit_square(2);
  const int nt = static_cast<int>(mesh.triangles.size());
  StressField s;
  s.sxx.assign(nt, 0.0);
  s.syy.assign(nt, 0.0);
  s.sxy.assign(nt, 0.0);

  double next = 1.0;
  int interior = 0;
  for (int e = 0; e < nt; ++e) {
    if (touches_clamped_wall(mesh, e)) {
      s.syy[e] = 100.0;
    } else {
      s.syy[e] = -next;  // magnitudes 1, 2, 3, ...
      next += 1.0;
      ++interior;
    }
  }
  ASSERT_EQ(interior, 16);  // level 2: two interior columns of cells
  // Lower median of {1..16} is the 8th smallest.
  EXPECT_EQ(interior_median_abs_syy(mesh, s), 8.0);

  const Mesh coarse = build_unit_square(1);
  StressField tiny;
  tiny.sxx.assign(coarse.triangles.size(), 0.0);
  tiny.syy.assign(coarse.triangles.size(), 0.0);
  tiny.sxy.assign(coarse.triangles.size(), 0.0);
  EXPECT_THROW(interior_median_abs_syy(coarse, tiny), std::invalid_argument);
}

TEST(PiCurves, MonotoneForWeakMixingNotForDemixing) {
  MaterialParams base;
  base.a = 1e-3;
  base.b = 1.0;
  base.fh_scale = 1.0;
  const std::vector<PiCurve> curves = pi_curves(base, {0.5, 6.0}, 99);
  ASSERT_EQ(curves.size(), 2u);

  EXPECT_TRUE(curves[0].monotone);
  EXPECT_FALSE(curves[1].monotone);
  EXPECT_EQ(curves[0].chi, 0.5);
  ASSERT_EQ(curves[0].phi.size(), 99u);
  EXPECT_EQ(curves[0].phi.front(), 0.01);
  EXPECT_EQ(curves[0].phi.back(), 0.99);
  // (a-b) phi - b ln(1-phi) - (chi/2) phi^2 at phi = 0.5.
  EXPECT_NEAR(curves[0].phi[49], 0.5, 1e-15);
  EXPECT_NEAR(curves[0].pi[49], 0.13114718055994531, 1e-14);
}

TEST(Export, FilesRoundTripAndRerunsAreByteIdentical) {
  ScenarioConfig cfg;
  cfg.material = swelling_material();
  cfg.variant = Variant::InviscidImpermeable;
  cfg.level = 2;
  cfg.dt = 0.05;
  cfg.P0 = 0.3;
  Simulator sim(cfg);
  sim.step();
  sim.step();
  const StressField s = stress_field(sim);

  const std::string dir_a = testing::TempDir() + "gelsim_export_a";
  const std::string dir_b = testing::TempDir() + "gelsim_export_b";
  const ExportResult ra = export_fields(sim, s, dir_a);
  const ExportResult rb = export_fields(sim, s, dir_b);

  for (const auto& [pa, pb] :
       {std::pair{ra.vtk, rb.vtk}, {ra.vertices_csv, rb.vertices_csv},
        {ra.cells_csv, rb.cells_csv}, {ra.energy_csv, rb.energy_csv}}) {
    EXPECT_EQ(read_file(pa), read_file(pb)) << pa;
  }

  const Mesh& mesh = sim.mesh();
  const int nv = static_cast<int>(mesh.vertices.size());
  const auto vlines = lines_of(read_file(ra.vertices_csv));
  ASSERT_EQ(vlines.size(), static_cast<size_t>(nv) + 1);
  EXPECT_EQ(vlines[0], "id,x,y,ux,uy,p,q");
  const int probe = 5;
  const auto cells = split_csv(vlines[probe + 1]);
  ASSERT_EQ(cells.size(), 7u);
  EXPECT_EQ(std::strtod(cells[1].c_str(), nullptr),
            mesh.vertices[probe].x());
  EXPECT_EQ(std::strtod(cells[3].c_str(), nullptr), sim.u()[2 * probe]);
  EXPECT_EQ(std::strtod(cells[4].c_str(), nullptr), sim.u()[2 * probe + 1]);
  EXPECT_EQ(std::strtod(cells[5].c_str(), nullptr), sim.p()[probe]);
  EXPECT_EQ(std::strtod(cells[6].c_str(), nullptr), sim.q()[probe]);

  const auto elines = lines_of(read_file(ra.energy_csv));
  ASSERT_EQ(elines.size(), 3u);  // header + two steps
  const auto erow = split_csv(elines[2]);
  ASSERT_EQ(erow.size(), 7u);
  EXPECT_EQ(std::strtod(erow[2].c_str(), nullptr),
            sim.energy_history()[1].energy);

  const auto vtk = lines_of(read_file(ra.vtk));
  ASSERT_GT(vtk.size(), 10u);
  EXPECT_EQ(vtk[0], "# vtk DataFile Version 3.0");
  EXPECT_EQ(vtk[2], "ASCII");
  EXPECT_EQ(vtk[3], "DATASET UNSTRUCTURED_GRID");
  EXPECT_EQ(vtk[4], "POINTS " + std::to_string(nv) + " double");
  const int nt = static_cast<int>(mesh.triangles.size());
  bool found_cells = false, found_types = false;
  for (const std::string& l : vtk) {
    if (l == "CELLS " + std::to_string(nt) + " " + std::to_string(4 * nt))
      found_cells = true;
    if (l == "CELL_TYPES " + std::to_string(nt)) found_types = true;
  }
  EXPECT_TRUE(found_cells);
  EXPECT_TRUE(found_types);
}

TEST(Export, WallStressReflectsRetainedPressureWhenSealed) {
  // Companion of the squeeze identity: sealed walls keep |sigma_yy| = P0 in
  // every cell, so the debonding metric sees exactly the applied squeeze.
  ScenarioConfig cfg;
  cfg.material = swelling_material();
  cfg.variant = Variant::InviscidImpermeable;
  cfg.level = 2;
  cfg.dt = 0.1;
  cfg.P0 = 0.4;
  cfg.initial_perturbation = false;
  Simulator sim(cfg);
  for (int i = 0; i < 5; ++i) sim.step();
  const StressField s = stress_field(sim);
  const DebondReport rep = debonding_report(sim.mesh(), s, 1.0);
  EXPECT_NEAR(rep.max_abs_syy, cfg.P0, 1e-9);
  EXPECT_EQ(rep.status, DebondStatus::Safe);
  EXPECT_NEAR(interior_median_abs_syy(sim.mesh(), s), cfg.P0, 1e-9);
}

}  // namespace
