#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <cmath>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "gelsim/equilibrium.hpp"
#include "gelsim/fem.hpp"
#include "gelsim/material.hpp"
#include "gelsim/mesh.hpp"
#include "gelsim/stability.hpp"

namespace gelsim {

/// The four linearized gel systems: the network is always clamped on
/// Gamma0. Impermeable walls admit no solvent flux anywhere; the permeable
/// variants hold the solvent pressure at its ambient value on GammaP.
/// Viscous variants carry an explicit solvent velocity with phase drag.
enum class Variant {
  InviscidImpermeable,
  InviscidPermeable,
  ViscousImpermeable,
  ViscousPermeable,
};

inline bool is_viscous(Variant v) {
  return v == Variant::ViscousImpermeable || v == Variant::ViscousPermeable;
}
inline bool is_permeable(Variant v) {
  return v == Variant::InviscidPermeable || v == Variant::ViscousPermeable;
}
inline const char* variant_name(Variant v) {
  switch (v) {
    case Variant::InviscidImpermeable: return "inviscid-impermeable";
    case Variant::InviscidPermeable: return "inviscid-permeable";
    case Variant::ViscousImpermeable: return "viscous-impermeable";
    case Variant::ViscousPermeable: return "viscous-permeable";
  }
  return "?";
}

/// Raised when the spherical stress-free state fails the coercivity check;
/// time stepping on top of an unstable base state is refused.
struct StabilityGateError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ScenarioConfig {
  MaterialParams material;
  Variant variant = Variant::InviscidImpermeable;
  int level = 5;
  double dt = 0.01;
  /// Squeeze amplitude: traction -P0 n applied on GammaP. In the permeable
  /// variants a constant ambient pressure is absorbed by the shift to the
  /// pressure deviation, so it produces no load there.
  double P0 = 0.0;
  /// Start from the volume-perturbed state rather than from rest.
  bool initial_perturbation = true;
};

/// Per-step bookkeeping of the discrete energy law
///   E(n+1) - E(n) + dt (D - W) = -numerical_dissipation <= 0.
struct EnergyRecord {
  int step = 0;
  double t = 0.0;
  double energy = 0.0;       // E(n+1)
  double dissipation = 0.0;  // D at n+1
  double work = 0.0;         // W at n+1
  double residual = 0.0;     // E(n+1)-E(n)+dt*(D-W); equals -num_dissipation
  double num_dissipation = 0.0;
};

/// Extra right-hand-side loads evaluated at the new time level; used by the
/// manufactured-solution studies.
struct SourceHooks {
  std::function<Eigen::VectorXd(double)> u_load;  // displacement-row load
  std::function<Eigen::VectorXd(double)> p_load;  // pressure-row load
};

/// Backward-Euler quasi-static simulator for one scenario. The monolithic
/// matrix is constant in time and factored once; homogeneous constraints
/// (clamping, pressure Dirichlet, the impermeable velocity tie) are carried
/// by a reduction basis Z, so each step solves Z^T A Z y = Z^T b.
class Simulator {
 public:
  explicit Simulator(const ScenarioConfig& cfg, SourceHooks hooks = {})
      : Simulator(build_unit_square(cfg.level), cfg, std::move(hooks)) {}

  Simulator(Mesh mesh, const ScenarioConfig& cfg, SourceHooks hooks = {})
      : cfg_(cfg), hooks_(std::move(hooks)), mesh_(std::move(mesh)) {
    cfg_.material.validate();
    eq_ = solve_spherical(cfg_.material);
    em_ = effective_moduli(cfg_.material, eq_.phi0, eq_.f0);
    const SphericalCheck gate = check_spherical(em_);
    if (!gate.ok)
      throw StabilityGateError(
          "base state fails coercivity: shear margin " +
          std::to_string(gate.mu_t_margin) + ", bulk margin " +
          std::to_string(gate.bulk_margin));

    vec_ = make_space(mesh_, SpaceKind::VectorP2);
    p1_ = make_space(mesh_, SpaceKind::ScalarP1);
    nu_ = vec_.dof_count;
    np_ = p1_.dof_count;

    K2_ = assemble_form(VectorViscosity{1.0, 0.0}, vec_).matrix;
    Kdiv_ = assemble_form(VectorViscosity{0.0, 1.0}, vec_).matrix;
    Mvec_ = assemble_form(Mass{}, vec_).matrix;
    Mp_ = assemble_form(Mass{}, p1_).matrix;
    Ks_ = assemble_form(ScalarDiffusion{1.0}, p1_).matrix;
    B_ = assemble_form(DivCoupling{1.0}, p1_, vec_).matrix;

    squeeze_ = Eigen::VectorXd::Zero(nu_);
    if (!is_permeable(cfg_.variant) && cfg_.P0 != 0.0) {
      const double P0 = cfg_.P0;
      squeeze_ = assemble_form(
          BoundaryTraction{BoundaryTag::GammaP}, vec_,
          [P0](const Eigen::Vector2d& x) {
            const Eigen::Vector2d n =
                x.y() < 0.5 ? Eigen::Vector2d(0, -1) : Eigen::Vector2d(0, 1);
            return Eigen::Vector2d(-P0 * n);
          });
    }

    build_initial_state();
    build_system();
    record_initial_energy();
  }

  // -- accessors ------------------------------------------------------------
  const ScenarioConfig& config() const { return cfg_; }
  const Mesh& mesh() const { return mesh_; }
  const FemSpace& vector_space() const { return vec_; }
  const FemSpace& pressure_space() const { return p1_; }
  const EquilibriumState& equilibrium() const { return eq_; }
  const EffectiveModuli& moduli() const { return em_; }
  double time() const { return t_; }
  int step_count() const { return n_; }
  const Eigen::VectorXd& u() const { return u_; }
  const Eigen::VectorXd& u_prev() const { return uprev_; }
  const Eigen::VectorXd& q() const { return q_; }
  const Eigen::VectorXd& p() const { return p_; }
  const Eigen::VectorXd& v2() const { return v2_; }
  Eigen::VectorXd v1() const { return (u_ - uprev_) / cfg_.dt; }
  const std::vector<EnergyRecord>& energy_history() const { return energy_; }
  double initial_energy() const { return e0_; }
  /// Norm of the divergence-balancing term added to the perturbation in the
  /// impermeable viscous scenario (zero elsewhere).
  double mean_divergence_correction() const { return correction_norm_; }
  /// Volume-perturbation amplitude f0 (1 - f0^3).
  double perturbation_amplitude() const {
    return eq_.f0 * (1.0 - std::pow(eq_.f0, 3));
  }

  /// Residual of the unconstrained monolithic equations at the last step;
  /// nonzero entries are the constraint reactions.
  Eigen::VectorXd raw_residual() const {
    if (n_ == 0) throw std::logic_error("no step taken yet");
    return A_raw_ * x_last_ - b_last_;
  }

  void step() {
    const double t1 = t_ + cfg_.dt;
    Eigen::VectorXd b = Eigen::VectorXd::Zero(full_size_);
    if (!is_viscous(cfg_.variant)) {
      b.segment(0, nu_) = squeeze_ +
                          (cfg_.material.eta1 / cfg_.dt) * (K2_ * u_) +
                          (cfg_.material.mu1 / cfg_.dt) *
                              (B_.transpose() * q_);
      b.segment(nu_ + np_, np_) = (1.0 / cfg_.dt) * (Mp_ * q_);
    } else {
      b.segment(0, nu_) = squeeze_ - em_.mu_t * (K2_ * u_) -
                          em_.lambda_t * (Kdiv_ * u_);
    }
    if (hooks_.u_load) b.segment(0, nu_) += hooks_.u_load(t1);
    if (hooks_.p_load) b.segment(p_offset_, np_) += hooks_.p_load(t1);

    const Eigen::VectorXd y = solver_->solve(Z_.transpose() * b);
    const Eigen::VectorXd x = Z_ * y;

    uprev_ = u_;
    const Eigen::VectorXd qprev = q_;
    if (!is_viscous(cfg_.variant)) {
      u_ = x.segment(0, nu_);
      q_ = x.segment(nu_, np_);
      p_ = x.segment(nu_ + np_, np_);
    } else {
      const Eigen::VectorXd v1n = x.segment(0, nu_);
      v2_ = x.segment(nu_, nu_);
      p_ = x.segment(2 * nu_, np_);
      u_ = uprev_ + cfg_.dt * v1n;
    }
    x_last_ = x;
    b_last_ = b;
    t_ = t1;
    ++n_;
    record_energy(qprev);
  }

 private:
  using SpMat = Eigen::SparseMatrix<double>;

  void build_initial_state() {
    u_ = Eigen::VectorXd::Zero(nu_);
    q_ = Eigen::VectorXd::Zero(np_);
    p_ = Eigen::VectorXd::Zero(np_);
    v2_ = Eigen::VectorXd::Zero(nu_);
    if (cfg_.initial_perturbation) {
      const double g = perturbation_amplitude();
      u_ = interpolate(vec_, [g](const Eigen::Vector2d& x) {
        return Eigen::Vector2d(
            g / (2.0 * M_PI) * std::sin(2.0 * M_PI * x.x()),
            g * x.y() * (1.0 - std::cos(2.0 * M_PI * x.x())));
      });
      // The perturbation vanishes on the clamped boundary analytically;
      // enforce that exactly (sin(2 pi) rounds away from zero).
      for (int d : vec_.boundary_dofs(BoundaryTag::Gamma0)) u_[d] = 0.0;
      if (cfg_.variant == Variant::ViscousImpermeable) {
        // Impermeable walls freeze the mean dilatation, so remove it from
        // the perturbation to let the state relax toward rest. A correction
        // vanishing on the whole boundary cannot carry net divergence, so
        // this one is tangential on GammaP (where the network is free).
        const Eigen::VectorXd w =
            interpolate(vec_, [g](const Eigen::Vector2d& x) {
              return Eigen::Vector2d(
                  0.0, -6.0 * g * (x.y() - 0.5) * x.x() * (1.0 - x.x()));
            });
        // Scale so the interpolated state has exactly zero mean divergence
        // (interpolation perturbs the nominal means slightly).
        const double mean_u = (B_ * u_).sum();
        const double mean_w = (B_ * w).sum();
        if (mean_w != 0.0) {
          const double scale = -mean_u / mean_w;
          u_ += scale * w;
          correction_norm_ = std::abs(scale) * w.norm();
        }
      }
    }
    uprev_ = u_;
    if (!is_viscous(cfg_.variant)) {
      // q starts as the L2 projection of div u.
      SparseOperator mp;
      mp.matrix = Mp_;
      mp.symmetric = true;
      q_ = LinearSolver(mp).solve(B_ * u_);
    }
  }

  void build_system() {
    const double dt = cfg_.dt;
    const MaterialParams& m = cfg_.material;
    std::vector<Eigen::Triplet<double>> trips;
    std::vector<char> drop;     // zero-constrained full dofs
    std::vector<int> tie_master;  // full-dof index of the master, or -1

    if (!is_viscous(cfg_.variant)) {
      full_size_ = nu_ + 2 * np_;
      p_offset_ = nu_ + np_;
      add_block(trips, K2_, 0, 0, em_.mu_t + m.eta1 / dt);
      add_block(trips, B_, 0, nu_, em_.lambda_t + m.mu1 / dt, true);
      add_block(trips, B_, 0, nu_ + np_, -1.0, true);
      add_block(trips, B_, nu_, 0, -1.0);
      add_block(trips, Mp_, nu_, nu_, 1.0);
      add_block(trips, Mp_, nu_ + np_, nu_, 1.0 / dt);
      add_block(trips, Ks_, nu_ + np_, nu_ + np_, em_.kappa_perm);

      drop.assign(full_size_, 0);
      tie_master.assign(full_size_, -1);
      for (int d : vec_.boundary_dofs(BoundaryTag::Gamma0)) drop[d] = 1;
      if (is_permeable(cfg_.variant))
        for (int d : p1_.boundary_dofs(BoundaryTag::GammaP))
          drop[nu_ + np_ + d] = 1;
    } else {
      full_size_ = 2 * nu_ + np_;
      p_offset_ = 2 * nu_;
      add_block(trips, K2_, 0, 0, dt * em_.mu_t + m.eta1);
      add_block(trips, Kdiv_, 0, 0, dt * em_.lambda_t + m.mu1);
      add_block(trips, Mvec_, 0, 0, m.beta);
      add_block(trips, Mvec_, 0, nu_, -m.beta);
      add_block(trips, B_, 0, 2 * nu_, -eq_.phi0, true);
      add_block(trips, Mvec_, nu_, 0, -m.beta);
      add_block(trips, K2_, nu_, nu_, m.eta2);
      add_block(trips, Kdiv_, nu_, nu_, m.mu2);
      add_block(trips, Mvec_, nu_, nu_, m.beta);
      add_block(trips, B_, nu_, 2 * nu_, -(1.0 - eq_.phi0), true);
      add_block(trips, B_, 2 * nu_, 0, eq_.phi0);
      add_block(trips, B_, 2 * nu_, nu_, 1.0 - eq_.phi0);

      drop.assign(full_size_, 0);
      tie_master.assign(full_size_, -1);
      for (int d : vec_.boundary_dofs(BoundaryTag::Gamma0)) drop[d] = 1;
      if (cfg_.variant == Variant::ViscousImpermeable) {
        // Solvent moves with the network on the whole boundary: zero where
        // the network is clamped, tied to the network velocity elsewhere.
        for (int d : vec_.boundary_dofs(BoundaryTag::Gamma0))
          drop[nu_ + d] = 1;
        for (int d : vec_.boundary_dofs(BoundaryTag::GammaP))
          tie_master[nu_ + d] = d;
      }
    }

    A_raw_.resize(full_size_, full_size_);
    A_raw_.setFromTriplets(trips.begin(), trips.end());
    A_raw_.makeCompressed();

    // Reduction basis: identity on masters, tie rows pointing at their
    // master's column, nothing for dropped dofs.
    std::vector<int> col_of(full_size_, -1);
    int nm = 0;
    for (int d = 0; d < full_size_; ++d)
      if (!drop[d] && tie_master[d] < 0) col_of[d] = nm++;
    std::vector<Eigen::Triplet<double>> ztrips;
    for (int d = 0; d < full_size_; ++d) {
      if (col_of[d] >= 0)
        ztrips.emplace_back(d, col_of[d], 1.0);
      else if (tie_master[d] >= 0)
        ztrips.emplace_back(d, col_of[tie_master[d]], 1.0);
    }
    Z_.resize(full_size_, nm);
    Z_.setFromTriplets(ztrips.begin(), ztrips.end());
    Z_.makeCompressed();

    SparseOperator reduced;
    reduced.matrix = Z_.transpose() * A_raw_ * Z_;
    reduced.matrix.makeCompressed();
    solver_ = std::make_unique<LinearSolver>(reduced);
  }

  double elastic_energy() const {
    if (!is_viscous(cfg_.variant))
      return 0.5 * em_.mu_t * u_.dot(K2_ * u_) +
             0.5 * em_.lambda_t * q_.dot(Mp_ * q_);
    return 0.5 * em_.mu_t * u_.dot(K2_ * u_) +
           0.5 * em_.lambda_t * u_.dot(Kdiv_ * u_);
  }

  void record_initial_energy() {
    e0_ = elastic_energy();
    eprev_ = e0_;
  }

  void record_energy(const Eigen::VectorXd& qprev) {
    const MaterialParams& m = cfg_.material;
    const double dt = cfg_.dt;
    const Eigen::VectorXd vel1 = (u_ - uprev_) / dt;
    EnergyRecord rec;
    rec.step = n_;
    rec.t = t_;
    rec.energy = elastic_energy();

    double num_diss;
    const Eigen::VectorXd du = u_ - uprev_;
    if (!is_viscous(cfg_.variant)) {
      const Eigen::VectorXd qdot = (q_ - qprev) / dt;
      rec.dissipation = m.eta1 * vel1.dot(K2_ * vel1) +
                        m.mu1 * qdot.dot(Mp_ * qdot) +
                        em_.kappa_perm * p_.dot(Ks_ * p_);
      const Eigen::VectorXd dq = q_ - qprev;
      num_diss = 0.5 * em_.mu_t * du.dot(K2_ * du) +
                 0.5 * em_.lambda_t * dq.dot(Mp_ * dq);
    } else {
      rec.dissipation = m.eta1 * vel1.dot(K2_ * vel1) +
                        m.mu1 * vel1.dot(Kdiv_ * vel1) +
                        m.eta2 * v2_.dot(K2_ * v2_) +
                        m.mu2 * v2_.dot(Kdiv_ * v2_) +
                        m.beta * (vel1 - v2_).dot(Mvec_ * (vel1 - v2_));
      num_diss = 0.5 * em_.mu_t * du.dot(K2_ * du) +
                 0.5 * em_.lambda_t * du.dot(Kdiv_ * du);
    }
    rec.work = vel1.dot(squeeze_);
    if (hooks_.u_load) rec.work += vel1.dot(hooks_.u_load(t_));
    if (hooks_.p_load) rec.work += p_.dot(hooks_.p_load(t_));
    rec.residual = rec.energy - eprev_ + dt * (rec.dissipation - rec.work);
    rec.num_dissipation = num_diss;
    eprev_ = rec.energy;
    energy_.push_back(rec);
  }

  ScenarioConfig cfg_;
  SourceHooks hooks_;
  Mesh mesh_;
  FemSpace vec_, p1_;
  EquilibriumState eq_;
  EffectiveModuli em_;
  int nu_ = 0, np_ = 0, full_size_ = 0, p_offset_ = 0;

  SpMat K2_, Kdiv_, Mvec_, Mp_, Ks_, B_;
  Eigen::VectorXd squeeze_;
  SpMat A_raw_, Z_;
  std::unique_ptr<LinearSolver> solver_;

  Eigen::VectorXd u_, uprev_, q_, p_, v2_, x_last_, b_last_;
  double t_ = 0.0;
  int n_ = 0;
  double e0_ = 0.0, eprev_ = 0.0, correction_norm_ = 0.0;
  std::vector<EnergyRecord> energy_;
};

}  // namespace gelsim
