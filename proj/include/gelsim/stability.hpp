#pragma once

#include "gelsim/material.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>

namespace gelsim {

struct NonSPD : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Spherical-state coercivity: the quadratic form
/// lambda_t (tr A)^2 + 2 mu_t |A|^2 over symmetric A is bounded below by
/// mu0 |A|^2 with mu0 = min(2 mu_t, 2 mu_t + 3 lambda_t) (the exact minimum
/// over the trace/deviatoric split).
struct SphericalCheck {
  bool ok;
  double mu_t_margin;
  double bulk_margin;
  double mu0;
};

inline SphericalCheck check_spherical(const EffectiveModuli& m) {
  SphericalCheck c;
  c.mu_t_margin = m.mu_t;
  c.bulk_margin = 3.0 * m.lambda_t + 2.0 * m.mu_t;
  c.ok = (c.mu_t_margin > 0.0) && (c.bulk_margin > 0.0);
  c.mu0 = std::min(2.0 * m.mu_t, 2.0 * m.mu_t + 3.0 * m.lambda_t);
  return c;
}

/// Certification record for a (possibly anisotropic) base state F0.
/// The spherical entries are evaluated at the volume-equivalent spherical
/// state f = I3^{1/6} with the supplied fraction, so they coincide with
/// check_spherical exactly when F0 itself is spherical.
struct StabilityReport {
  bool spherical_ok = false;
  double mu_t_margin = 0.0;
  double bulk_margin = 0.0;
  double mu0 = 0.0;

  bool general_ok = false;
  double c2 = 0.0, c3 = 0.0;
  double alpha0 = 0.0;
  double alpha1 = 0.0;
  double alpha1_margin = 0.0;  // alpha1 - max_{i != j} |h_ij| / 2
  Eigen::Matrix3d h_matrix = Eigen::Matrix3d::Zero();
  Eigen::Vector3d eigenvalues = Eigen::Vector3d::Zero();  // of C0, ascending
};

namespace detail {

struct StateCoefficients {
  Eigen::Matrix3d C0, C0inv;
  double I1, I3;
  double alpha0, alpha1;
  double c2, c3;
};

inline StateCoefficients state_coefficients(const MaterialParams& p,
                                            const Eigen::Matrix3d& F0,
                                            double phi1) {
  if (!(F0.determinant() > 0.0))
    throw NonSPD("base state must have positive determinant");
  StateCoefficients sc;
  sc.C0 = F0.transpose() * F0;
  sc.C0inv = sc.C0.inverse();
  sc.I1 = sc.C0.trace();
  sc.I3 = sc.C0.determinant();
  const HadamardEnergy w = hadamard_energy(p, sc.I1, sc.I3);
  sc.alpha1 = w.w1;
  sc.alpha0 = sc.I3 * w.w3;
  sc.c2 = w.w11 + sc.I3 * w.w13;
  sc.c3 = sc.I3 * sc.I3 * w.w33 +
          0.5 * phi1 * osmotic_pressure(p, phi1).pi12;
  return sc;
}

}  // namespace detail

/// Pointwise stability certificate at a general base state. The verdict
/// requires alpha0 < 0, C2 > 0, C3 > 0 and alpha1 > max|h_ij|/2 with
/// h_ij = (alpha0 + alpha1 (lambda_i + lambda_j)) / sqrt(lambda_i lambda_j)
/// over distinct eigenvalue indices of C0 = F0^T F0.
inline StabilityReport check_general(const Eigen::Matrix3d& F0, double phi1,
                                     const MaterialParams& p) {
  const auto sc = detail::state_coefficients(p, F0, phi1);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(sc.C0);
  if (es.info() != Eigen::Success)
    throw NonSPD("eigendecomposition of C0 failed");
  const Eigen::Vector3d lam = es.eigenvalues();
  if (!(lam(0) > 0.0)) throw NonSPD("C0 has a nonpositive eigenvalue");

  StabilityReport rep;
  rep.eigenvalues = lam;
  rep.alpha0 = sc.alpha0;
  rep.alpha1 = sc.alpha1;
  rep.c2 = sc.c2;
  rep.c3 = sc.c3;

  double hmax = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      if (i == j) continue;
      const double h = (sc.alpha0 + sc.alpha1 * (lam(i) + lam(j))) /
                       std::sqrt(lam(i) * lam(j));
      rep.h_matrix(i, j) = h;
      hmax = std::max(hmax, std::abs(h));
    }
  rep.alpha1_margin = sc.alpha1 - 0.5 * hmax;
  rep.general_ok = (sc.alpha0 < 0.0) && (sc.c2 > 0.0) && (sc.c3 > 0.0) &&
                   (rep.alpha1_margin > 0.0);

  const double f_eq = std::pow(sc.I3, 1.0 / 6.0);
  const auto sph = check_spherical(effective_moduli(p, phi1, f_eq));
  rep.spherical_ok = sph.ok;
  rep.mu_t_margin = sph.mu_t_margin;
  rep.bulk_margin = sph.bulk_margin;
  rep.mu0 = sph.mu0;
  return rep;
}

/// Quadratic form governing the perturbation energy about the base state,
/// split as H = H1 + H2 with
///   H1 = C2 tr^2(grad_u^T F0) + C3 tr^2(F0^{-1} grad_u)
///        - alpha0 |grad_u F0^{-1}|^2
///        + (alpha0/2) tr(grad_u C0^{-1} grad_u^T),
///   H2 = (alpha0/2) tr((F0^{-T} grad_u^T)^2)
///        + alpha1 (<F0 grad_u^T, grad_u F0^{-1}> + |grad_u|^2),
/// and the certified lower bound
///   (|alpha0|/2) |grad_u F0^{-1}|^2 + C2 tr^2(.) + C3 tr^2(.).
/// Since |grad_u F0^{-1}|^2 = tr(grad_u C0^{-1} grad_u^T), the difference
/// H - lower_bound equals H2 identically when alpha0 < 0.
struct QuadraticFormValue {
  double H_value;
  double lower_bound;
};

inline QuadraticFormValue quadratic_form_H(const Eigen::Matrix3d& F0,
                                           double phi1,
                                           const Eigen::Matrix3d& grad_u,
                                           const MaterialParams& p) {
  const auto sc = detail::state_coefficients(p, F0, phi1);
  const Eigen::Matrix3d F0inv = F0.inverse();
  const Eigen::Matrix3d M = grad_u * F0inv;

  const double tr1 = (grad_u.cwiseProduct(F0)).sum();  // tr(grad_u^T F0)
  const double tr2 = M.trace();                        // tr(F0^{-1} grad_u)
  const double M2 = M.squaredNorm();

  const double H1 =
      sc.c2 * tr1 * tr1 + sc.c3 * tr2 * tr2 - sc.alpha0 * M2 +
      0.5 * sc.alpha0 * (grad_u * sc.C0inv * grad_u.transpose()).trace();

  const Eigen::Matrix3d K = F0inv.transpose() * grad_u.transpose();
  const double H2 =
      0.5 * sc.alpha0 * (K * K).trace() +
      sc.alpha1 * (((F0 * grad_u.transpose())
                        .cwiseProduct(grad_u * F0inv))
                       .sum() +
                   grad_u.squaredNorm());

  QuadraticFormValue v;
  v.H_value = H1 + H2;
  v.lower_bound = 0.5 * std::abs(sc.alpha0) * M2 + sc.c2 * tr1 * tr1 +
                  sc.c3 * tr2 * tr2;
  return v;
}

}  // namespace gelsim
