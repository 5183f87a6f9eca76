#pragma once

#include "gelsim/material.hpp"

#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

namespace gelsim {

/// Stress-free spherical state B = f0^2 I of uniform swelling (f0 > 1) or
/// compression (f0 < 1), together with solver diagnostics.
struct EquilibriumState {
  double f0 = 1.0;
  double phi0 = 0.5;
  double I1 = 3.0, I3 = 1.0;
  double residual = 0.0;
  double kappa0 = 0.0, nu0 = 0.0;
  /// More than one sign change on the search grid (phase-separation regime).
  bool multiple_roots = false;
  /// All refined roots, ascending in phi.
  std::vector<double> roots;
  /// Smallest fraction where the volumetric coefficient kappa changes sign,
  /// when such a point exists; the valid root satisfies phi0 > phi_star.
  std::optional<double> phi_star;
};

struct NoBracket : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Scalar equation for the stress-free fraction: left side minus right side
/// of  pi(phi)/(mu_E phi) + alpha (phi/phi_I)^{2r} - a3 (phi_I/phi)^{2q}
///   = a1 3^{s-1} (phi_I/phi)^{2s/3}.
/// The left side equals the volumetric coefficient kappa along the spherical
/// family; the right side equals nu f^2, so a root is exactly kappa = nu f^2.
inline double equilibrium_residual(const MaterialParams& p, double phi) {
  if (!(phi > 0.0 && phi < 1.0))
    throw std::domain_error("phi must lie in (0, 1)");
  const OsmoticPressure o = osmotic_pressure(p, phi);
  const double ratio = p.phi_I / phi;  // sqrt(I3) for the spherical family
  const double lhs = o.pi / (p.mu_E * phi) +
                     p.alpha * std::pow(phi / p.phi_I, 2.0 * p.r) -
                     p.a3 * std::pow(ratio, 2.0 * p.q);
  const double rhs =
      p.a1 * std::pow(3.0, p.s - 1.0) * std::pow(ratio, 2.0 * p.s / 3.0);
  return lhs - rhs;
}

/// Analytic derivative of equilibrium_residual with respect to phi, used by
/// the Newton polish. The slice derivative of pi is pi12.
inline double equilibrium_residual_derivative(const MaterialParams& p,
                                              double phi) {
  const OsmoticPressure o = osmotic_pressure(p, phi);
  const double ratio = p.phi_I / phi;
  double d = (o.pi12 * phi - o.pi) / (p.mu_E * phi * phi);
  d += 2.0 * p.r * p.alpha * std::pow(phi / p.phi_I, 2.0 * p.r) / phi;
  d += 2.0 * p.q * p.a3 * std::pow(ratio, 2.0 * p.q) / phi;
  d += (2.0 * p.s / 3.0) * p.a1 * std::pow(3.0, p.s - 1.0) *
       std::pow(ratio, 2.0 * p.s / 3.0) / phi;
  return d;
}

/// Sufficient condition for a unique stress-free state:
/// alpha/phi_I > a1 3^{s-1} phi_I^{2s/3} + a3 phi_I^{2q} + (c+b-a)/mu_E,
/// with the mixing coefficients carrying their energy scale.
struct UniquenessCheck {
  bool holds;
  double lhs, rhs;
};

inline UniquenessCheck uniqueness_condition(const MaterialParams& p) {
  UniquenessCheck u;
  u.lhs = p.alpha / p.phi_I;
  u.rhs = p.a1 * std::pow(3.0, p.s - 1.0) * std::pow(p.phi_I, 2.0 * p.s / 3.0) +
          p.a3 * std::pow(p.phi_I, 2.0 * p.q) +
          p.fh_scale * (p.c + p.b - p.a) / p.mu_E;
  u.holds = u.lhs > u.rhs;
  return u;
}

namespace detail {

// Bisection on a bracketing interval, then two guarded Newton steps.
template <typename F, typename DF>
double refine_root(F f, DF df, double lo, double hi) {
  double flo = f(lo);
  for (int it = 0; it < 200 && (hi - lo) > 1e-12; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double fmid = f(mid);
    if (fmid == 0.0) return mid;
    if ((flo < 0.0) == (fmid < 0.0)) {
      lo = mid;
      flo = fmid;
    } else {
      hi = mid;
    }
  }
  double x = 0.5 * (lo + hi);
  for (int it = 0; it < 2; ++it) {
    const double d = df(x);
    if (d == 0.0) break;
    const double step = f(x) / d;
    const double cand = x - step;
    if (cand > lo - (hi - lo) && cand < hi + (hi - lo) && cand > 0.0 &&
        cand < 1.0 && std::abs(f(cand)) <= std::abs(f(x)))
      x = cand;
  }
  return x;
}

}  // namespace detail

/// Solves the spherical equilibrium equation by bracketing on a uniform
/// 10^4-point grid over (1e-4, 1-1e-4), bisection, and a Newton polish.
/// Returns the smallest root; additional roots are kept as diagnostics.
/// Throws NoBracket if the residual never changes sign on the grid and
/// std::runtime_error if the root has kappa <= 0 (not a valid equilibrium).
inline EquilibriumState solve_spherical(const MaterialParams& p) {
  p.validate();
  constexpr int kGrid = 10000;
  constexpr double kLo = 1e-4, kHi = 1.0 - 1e-4;
  auto f = [&](double x) { return equilibrium_residual(p, x); };
  auto df = [&](double x) { return equilibrium_residual_derivative(p, x); };

  EquilibriumState st;
  double prev_x = kLo;
  double prev_f = f(prev_x);
  for (int i = 1; i < kGrid; ++i) {
    const double x = kLo + (kHi - kLo) * static_cast<double>(i) / (kGrid - 1);
    const double fx = f(x);
    if (prev_f == 0.0)
      st.roots.push_back(prev_x);
    else if ((prev_f < 0.0) != (fx < 0.0))
      st.roots.push_back(detail::refine_root(f, df, prev_x, x));
    prev_x = x;
    prev_f = fx;
  }
  if (st.roots.empty())
    throw NoBracket("equilibrium residual does not change sign on the grid");
  st.multiple_roots = st.roots.size() > 1;

  st.phi0 = st.roots.front();
  st.f0 = std::cbrt(p.phi_I / st.phi0);
  st.I1 = 3.0 * st.f0 * st.f0;
  st.I3 = std::pow(st.f0, 6.0);
  st.residual = f(st.phi0);
  const StressCoefficients sc =
      stress_coefficients(p, st.phi0, st.I1, st.I3);
  st.kappa0 = sc.kappa;
  st.nu0 = sc.nu;
  if (!(st.kappa0 > 0.0))
    throw std::runtime_error(
        "spherical root has nonpositive kappa; not a valid equilibrium");

  // kappa along the spherical family equals the left side of the residual
  // equation; report its smallest sign change when one exists.
  auto kappa_of = [&](double x) {
    const double ratio = p.phi_I / x;
    return osmotic_pressure(p, x).pi / (p.mu_E * x) +
           p.alpha * std::pow(x / p.phi_I, 2.0 * p.r) -
           p.a3 * std::pow(ratio, 2.0 * p.q);
  };
  prev_x = kLo;
  prev_f = kappa_of(prev_x);
  for (int i = 1; i < kGrid; ++i) {
    const double x = kLo + (kHi - kLo) * static_cast<double>(i) / (kGrid - 1);
    const double fx = kappa_of(x);
    if ((prev_f < 0.0) != (fx < 0.0)) {
      auto dk = [&](double y) {
        // Numerical derivative is adequate for a diagnostic root.
        const double h = 1e-8;
        return (kappa_of(y + h) - kappa_of(y - h)) / (2.0 * h);
      };
      st.phi_star = detail::refine_root(kappa_of, dk, prev_x, x);
      break;
    }
    prev_x = x;
    prev_f = fx;
  }
  return st;
}

}  // namespace gelsim
