#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>

namespace gelsim {

/// Material description for a polymer gel: a two-species mixing energy of
/// regular-solution type plus a compressible isotropic network energy of
/// Hadamard type, together with the transport and viscosity coefficients
/// used by the time-dependent solvers.
///
/// Unit conventions:
///  - `a`, `b`, `c` are dimensionless mixing coefficients; multiplying by
///    `fh_scale` (Pa) gives energies per unit volume.
///  - `mu_E` is the network stiffness scale in Pa. `a1, s, alpha, r, a3, q`
///    are the dimensionless Hadamard shape parameters.
///  - `phi_I` is the polymer volume fraction of the stress-free reference
///    state, in (0, 1).
///  - `beta` (Pa s / m^2 scale), `eta1, mu1, eta2, mu2` (Pa s) feed the
///    dynamic models; they are carried here so one struct describes a run.
struct MaterialParams {
  // Mixing energy G(phi1) = a phi1 ln phi1 + b phi2 ln phi2 + c phi1 phi2.
  double a = 1e-3;
  double b = 1.0;
  double c = 0.25;
  double fh_scale = 1.0;

  // Network energy scale and Hadamard exponents/weights.
  double mu_E = 1.0;
  double a1 = 1.0;
  double s = 1.0;
  double alpha = 1.0;
  double r = 1.0;
  double a3 = 1.0;
  double q = 1.0;

  // Reference polymer fraction.
  double phi_I = 0.5;

  // Friction and viscosities for the dynamic models.
  double beta = 1.0;
  double eta1 = 1.0;
  double mu1 = 1.0;
  double eta2 = 0.1;
  double mu2 = 0.1;

  /// Builds the mixing coefficients from polymerization indices and the
  /// interaction parameter: a = 1/N1, b = 1/N2, c = chi/2.
  static MaterialParams from_interaction(double chi, double N1, double N2) {
    MaterialParams p;
    if (N1 <= 0.0 || N2 <= 0.0)
      throw std::invalid_argument("polymerization indices must be positive");
    p.a = 1.0 / N1;
    p.b = 1.0 / N2;
    p.c = 0.5 * chi;
    return p;
  }

  /// Throws std::invalid_argument naming the offending field.
  void validate() const {
    auto positive = [](double v, const char* name) {
      if (!(v > 0.0))
        throw std::invalid_argument(std::string(name) + " must be positive");
    };
    positive(a, "a");
    positive(b, "b");
    positive(fh_scale, "fh_scale");
    positive(mu_E, "mu_E");
    positive(a1, "a1");
    positive(a3, "a3");
    positive(alpha, "alpha");
    if (!(s >= 1.0)) throw std::invalid_argument("s must be >= 1");
    positive(q, "q");
    positive(r, "r");
    if (!(phi_I > 0.0 && phi_I < 1.0))
      throw std::invalid_argument("phi_I must lie in (0, 1)");
    if (!(beta >= 0.0)) throw std::invalid_argument("beta must be >= 0");
    if (!(eta1 >= 0.0)) throw std::invalid_argument("eta1 must be >= 0");
    if (!(mu1 >= 0.0)) throw std::invalid_argument("mu1 must be >= 0");
    if (!(eta2 >= 0.0)) throw std::invalid_argument("eta2 must be >= 0");
    if (!(mu2 >= 0.0)) throw std::invalid_argument("mu2 must be >= 0");
    if (!(c >= 0.0)) throw std::invalid_argument("c must be >= 0");
  }
};

/// Value and partial derivatives of the dimensionless mixing energy
/// G(phi1, phi2) = a phi1 ln phi1 + b phi2 ln phi2 + c phi1 phi2 evaluated
/// on the incompressibility slice phi2 = 1 - phi1. The Gi are partials with
/// respect to the independent fractions, not slice derivatives.
struct MixingEnergy {
  double G;
  double G1, G2;
  double G11, G22, G12;
};

inline MixingEnergy mixing_energy(const MaterialParams& p, double phi1) {
  if (!(phi1 > 0.0 && phi1 < 1.0))
    throw std::invalid_argument("phi1 must lie in (0, 1)");
  const double phi2 = 1.0 - phi1;
  const double l1 = std::log(phi1);
  const double l2 = std::log(phi2);
  MixingEnergy m;
  m.G = p.a * phi1 * l1 + p.b * phi2 * l2 + p.c * phi1 * phi2;
  m.G1 = p.a * (l1 + 1.0) + p.c * phi2;
  m.G2 = p.b * (l2 + 1.0) + p.c * phi1;
  m.G11 = p.a / phi1;
  m.G22 = p.b / phi2;
  m.G12 = p.c;
  return m;
}

/// Osmotic pressure pi = phi1 G1 + phi2 G2 - G and its derivatives, in Pa
/// (fh_scale applied). pi12 = phi1 (G11 - 2 G12 + G22) is the combination
/// entering the mixing contribution to the effective moduli.
struct OsmoticPressure {
  double pi;
  double pi1, pi2;
  double pi12;
};

inline OsmoticPressure osmotic_pressure(const MaterialParams& p, double phi1) {
  if (!(phi1 > 0.0 && phi1 < 1.0))
    throw std::invalid_argument("phi1 must lie in (0, 1)");
  const double phi2 = 1.0 - phi1;
  const double l2 = std::log(phi2);
  OsmoticPressure o;
  o.pi = p.fh_scale * ((p.a - p.b) * phi1 - p.b * l2 - p.c * phi1 * phi1);
  o.pi1 = p.fh_scale * (p.a - p.b - 2.0 * p.c * phi1 - p.b * l2);
  o.pi2 = p.fh_scale * (-phi1 * p.b / phi2 - p.b * l2 - p.b);
  o.pi12 = p.fh_scale * (p.a - p.b - 2.0 * p.c * phi1 + p.b / phi2);
  return o;
}

/// Hadamard strain energy per unit reference volume,
///   w(I1, I3) = (mu_E/2) [ a1 I1^s / s + alpha I3^(-r) / r + a3 I3^q / q ],
/// with the partial derivatives needed by the stress and elasticity maps.
/// The I2 dependence is absent for this family, so w2-type terms are zero.
struct HadamardEnergy {
  double w;
  double w1, w3;
  double w11, w13, w33;
};

inline HadamardEnergy hadamard_energy(const MaterialParams& p, double I1,
                                      double I3) {
  if (!(I1 > 0.0) || !(I3 > 0.0))
    throw std::invalid_argument("invariants must be positive");
  const double h = 0.5 * p.mu_E;
  HadamardEnergy e;
  e.w = h * (p.a1 * std::pow(I1, p.s) / p.s +
             p.alpha * std::pow(I3, -p.r) / p.r +
             p.a3 * std::pow(I3, p.q) / p.q);
  e.w1 = h * p.a1 * std::pow(I1, p.s - 1.0);
  e.w3 = h * (p.a3 * std::pow(I3, p.q - 1.0) -
              p.alpha * std::pow(I3, -p.r - 1.0));
  e.w11 = h * p.a1 * (p.s - 1.0) * std::pow(I1, p.s - 2.0);
  e.w13 = 0.0;
  e.w33 = h * (p.a3 * (p.q - 1.0) * std::pow(I3, p.q - 2.0) +
               p.alpha * (p.r + 1.0) * std::pow(I3, -p.r - 2.0));
  return e;
}

/// Coefficients of the network Cauchy stress in the representation
///   sigma = (phi_I mu_E / sqrt(I3)) (nu B - kappa I) + beta2 B^{-1},
/// where B is the left Cauchy-Green tensor of the network deformation.
/// kappa bundles the volumetric response together with the osmotic
/// pressure, so kappa = nu I3 characterizes a stress-free spherical state.
struct StressCoefficients {
  double nu;
  double kappa;
  double beta0, beta1, beta2;
};

inline StressCoefficients stress_coefficients(const MaterialParams& p,
                                              double phi1, double I1,
                                              double I3) {
  const OsmoticPressure o = osmotic_pressure(p, phi1);
  const double sq = std::sqrt(I3);
  StressCoefficients sc;
  sc.nu = p.a1 * std::pow(I1, p.s - 1.0);
  sc.kappa = o.pi * sq / (p.mu_E * p.phi_I) + p.alpha * std::pow(I3, -p.r) -
             p.a3 * std::pow(I3, p.q);
  const double pref = p.phi_I * p.mu_E / sq;
  sc.beta1 = pref * sc.nu;
  sc.beta0 = -pref * sc.kappa;
  sc.beta2 = 0.0;  // no I2 dependence in the Hadamard family
  return sc;
}

/// Assembles sigma = beta0 I + beta1 B + beta2 B^{-1}.
inline Eigen::Matrix3d assemble_stress(const StressCoefficients& sc,
                                       const Eigen::Matrix3d& B) {
  Eigen::Matrix3d sigma =
      sc.beta0 * Eigen::Matrix3d::Identity() + sc.beta1 * B;
  if (sc.beta2 != 0.0) sigma += sc.beta2 * B.inverse();
  return 0.5 * (sigma + sigma.transpose());
}

/// Second-derivative (elasticity) map of the network energy at a state C:
/// the action A -> F[A] of F = 2 d^2 w / dC dC on symmetric tensors, using
/// the invariant representation
///   dw/dC = alpha1 I + alpha2 C + alpha0 C^{-1},
///   alpha1 = w1 + I1 w2, alpha2 = -w2, alpha0 = I3 w3.
/// The struct caches the coefficient derivative table d(alpha_n)/d(I_m) so
/// repeated applications are cheap.
struct ElasticityTensor {
  Eigen::Matrix3d C;
  Eigen::Matrix3d Cinv;
  double I1, I2, I3;
  double alpha0, alpha1, alpha2;
  // Rows: alpha1, alpha2, alpha0. Columns: d/dI1, d/dI2, d/dI3.
  double d1[3], d2[3], d0[3];

  /// Applies the elasticity map to a symmetric tensor A.
  Eigen::Matrix3d apply(const Eigen::Matrix3d& A) const {
    const double t1 = A.trace();
    const double t2 = I1 * t1 - (C * A).trace();
    const double t3 = I3 * (Cinv * A).trace();
    const double s1 = d1[0] * t1 + d1[1] * t2 + d1[2] * t3;
    const double s2 = d2[0] * t1 + d2[1] * t2 + d2[2] * t3;
    const double s0 = d0[0] * t1 + d0[1] * t2 + d0[2] * t3;
    Eigen::Matrix3d out = s1 * Eigen::Matrix3d::Identity() + s2 * C +
                          s0 * Cinv + alpha2 * A - alpha0 * Cinv * A * Cinv;
    return 2.0 * out;
  }

  /// Quadratic form A : F[A].
  double quad(const Eigen::Matrix3d& A) const {
    return (apply(A).cwiseProduct(A)).sum();
  }

  /// Invariant-direction column sums sum_n d(alpha_n)/d(I_m), used by the
  /// pointwise stability checks.
  double column_sum(int m) const { return d1[m] + d2[m] + d0[m]; }
};

inline ElasticityTensor general_elasticity(const MaterialParams& p,
                                           const Eigen::Matrix3d& C0) {
  Eigen::Matrix3d C = 0.5 * (C0 + C0.transpose());
  Eigen::LLT<Eigen::Matrix3d> llt(C);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("state tensor must be symmetric positive definite");
  ElasticityTensor T;
  T.C = C;
  T.Cinv = C.inverse();
  T.I1 = C.trace();
  const double trC2 = (C * C).trace();
  T.I2 = 0.5 * (T.I1 * T.I1 - trC2);
  T.I3 = C.determinant();

  const HadamardEnergy w = hadamard_energy(p, T.I1, T.I3);
  // w2-family identically zero for this energy.
  T.alpha1 = w.w1;
  T.alpha2 = 0.0;
  T.alpha0 = T.I3 * w.w3;

  T.d1[0] = w.w11;           // + w2 + I1 w12
  T.d1[1] = 0.0;             // w12 + I1 w22
  T.d1[2] = w.w13;
  T.d2[0] = 0.0;
  T.d2[1] = 0.0;
  T.d2[2] = 0.0;
  T.d0[0] = T.I3 * w.w13;
  T.d0[1] = 0.0;
  T.d0[2] = w.w3 + T.I3 * w.w33;
  return T;
}

/// Small-strain moduli of the gel linearized about a spherical equilibrium
/// with stretch f0 (so C0 = f0^2 I) and polymer fraction phi0 = phi_I/f0^3.
///
///  - `lambda_iso`, `mu_iso`: isotropic decomposition of the network
///    elasticity map at that state, F[A] = lambda_iso tr(A) I + 2 mu_iso A.
///  - `mu_t`, `lambda_t`: coefficients of the effective linear stress
///    2 mu_t D(u) + lambda_t (div u) I used by the time-dependent models.
///  - `kappa_perm`: permeability coefficient (1 - phi0)^2 / beta.
struct EffectiveModuli {
  double lambda_t;
  double mu_t;
  double lambda_iso;
  double mu_iso;
  double kappa_perm;
};

inline EffectiveModuli effective_moduli(const MaterialParams& p, double phi0,
                                        double f0) {
  if (!(f0 > 0.0)) throw std::invalid_argument("f0 must be positive");
  if (!(phi0 > 0.0 && phi0 < 1.0))
    throw std::invalid_argument("phi0 must lie in (0, 1)");
  const double f2 = f0 * f0;
  const double I1 = 3.0 * f2;
  const double I3 = f2 * f2 * f2;

  const OsmoticPressure o = osmotic_pressure(p, phi0);
  const StressCoefficients sc = stress_coefficients(p, phi0, I1, I3);
  const HadamardEnergy w = hadamard_energy(p, I1, I3);

  EffectiveModuli m;
  m.mu_t = p.phi_I * p.mu_E * (sc.kappa / f2 + sc.nu) / f2;
  m.lambda_iso = 2.0 * (w.w11 + f2 * (w.w3 + I3 * w.w33));
  m.mu_iso = -I3 * w.w3 / (f2 * f2);
  m.lambda_t = phi0 * (o.pi1 - o.pi2) - o.pi + 2.0 * p.phi_I * m.lambda_iso;
  m.kappa_perm = (1.0 - phi0) * (1.0 - phi0) / p.beta;
  return m;
}

}  // namespace gelsim
