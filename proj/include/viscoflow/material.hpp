#pragma once

#include "viscoflow/small_matrix.hpp"

namespace viscoflow {

/// Parameters of the stored elastic energy density and its second-gradient
/// augmentation. The compression exponent must satisfy s >= p*d/(p-d) and the
/// growth exponent p > d.
struct ElasticParams {
  double mu = 1.0;       // shear-like modulus, > 0
  double kappa = 1.0;    // volumetric modulus, >= 0
  double eps_det = 0.05; // compression-penalty weight, > 0
  double s_exp = 4.0;    // compression exponent
  double c_P = 0.01;     // second-gradient weight, > 0
  double p_exp = 4.0;    // second-gradient growth exponent, > d

  static double minimal_compression_exponent(int d, double p) {
    return p * static_cast<double>(d) / (p - static_cast<double>(d));
  }
  void validate(int d) const;
};

/// Isotropic viscosity acting on strain rates, optionally modulated by a
/// bounded function of the right Cauchy-Green tensor (theta > 0).
struct ViscosityTensor {
  double eta = 1.0;      // shear viscosity, > 0
  double lambda_v = 0.0; // volumetric viscosity, >= 0
  double theta = 0.0;    // C-dependence weight, >= 0

  void validate() const;
};

/// Smallness and discretization parameters of one run.
struct ScaleParams {
  double delta = 0.1; // smallness parameter, > 0
  double alpha = 0.4; // second-gradient scaling exponent, in (1/(p-1), 1)
  double rho = 1.0;   // mass density, > 0
  double h = 0.1;     // delay timescale, > 0
  double tau = 0.025; // inner timestep, 0 < tau <= h with h/tau integer

  void validate(double p_exp) const;
  int steps_per_block() const;
};

struct Material {
  ElasticParams elastic;
  ViscosityTensor viscosity;
};

// --- elastic energy -------------------------------------------------------

/// Stored energy density. Returns +infinity (a value, not a fault) when
/// det F <= 0.
double elastic_density(const Mat& f, const ElasticParams& par);

/// First Piola-Kirchhoff stress dW/dF. Throws std::domain_error if det F <= 0.
Mat elastic_stress(const Mat& f, const ElasticParams& par);

/// Directional second derivative of the stored energy, d(elastic_stress)[h].
Mat elastic_stress_tangent(const Mat& f, const Mat& h, const ElasticParams& par);

/// lambda* = 2 kappa + eps_det s (s+1): the volumetric coefficient of the
/// elastic moduli at the identity.
double lambda_star(const ElasticParams& par);

/// Tensor of elastic moduli, the second derivative of the stored energy at
/// the identity. Acts as 2 mu sym(m) + lambda* tr(m) Id.
Tensor4 elastic_moduli(int d, const ElasticParams& par);

/// Action of the elastic moduli without materializing the tensor.
Mat elastic_moduli_apply(const Mat& m, const ElasticParams& par);

// --- second-gradient energy -----------------------------------------------

double second_grade_density(const Tensor3& g, const ElasticParams& par);
Tensor3 hyperstress(const Tensor3& g, const ElasticParams& par);
Tensor3 hyperstress_tangent(const Tensor3& g, const Tensor3& h, const ElasticParams& par);

// --- dissipation ----------------------------------------------------------

/// Modulation factor of the viscosity tensor, 1 + theta |C-Id|^2/(1+|C-Id|^2).
double viscosity_modulation(const Mat& c, const ViscosityTensor& visc);

/// Constant-part action: 2 eta e + lambda_v tr(e) Id.
Mat viscosity_apply_constant(const Mat& e, const ViscosityTensor& visc);

/// Full action at right Cauchy-Green tensor c.
Mat viscosity_apply(const Mat& c, const Mat& e, const ViscosityTensor& visc);

/// Dissipation density 1/2 Edot : D(C) Edot with Edot = sym(F^T Fdot).
double dissipation_density(const Mat& f, const Mat& fdot, const ViscosityTensor& visc);

/// Viscous Piola stress, the derivative of the dissipation density in Fdot.
Mat viscous_stress(const Mat& f, const Mat& fdot, const ViscosityTensor& visc);

/// Directional derivative of the viscous stress in Fdot; the dissipation
/// density is quadratic in Fdot so this does not depend on Fdot.
Mat viscous_stress_tangent(const Mat& f, const Mat& h, const ViscosityTensor& visc);

// --- quantified linearization residuals -------------------------------------

/// | (delta^{-1} dW(Id + delta gu) - C gu) : gphi |. Throws on det <= 0.
double energy_linearization_residual(double delta, const Mat& gu, const Mat& gphi,
                                     const ElasticParams& par);

/// | delta^{-1} viscous_stress(Id + delta gu, delta gv) : gphi
///   - (D0 sym gv) : sym gphi |.
double dissipation_linearization_residual(double delta, const Mat& gu, const Mat& gv,
                                          const Mat& gphi, const ViscosityTensor& visc);

}  // namespace viscoflow
