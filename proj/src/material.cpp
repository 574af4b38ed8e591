#include "viscoflow/material.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace viscoflow {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Volumetric part g(J) = kappa (J-1)^2 + eps (J^{-s} + s J - (s+1)),
// normalized so that g(1) = g'(1) = 0.
double vol_value(double j, const ElasticParams& par) {
  const double dj = j - 1.0;
  return par.kappa * dj * dj +
         par.eps_det * (std::pow(j, -par.s_exp) + par.s_exp * j - (par.s_exp + 1.0));
}

double vol_d1(double j, const ElasticParams& par) {
  return 2.0 * par.kappa * (j - 1.0) +
         par.eps_det * par.s_exp * (1.0 - std::pow(j, -par.s_exp - 1.0));
}

double vol_d2(double j, const ElasticParams& par) {
  return 2.0 * par.kappa +
         par.eps_det * par.s_exp * (par.s_exp + 1.0) * std::pow(j, -par.s_exp - 2.0);
}

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

}  // namespace

void ElasticParams::validate(int d) const {
  require(d >= 1 && d <= 3, "ElasticParams: dimension must be 1, 2 or 3");
  require(mu > 0.0, "ElasticParams: mu must be positive");
  require(kappa >= 0.0, "ElasticParams: kappa must be nonnegative");
  require(eps_det > 0.0, "ElasticParams: eps_det must be positive");
  require(c_P > 0.0, "ElasticParams: c_P must be positive");
  require(p_exp > static_cast<double>(d), "ElasticParams: p_exp must exceed the dimension");
  require(s_exp >= minimal_compression_exponent(d, p_exp) - 1e-12,
          "ElasticParams: s_exp must be at least p*d/(p-d)");
}

void ViscosityTensor::validate() const {
  require(eta > 0.0, "ViscosityTensor: eta must be positive");
  require(lambda_v >= 0.0, "ViscosityTensor: lambda_v must be nonnegative");
  require(theta >= 0.0, "ViscosityTensor: theta must be nonnegative");
}

void ScaleParams::validate(double p_exp) const {
  require(delta > 0.0, "ScaleParams: delta must be positive");
  require(rho > 0.0, "ScaleParams: rho must be positive");
  require(h > 0.0 && tau > 0.0 && tau <= h + 1e-15, "ScaleParams: need 0 < tau <= h");
  require(alpha > 1.0 / (p_exp - 1.0) && alpha < 1.0,
          "ScaleParams: alpha must lie in (1/(p-1), 1)");
  const double ratio = h / tau;
  require(std::abs(ratio - std::round(ratio)) < 1e-9 * ratio,
          "ScaleParams: h/tau must be an integer");
}

int ScaleParams::steps_per_block() const {
  return static_cast<int>(std::llround(h / tau));
}

double elastic_density(const Mat& f, const ElasticParams& par) {
  const double j = f.determinant();
  if (j <= 0.0) return kInf;
  const int d = static_cast<int>(f.rows());
  const Mat e2 = f.transpose() * f - Mat::Identity(d, d);
  return 0.25 * par.mu * e2.squaredNorm() + vol_value(j, par);
}

Mat elastic_stress(const Mat& f, const ElasticParams& par) {
  const double j = f.determinant();
  if (j <= 0.0) throw std::domain_error("elastic_stress: det F <= 0");
  const int d = static_cast<int>(f.rows());
  const Mat e2 = f.transpose() * f - Mat::Identity(d, d);
  return par.mu * f * e2 + vol_d1(j, par) * cofactor(f);
}

Mat elastic_stress_tangent(const Mat& f, const Mat& h, const ElasticParams& par) {
  const double j = f.determinant();
  if (j <= 0.0) throw std::domain_error("elastic_stress_tangent: det F <= 0");
  const int d = static_cast<int>(f.rows());
  const Mat e2 = f.transpose() * f - Mat::Identity(d, d);
  const Mat cof = cofactor(f);
  Mat out = par.mu * (h * e2 + f * (h.transpose() * f + f.transpose() * h));
  out += vol_d2(j, par) * frobenius_dot(cof, h) * cof;
  out += vol_d1(j, par) * cofactor_derivative(f, h);
  return out;
}

double lambda_star(const ElasticParams& par) {
  return 2.0 * par.kappa + par.eps_det * par.s_exp * (par.s_exp + 1.0);
}

Tensor4 elastic_moduli(int d, const ElasticParams& par) {
  Tensor4 c(d);
  const double ls = lambda_star(par);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      for (int k = 0; k < d; ++k)
        for (int l = 0; l < d; ++l) {
          double v = 0.0;
          if (i == k && j == l) v += par.mu;
          if (i == l && j == k) v += par.mu;
          if (i == j && k == l) v += ls;
          c(i, j, k, l) = v;
        }
  return c;
}

Mat elastic_moduli_apply(const Mat& m, const ElasticParams& par) {
  const int d = static_cast<int>(m.rows());
  return 2.0 * par.mu * sym(m) + lambda_star(par) * m.trace() * Mat::Identity(d, d);
}

double second_grade_density(const Tensor3& g, const ElasticParams& par) {
  return par.c_P * std::pow(g.squared_norm(), 0.5 * par.p_exp);
}

Tensor3 hyperstress(const Tensor3& g, const ElasticParams& par) {
  const double n2 = g.squared_norm();
  if (n2 == 0.0) return Tensor3(g.d);
  return (par.c_P * par.p_exp * std::pow(n2, 0.5 * (par.p_exp - 2.0))) * g;
}

Tensor3 hyperstress_tangent(const Tensor3& g, const Tensor3& h, const ElasticParams& par) {
  const double n2 = g.squared_norm();
  if (n2 == 0.0) return Tensor3(g.d);  // p > 2 in all supported configurations
  const double p = par.p_exp;
  Tensor3 out = (par.c_P * p * (p - 2.0) * std::pow(n2, 0.5 * p - 2.0) * g.dot(h)) * g;
  out += (par.c_P * p * std::pow(n2, 0.5 * (p - 2.0))) * h;
  return out;
}

double viscosity_modulation(const Mat& c, const ViscosityTensor& visc) {
  if (visc.theta == 0.0) return 1.0;
  const int d = static_cast<int>(c.rows());
  const double z = (c - Mat::Identity(d, d)).squaredNorm();
  return 1.0 + visc.theta * z / (1.0 + z);
}

Mat viscosity_apply_constant(const Mat& e, const ViscosityTensor& visc) {
  const int d = static_cast<int>(e.rows());
  return 2.0 * visc.eta * e + visc.lambda_v * e.trace() * Mat::Identity(d, d);
}

Mat viscosity_apply(const Mat& c, const Mat& e, const ViscosityTensor& visc) {
  return viscosity_modulation(c, visc) * viscosity_apply_constant(e, visc);
}

double dissipation_density(const Mat& f, const Mat& fdot, const ViscosityTensor& visc) {
  const Mat c = f.transpose() * f;
  const Mat edot = sym(f.transpose() * fdot);
  return 0.5 * frobenius_dot(edot, viscosity_apply(c, edot, visc));
}

Mat viscous_stress(const Mat& f, const Mat& fdot, const ViscosityTensor& visc) {
  const Mat c = f.transpose() * f;
  const Mat edot = sym(f.transpose() * fdot);
  return f * viscosity_apply(c, edot, visc);
}

Mat viscous_stress_tangent(const Mat& f, const Mat& h, const ViscosityTensor& visc) {
  const Mat c = f.transpose() * f;
  return f * viscosity_apply(c, sym(f.transpose() * h), visc);
}

double energy_linearization_residual(double delta, const Mat& gu, const Mat& gphi,
                                     const ElasticParams& par) {
  const int d = static_cast<int>(gu.rows());
  const Mat f = Mat::Identity(d, d) + delta * gu;
  if (f.determinant() <= 0.0)
    throw std::domain_error("energy_linearization_residual: det(Id + delta gu) <= 0");
  const Mat scaled = elastic_stress(f, par) / delta;
  return std::abs(frobenius_dot(scaled - elastic_moduli_apply(gu, par), gphi));
}

double dissipation_linearization_residual(double delta, const Mat& gu, const Mat& gv,
                                          const Mat& gphi, const ViscosityTensor& visc) {
  const int d = static_cast<int>(gu.rows());
  const Mat f = Mat::Identity(d, d) + delta * gu;
  const Mat scaled = viscous_stress(f, delta * gv, visc) / delta;
  const double lin = frobenius_dot(viscosity_apply_constant(sym(gv), visc), sym(gphi));
  return std::abs(frobenius_dot(scaled, gphi) - lin);
}

}  // namespace viscoflow
