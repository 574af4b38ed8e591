#pragma once

#include "viscoflow/grid.hpp"
#include "viscoflow/material.hpp"

#include <Eigen/Sparse>

#include <memory>

namespace viscoflow {

/// Frozen data of one incremental minimization: previous state, delayed
/// velocity datum, force datum, and all parameters. For the linearized
/// problem the same record is read with y_prev as u_prev and the force/datum
/// fields unscaled.
struct StepSetup {
  Field y_prev;
  Field w;
  Field f;
  ScaleParams scales;
  Material material;

  StepSetup with_timestep(double sigma) const {
    StepSetup s = *this;
    s.scales.tau = sigma;
    return s;
  }
};

struct EnergyBreakdown {
  double elastic_W = 0.0;
  double second_grade_P = 0.0;
  double dissipation_R = 0.0;
  double inertial = 0.0;
  double force_work = 0.0;
  double total = 0.0;  // elastic + P + dissipation + inertial - force_work
};

// --- integral functionals ---------------------------------------------------

/// Scaled total energy: delta^{-2} int W(grad y) + delta^{-alpha p} int P(hess y).
/// Returns +infinity iff the orientation constraint fails on some cell.
double scaled_energy(const Field& y, const ScaleParams& scales, const Material& mat);

/// Elastic part only (without the second-gradient term), same scaling.
double scaled_energy_elastic(const Field& y, const ScaleParams& scales, const Material& mat);
double scaled_energy_second_grade(const Field& y, const ScaleParams& scales, const Material& mat);

/// Linearized energy 1/2 int e(u) : C e(u).
double linearized_energy(const Field& u, const Material& mat);

/// Scaled dissipation delta^{-2} int R(grad y, grad v).
double scaled_dissipation(const Field& y, const Field& v, const ScaleParams& scales,
                          const Material& mat);

/// Linearized dissipation 1/2 int e(v) : D0 e(v).
double linearized_dissipation(const Field& v, const Material& mat);

/// Mass-lumped inner product over interior nodes: sum a.b dx^d.
double lumped_inner(const Field& a, const Field& b);
double lumped_norm2(const Field& a);

// --- incremental step costs -------------------------------------------------

/// Common interface of the two incremental costs for the Newton engine.
/// Gradients and Hessians are taken over interior degrees of freedom.
class StepCost {
 public:
  virtual ~StepCost() = default;
  virtual double value(const Field& state, EnergyBreakdown* bd = nullptr) const = 0;
  virtual Eigen::VectorXd gradient(const Field& state) const = 0;
  virtual Eigen::SparseMatrix<double> hessian(const Field& state) const = 0;
  /// Orientation margin of a candidate state; +infinity when no constraint.
  virtual double orientation_margin(const Field& state) const = 0;
  /// Magnitude proxy for the absolute rounding noise of one value(): the
  /// largest coefficient that multiplies order-one cancellation errors.
  virtual double rounding_scale() const { return 1.0; }
  virtual const Grid& grid() const = 0;
};

/// The nonlinear discrete cost of one inner step:
///   E_delta(y) + tau R_delta(y_prev, v) - tau delta^{-2} <f, v>
///   + tau rho/(2 h delta^2) |v - w|^2,   v = (y - y_prev)/tau.
class NonlinearStepCost final : public StepCost {
 public:
  explicit NonlinearStepCost(StepSetup setup);
  double value(const Field& state, EnergyBreakdown* bd = nullptr) const override;
  Eigen::VectorXd gradient(const Field& state) const override;
  Eigen::SparseMatrix<double> hessian(const Field& state) const override;
  double orientation_margin(const Field& state) const override;
  double rounding_scale() const override;
  const Grid& grid() const override { return *setup_.y_prev.grid; }
  const StepSetup& setup() const { return setup_; }

 private:
  StepSetup setup_;
};

/// The linearized discrete cost:
///   E_0(u) + tau/2 int e(v) : D0 e(v) - tau <f, v> + tau rho/(2h) |v - w|^2,
///   v = (u - u_prev)/tau.
class LinearStepCost final : public StepCost {
 public:
  explicit LinearStepCost(StepSetup setup);
  double value(const Field& state, EnergyBreakdown* bd = nullptr) const override;
  Eigen::VectorXd gradient(const Field& state) const override;
  Eigen::SparseMatrix<double> hessian(const Field& state) const override;
  double orientation_margin(const Field&) const override {
    return std::numeric_limits<double>::infinity();
  }
  const Grid& grid() const override { return *setup_.y_prev.grid; }
  const StepSetup& setup() const { return setup_; }

 private:
  StepSetup setup_;
};

// Free-function wrappers over the two step costs.
double cost_nonlinear(const Field& y, const StepSetup& setup, EnergyBreakdown* bd = nullptr);
double cost_linear(const Field& u, const StepSetup& setup, EnergyBreakdown* bd = nullptr);

/// Field-shaped gradient (interior unknowns, zero on the boundary).
Field grad_cost_nonlinear(const Field& y, const StepSetup& setup);
Field grad_cost_linear(const Field& u, const StepSetup& setup);

/// Hessian action on a direction field.
Field hess_action_nonlinear(const Field& y, const StepSetup& setup, const Field& direction);
Field hess_action_linear(const Field& u, const StepSetup& setup, const Field& direction);

// --- energy gradient pieces (used by diagnostics) ---------------------------

/// Interior gradient of the scaled energy alone (elastic + second-gradient).
Eigen::VectorXd scaled_energy_gradient(const Field& y, const ScaleParams& scales,
                                       const Material& mat);
Eigen::VectorXd linearized_energy_gradient(const Field& u, const Material& mat);

// --- dissipation quadratic form and its dual --------------------------------

/// Matrix A of the quadratic form v -> R_delta(y, v) = 1/2 v^T A v on interior
/// dofs. With unit_scale = true the delta^{-2} prefactor is dropped.
Eigen::SparseMatrix<double> dissipation_matrix(const Field& y, const ScaleParams& scales,
                                               const Material& mat, bool unit_scale = false);
Eigen::SparseMatrix<double> linearized_dissipation_matrix(const Grid& grid, const Material& mat);

/// Factorized dual of the dissipation form: R*(xi) = sup_v <xi,v> - R(v)
/// evaluated by solving the stationarity system of the concave problem.
class DualDissipation {
 public:
  DualDissipation(const Field& y, const ScaleParams& scales, const Material& mat);
  /// Linearized variant at a given grid (form 1/2 e(v):D0 e(v)).
  DualDissipation(const Grid& grid, const Material& mat);

  double evaluate(const Eigen::VectorXd& xi) const;
  Eigen::VectorXd maximizer(const Eigen::VectorXd& xi) const;
  const Eigen::SparseMatrix<double>& matrix() const { return a_; }

 private:
  void factorize();
  Eigen::SparseMatrix<double> a_;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt_;
};

/// One-shot evaluation; xi is a linear functional on interior dofs given in
/// the assembled-gradient representation.
double dual_dissipation(const Field& y, const Eigen::VectorXd& xi, const ScaleParams& scales,
                        const Material& mat);

/// Field-shaped datum: the functional v -> lumped_inner(xi, v).
double dual_dissipation(const Field& y, const Field& xi, const ScaleParams& scales,
                        const Material& mat);

}  // namespace viscoflow
