#pragma once

#include "viscoflow/solver.hpp"

#include <vector>

namespace viscoflow {

/// Least-squares convergence-order fit on geometric parameter levels.
struct RateReport {
  std::vector<double> parameters;   // strictly decreasing
  std::vector<double> errors;       // positive
  std::vector<double> pair_slopes;  // size m-1, log ratios of consecutive levels
  double fitted_slope = 0.0;        // least squares on log-log
};

RateReport observed_order(const std::vector<double>& errors,
                          const std::vector<double>& parameters);

/// Per-step slack of the simplified energy inequality, recomputed from the
/// persisted states (independent of the stored ledger values).
std::vector<double> energy_slack(const TrajectoryRecord& traj);

/// Recomputes breakdown rows from states; used by the check command.
std::vector<EnergyBreakdown> recompute_breakdowns(const TrajectoryRecord& traj);

/// Discrete-H1 distance between the rescaled nonlinear displacement
/// u_delta = delta^{-1}(y - id) and the linear solution at shared times.
std::vector<double> linearization_error(const TrajectoryRecord& nl, const TrajectoryRecord& lin,
                                        const std::vector<double>& times);

/// Rescaled displacement of a state: (y - id)/delta for nonlinear records,
/// the state itself for linear ones.
Field displacement_of(const TrajectoryRecord& rec, const Field& state);

/// Ratio ||grad v||^2_{L2} / (2 * integral of R(grad y, grad v)); the
/// generalized Korn quotient of one test field. Throws if v vanishes.
double korn_ratio(const Field& y, const Field& v, const ScaleParams& scales, const Material& mat);

/// Extremal Korn constant sup_v over zero-boundary fields, via the smallest
/// generalized eigenvalue of the dissipation form against the gradient Gram
/// form (dense solve; refined by Rayleigh-quotient iteration).
struct KornConstant {
  double constant = 0.0;         // sup of korn_ratio
  double eigen_min = 0.0;        // smallest generalized eigenvalue
  double power_iter_value = 0.0; // cross-check from inverse power iterations
};
KornConstant korn_constant(const Field& y, const ScaleParams& scales, const Material& mat);

struct RigidityReport {
  double u_h1 = 0.0;
  double delta_grad_inf = 0.0;
  double min_det = 0.0;
  double dist_so_l2 = 0.0;
};
RigidityReport rigidity_report(const Field& y, const ScaleParams& scales);

/// Per-step Fenchel-Young residual along a trajectory. xi_k is recovered from
/// the step's stationarity system, so the residual measures the solver's
/// achievement of the equality case.
struct FenchelEntry {
  double pairing = 0.0;   // <xi_k, v_k>
  double residual = 0.0;  // R + R* - <xi, v>
};
std::vector<FenchelEntry> fenchel_residuals(const TrajectoryRecord& traj);

/// Residual with the increment replaced by an explicit perturbation of v_k.
FenchelEntry fenchel_residual_perturbed(const TrajectoryRecord& traj, int step,
                                        const Field& v_perturbed);

/// Gap between the scaled functionals at id + delta u and their linearized
/// limits, per delta level, with fitted orders.
struct GammaProbe {
  RateReport energy_gap;
  RateReport second_grade_gap;  // the isolated second-gradient contribution
  RateReport dissipation_gap;
};
GammaProbe gamma_probe(const Field& u, const Field& v, const std::vector<double>& deltas,
                       const ScaleParams& scales, const Material& mat);

/// Cumulative refined slack at each block boundary: the discrete shadow of
/// the time-delayed energy inequality. Requires the refined ledger. Also
/// verifies the exact telescoping of the delayed-velocity terms against the
/// first-block datum w_1.
struct TdShadow {
  std::vector<double> block_slack;       // per block boundary
  double telescoping_identity = 0.0;     // should vanish identically
};
TdShadow td_shadow(const TrajectoryRecord& traj);

}  // namespace viscoflow
