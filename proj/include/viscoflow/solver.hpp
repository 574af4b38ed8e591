#pragma once

#include "viscoflow/functionals.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace viscoflow {

struct NewtonConfig {
  double grad_tol = 1e-10;      // relative to the first-iterate gradient norm
  double grad_tol_abs = 1e-12;  // absolute floor
  int max_iters = 100;
  double backtrack = 0.5;
  double armijo = 1e-4;
  double det_floor = 1e-8;
  int max_backtracks = 60;

  void validate() const;
};

enum class StepStatus { converged, non_convergence, degenerate_step };

struct StepDiagnostics {
  StepStatus status = StepStatus::converged;
  int iterations = 0;
  int backtracks = 0;
  double initial_grad_norm = 0.0;
  double grad_norm = 0.0;
  double cost_initial = 0.0;
  double cost_final = 0.0;
};

struct StepResult {
  Field state;
  StepDiagnostics diag;
};

struct SolverError : std::runtime_error {
  SolverError(StepStatus st, int step, const std::string& msg)
      : std::runtime_error(msg), status(st), step_index(step) {}
  StepStatus status;
  int step_index;
};

/// Damped Newton with Armijo backtracking on interior unknowns. Line search
/// rejects iterates whose orientation margin drops below det_floor or whose
/// cost is not finite.
StepResult minimize_cost(const StepCost& cost, const NewtonConfig& cfg, const Field& guess);

/// One nonlinear incremental minimization from the frozen step data.
StepResult minimize_step(const StepSetup& setup, const NewtonConfig& cfg, const Field& guess);

/// Direct solve of the linearized step (SPD stationarity system).
Field linear_step(const StepSetup& setup);

// --- DeGiorgi interpolants ----------------------------------------------------

struct DeGiorgiSample {
  double sigma = 0.0;
  double weight = 0.0;      // quadrature weight of this sample on (0, tau]
  Field state;              // minimizer of the sigma-interpolated cost
  double kinetic_term = 0.0;  // rho/(2 h delta^2) || (y_sigma - y_prev)/sigma ||^2
  double dual_term = 0.0;     // R*_delta at the recovered stationarity functional
  double value = 0.0;         // interpolated cost at its minimizer
};

struct DeGiorgiResult {
  std::vector<DeGiorgiSample> samples;  // ascending in sigma
  double interp_kinetic = 0.0;          // integral over (0, tau] of the kinetic term
  double interp_dual = 0.0;             // integral over (0, tau] of the dual term
};

/// Geometric grid {tau 2^{-j} : j = 0..points-1}, ascending.
std::vector<double> default_sigma_grid(double tau, int points = 8);

/// Minimizes the sigma-interpolated cost at each grid value and integrates
/// the interpolant terms of the refined energy inequality by a midpoint-type
/// rule whose cells are the Voronoi intervals of the sigma grid in (0, tau].
DeGiorgiResult degiorgi_interpolant(const StepSetup& setup, const std::vector<double>& sigma_grid,
                                    const NewtonConfig& cfg);

// --- trajectories ---------------------------------------------------------------

struct TwoScaleConfig {
  double T = 0.1;
  double h = 0.1;
  double tau = 0.025;

  void validate() const;
  int blocks() const;
  int steps_per_block() const;
  int total_steps() const { return blocks() * steps_per_block(); }
};

struct StepLedger {
  int step = 0;  // 1-based global index
  EnergyBreakdown breakdown;
  double energy = 0.0;          // scaled energy of the accepted state
  double rhs_simplified = 0.0;  // right-hand side of the simplified inequality
  double slack_simplified = 0.0;
  double interp_kinetic = 0.0;  // refined-ineq interpolant terms (if computed)
  double interp_dual = 0.0;
  double slack_refined = 0.0;
  bool refined_available = false;
  double w_lumped_norm2 = 0.0;  // ||w_k||^2 in the lumped inner product
  double v_lumped_norm2 = 0.0;  // ||v_k||^2 in the lumped inner product
  double min_det = 0.0;
  double grad_norm = 0.0;
  int newton_iters = 0;
};

struct RunFailure {
  int step = 0;  // 1-based global index of the failing step
  StepStatus status = StepStatus::non_convergence;
  std::string message;
};

struct TrajectoryRecord {
  bool linear = false;
  TwoScaleConfig time;
  ScaleParams scales;
  Material material;
  std::vector<Field> states;  // states[0] = initial, size total_steps()+1
  std::vector<Field> w_seq;   // per step, size total_steps()
  std::vector<Field> f_seq;   // per step, size total_steps()
  std::vector<StepLedger> ledger;
  std::optional<RunFailure> failure;  // set only when keep_partial is active

  const Field& state_at_step(int k) const { return states.at(k); }
  Field interpolant(double t) const;  // piecewise-affine in time
  Field increment(int k) const;       // (y_k - y_{k-1}) / tau
};

struct RunOptions {
  bool linear = false;
  bool degiorgi = false;
  int sigma_points = 8;
  bool keep_partial = false;  // record failures instead of throwing
  NewtonConfig newton;
};

/// Averaged discretization of the delayed velocity: the first block replays
/// v0; later blocks replay the previous block's increments.
std::vector<Field> delayed_velocity_sequence(const std::vector<Field>& states_so_far,
                                             const Field& v0, double tau, int steps_per_block,
                                             int block_index);

/// Iterates incremental minimizations for one block of N steps, with explicit
/// per-step data. Throws SolverError with the failing step index.
TrajectoryRecord run_block(const Field& initial, const std::vector<Field>& w_seq,
                           const std::vector<Field>& f_seq, const ScaleParams& scales,
                           const Material& mat, const RunOptions& opts);

/// Time-sampled closed-form force: profile * modulation(t), with exact
/// interval averages.
struct ForceSpec {
  Field profile;
  enum class Modulation { constant, cosine } modulation = Modulation::constant;
  double omega = 0.0;

  Field interval_average(double t0, double t1) const;
};

/// Glues blocks of length h into a trajectory on [0, T]. Forces are
/// interval-averaged; the delayed velocity sequence of each block is built
/// from the previous block (or v0 on the first block).
TrajectoryRecord run_two_scale(const TwoScaleConfig& cfg, const Field& y0, const Field& v0,
                               const ForceSpec& force, const ScaleParams& scales,
                               const Material& mat, const RunOptions& opts);

enum class SweepKind { tau, h, delta, diagonal };

struct SweepLevel {
  double parameter = 0.0;  // the refined parameter at this level
  TwoScaleConfig time;
  ScaleParams scales;
};

std::vector<SweepLevel> sweep_levels(SweepKind kind, const TwoScaleConfig& base,
                                     const ScaleParams& scales, int levels);

/// Runs every level of a geometric refinement sweep.
std::vector<TrajectoryRecord> refine_sweep(SweepKind kind, const TwoScaleConfig& base,
                                           const Field& y0_profile, const Field& v0_profile,
                                           const ForceSpec& force_profile,
                                           const ScaleParams& scales, const Material& mat,
                                           const RunOptions& opts, int levels);

/// Comparison times shared by all levels: multiples of the coarsest tau.
std::vector<double> comparison_times(const std::vector<TrajectoryRecord>& records);

}  // namespace viscoflow
