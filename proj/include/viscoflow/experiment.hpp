#pragma once

#include "viscoflow/diagnostics.hpp"
#include "viscoflow/solver.hpp"

#include <optional>
#include <string>

namespace viscoflow {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Closed-form initial-data family: separable trigonometric bumps vanishing
/// on the boundary, or zero.
struct FamilySpec {
  std::string family = "zero";
  double amplitude = 0.0;
};

struct ForceConfig {
  FamilySpec profile;
  std::string modulation = "constant";  // "constant" | "cosine"
  double omega = 0.0;
};

struct RunConfig {
  int dimension = 2;
  int grid_n = 17;
  Material material;
  ScaleParams scales;  // h and tau are kept in sync with `time`
  TwoScaleConfig time;
  FamilySpec initial_displacement;
  FamilySpec initial_velocity;
  ForceConfig force;
  NewtonConfig solver;
  bool linear = false;
  bool degiorgi = false;
  int sigma_points = 8;

  void validate() const;
};

/// Parses and schema-validates a config. Throws ConfigError; JSON syntax
/// errors carry line and column information.
RunConfig parse_config(const std::string& json_text);
RunConfig load_config(const std::string& path);
std::string dump_config(const RunConfig& cfg);  // round-trips through parse_config

/// Nodal samples of a named closed-form family (zero on the boundary).
Field make_family(std::shared_ptr<const Grid> grid, const FamilySpec& spec);
ForceSpec make_force(std::shared_ptr<const Grid> grid, const ForceConfig& cfg);

struct RunResult {
  RunConfig config;
  TrajectoryRecord record;
  std::vector<FenchelEntry> fenchel;  // per completed step
};

/// Builds the grid and data (applying the delta scaling of forces and initial
/// data in the nonlinear case) and runs the trajectory. Fills the Fenchel
/// ledger on completed steps. Never throws on solver failure; the record
/// carries it.
RunResult execute_run(const RunConfig& cfg);

struct SweepResult {
  SweepKind kind = SweepKind::delta;
  std::vector<SweepLevel> levels;
  std::vector<TrajectoryRecord> records;
  std::optional<TrajectoryRecord> reference;  // linear reference run
  std::vector<double> error_params;           // parameters the errors attach to
  std::vector<double> errors;
  std::optional<RateReport> rates;  // present when at least three error levels exist
};

SweepKind parse_sweep_kind(const std::string& name);  // throws ConfigError
std::string sweep_kind_name(SweepKind kind);

/// Runs a geometric refinement sweep from the base config:
///  - tau, h: pairwise Cauchy differences of consecutive levels at shared times,
///  - delta:  error against the matching linear run at final time,
///  - diagonal: error against a fine-tau linear reference at final time.
SweepResult execute_sweep(const RunConfig& base, SweepKind kind, int levels);

}  // namespace viscoflow
