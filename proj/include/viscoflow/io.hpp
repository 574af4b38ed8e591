#pragma once

#include "viscoflow/experiment.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace viscoflow::io {

/// Full round-trip decimal formatting of a double ("%.17g").
std::string format_double(double v);

std::uint64_t fnv64(const std::string& bytes);
std::uint64_t fnv64_file(const std::string& path);

void write_text_atomic(const std::string& path, const std::string& content);
std::string read_text(const std::string& path);

/// ledger.csv with the fixed column schema
/// step,elastic_W,second_grade_P,dissipation_R,inertial,force_work,total.
std::string ledger_csv(const TrajectoryRecord& rec);

/// diagnostics.csv: per-step inequality and residual monitors.
std::string diagnostics_csv(const TrajectoryRecord& rec, const std::vector<FenchelEntry>& fenchel);

/// rates.csv: param,error,pair_slope,fitted_slope (pair_slope empty on the
/// last row).
std::string rates_csv(const std::vector<double>& params, const std::vector<double>& errors,
                      const RateReport* rates);

/// errors.csv of a sweep: level,param,error.
std::string errors_csv(const std::vector<double>& params, const std::vector<double>& errors);

// Binary state dump: file magic, then one record per field with a short
// header (d, n, role tag, sequence index) followed by the flat column-major
// payload.
enum class FieldRole : std::int32_t { deformation = 0, displacement = 1, velocity = 2, force = 3 };

void write_states_bin(const std::string& path, const TrajectoryRecord& rec);
std::vector<Field> read_states_bin(const std::string& path, std::shared_ptr<const Grid> grid);

/// Parses a CSV with a header row into column-major doubles (first column may
/// be integer-valued). Throws std::runtime_error on malformed input.
struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};
CsvTable parse_csv(const std::string& text);

}  // namespace viscoflow::io
