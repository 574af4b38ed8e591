#pragma once

#include <iosfwd>
#include <string>

namespace viscoflow::cli {

inline constexpr const char* kVersion = "0.1.0";

// Exit codes: 0 success, 2 config/schema violation, 3 solver failure
// (partial outputs kept and flagged), 4 violated check.
int cmd_simulate(const std::string& config_path, const std::string& out_dir, std::ostream& log);
int cmd_sweep(const std::string& config_path, const std::string& param, int levels,
              const std::string& out_dir, std::ostream& log);
int cmd_check(const std::string& run_dir, double tol_scale, std::ostream& log);
int cmd_plot_data(const std::string& dir, const std::string& what, std::ostream& out,
                  std::ostream& log);

}  // namespace viscoflow::cli
