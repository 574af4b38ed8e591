#include "viscoflow/cli.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"viscoflow: two-timescale variational time stepping for Kelvin-Voigt "
               "viscoelastodynamics and its linearization limit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", viscoflow::cli::kVersion);

  std::string config_path, out_dir, run_dir, param, what;
  int levels = 1;
  double tol_scale = 1.0;

  CLI::App* simulate = app.add_subcommand("simulate", "run one trajectory from a JSON config");
  simulate->add_option("--config", config_path, "config file")->required();
  simulate->add_option("--out", out_dir, "output directory (default: <config stem>-run)");

  CLI::App* sweep = app.add_subcommand("sweep", "geometric refinement sweep");
  sweep->add_option("--config", config_path, "config file")->required();
  sweep->add_option("--param", param, "refined parameter: delta|tau|h|diagonal")->required();
  sweep->add_option("--levels", levels, "number of halving levels")->required();
  sweep->add_option("--out", out_dir, "output directory");

  CLI::App* check = app.add_subcommand("check", "re-run diagnostics on a persisted run");
  check->add_option("dir", run_dir, "run directory")->required();
  check->add_option("--tol-scale", tol_scale, "multiply all tolerances by this factor");

  CLI::App* plot = app.add_subcommand(
      "plot-data", "emit CSV streams of a run or sweep directory to stdout. Schemas: "
                   "energy -> step,elastic_W,second_grade_P,dissipation_R,inertial,force_work,"
                   "total; rates -> param,error,pair_slope,fitted_slope; errors -> per-step "
                   "diagnostics of a run or level,param,error of a sweep");
  plot->add_option("dir", run_dir, "run or sweep directory")->required();
  plot->add_option("--what", what, "energy|rates|errors")->required();

  CLI11_PARSE(app, argc, argv);

  if (simulate->parsed())
    return viscoflow::cli::cmd_simulate(config_path, out_dir, std::cerr);
  if (sweep->parsed())
    return viscoflow::cli::cmd_sweep(config_path, param, levels, out_dir, std::cerr);
  if (check->parsed()) return viscoflow::cli::cmd_check(run_dir, tol_scale, std::cerr);
  if (plot->parsed())
    return viscoflow::cli::cmd_plot_data(run_dir, what, std::cout, std::cerr);
  return 1;
}
