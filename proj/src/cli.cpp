#include "viscoflow/cli.hpp"

#include "viscoflow/experiment.hpp"
#include "viscoflow/io.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace viscoflow::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kTolSimplified = 1e-9;
constexpr double kTolRefined = 1e-6;
constexpr double kTolFenchel = 1e-8;

double now_seconds() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

std::string hex64(std::uint64_t v) {
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << v;
  return out.str();
}

struct Check {
  std::string name;
  bool pass = true;
  double tolerance = 0.0;
  double worst = 0.0;
  int worst_step = 0;
};

json check_json(const Check& c) {
  return json{{"name", c.name},
              {"pass", c.pass},
              {"tolerance", c.tolerance},
              {"worst_value", c.worst},
              {"worst_step", c.worst_step}};
}

std::vector<Check> run_checks(const TrajectoryRecord& rec,
                              const std::vector<FenchelEntry>& fenchel) {
  std::vector<Check> checks;

  Check simp{"simplified_energy_inequality", true, kTolSimplified, 0.0, 0};
  Check refined{"refined_energy_inequality", true, kTolRefined, 0.0, 0};
  bool any_refined = false;
  Check orient{"orientation_preserved", true, 0.0, 1.0, 0};
  Check fen{"fenchel_young_equality", true, kTolFenchel, 0.0, 0};

  for (std::size_t i = 0; i < rec.ledger.size(); ++i) {
    const StepLedger& led = rec.ledger[i];
    const double scale = 1.0 + std::abs(led.rhs_simplified);
    const double margin_simp = led.slack_simplified / scale;
    if (i == 0 || margin_simp < simp.worst) {
      simp.worst = margin_simp;
      simp.worst_step = led.step;
    }
    if (led.refined_available) {
      any_refined = true;
      const double margin_ref = led.slack_refined / scale;
      if (refined.worst_step == 0 || margin_ref < refined.worst) {
        refined.worst = margin_ref;
        refined.worst_step = led.step;
      }
    }
    if (!rec.linear && (orient.worst_step == 0 || led.min_det < orient.worst)) {
      orient.worst = led.min_det;
      orient.worst_step = led.step;
    }
    if (i < fenchel.size()) {
      const double fr = fenchel[i].residual / (1.0 + std::abs(fenchel[i].pairing));
      if (i == 0 || fr > fen.worst) {
        fen.worst = fr;
        fen.worst_step = led.step;
      }
    }
  }
  simp.pass = simp.worst >= -kTolSimplified;
  checks.push_back(simp);
  if (any_refined) {
    refined.pass = refined.worst >= -kTolRefined;
    checks.push_back(refined);
  }
  if (!rec.linear) {
    orient.pass = orient.worst > 0.0;
    checks.push_back(orient);
  }
  fen.pass = fen.worst <= kTolFenchel;
  checks.push_back(fen);

  Check conv{"all_steps_converged", !rec.failure.has_value(), 0.0, 0.0,
             rec.failure ? rec.failure->step : 0};
  checks.push_back(conv);
  return checks;
}

void write_run_outputs(const fs::path& dir, const RunConfig& cfg, const TrajectoryRecord& rec,
                       const std::vector<FenchelEntry>& fenchel, double solve_seconds) {
  fs::create_directories(dir);
  const double t_diag0 = now_seconds();
  const std::vector<Check> checks = run_checks(rec, fenchel);
  const double t_io0 = now_seconds();

  io::write_text_atomic((dir / "ledger.csv").string(), io::ledger_csv(rec));
  io::write_text_atomic((dir / "diagnostics.csv").string(), io::diagnostics_csv(rec, fenchel));
  io::write_states_bin((dir / "states.bin").string(), rec);

  json summary;
  summary["checks"] = json::array();
  for (const Check& c : checks) summary["checks"].push_back(check_json(c));
  bool all_pass = true;
  for (const Check& c : checks) all_pass = all_pass && c.pass;
  summary["all_pass"] = all_pass;
  io::write_text_atomic((dir / "summary.json").string(), summary.dump(2) + "\n");

  json manifest;
  manifest["version"] = kVersion;
  manifest["status"] = rec.failure ? "nonconvergence" : "ok";
  if (rec.failure)
    manifest["failure"] = {{"step", rec.failure->step}, {"message", rec.failure->message}};
  manifest["config"] = json::parse(dump_config(cfg));
  manifest["checks"] = summary["checks"];
  manifest["steps_completed"] = rec.ledger.size();
  manifest["timings_s"] = {{"solve", solve_seconds},
                           {"diagnostics", t_io0 - t_diag0},
                           {"io", now_seconds() - t_io0}};
  json files = json::array();
  for (const char* name : {"ledger.csv", "diagnostics.csv", "states.bin", "summary.json"}) {
    const fs::path p = dir / name;
    files.push_back({{"name", name},
                     {"bytes", fs::file_size(p)},
                     {"fnv64", hex64(io::fnv64_file(p.string()))}});
  }
  manifest["files"] = files;
  io::write_text_atomic((dir / "manifest.json").string(), manifest.dump(2) + "\n");
}

}  // namespace

int cmd_simulate(const std::string& config_path, const std::string& out_dir, std::ostream& log) {
  RunConfig cfg;
  try {
    cfg = load_config(config_path);
  } catch (const ConfigError& err) {
    log << err.what() << "\n";
    return 2;
  }
  const fs::path dir =
      out_dir.empty() ? fs::path(config_path).stem().concat("-run") : fs::path(out_dir);

  const double t0 = now_seconds();
  RunResult result;
  try {
    result = execute_run(cfg);
  } catch (const std::exception& err) {
    log << "simulate: " << err.what() << "\n";
    return 3;
  }
  const double solve_seconds = now_seconds() - t0;
  write_run_outputs(dir, cfg, result.record, result.fenchel, solve_seconds);
  log << "run written to " << dir.string() << "\n";
  if (result.record.failure) {
    log << "solver failed at step " << result.record.failure->step << ": "
        << result.record.failure->message << " (partial outputs kept)\n";
    return 3;
  }
  return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& param, int levels,
              const std::string& out_dir, std::ostream& log) {
  RunConfig cfg;
  SweepKind kind;
  try {
    cfg = load_config(config_path);
    kind = parse_sweep_kind(param);
    if (levels < 1) throw ConfigError("sweep: --levels must be at least 1");
  } catch (const ConfigError& err) {
    log << err.what() << "\n";
    return 2;
  }
  const fs::path dir = out_dir.empty()
                           ? fs::path(config_path).stem().concat("-sweep-" + param)
                           : fs::path(out_dir);

  const double t0 = now_seconds();
  SweepResult sweep;
  try {
    sweep = execute_sweep(cfg, kind, levels);
  } catch (const SolverError& err) {
    log << "sweep: solver failure at step " << err.step_index << ": " << err.what() << "\n";
    return 3;
  } catch (const ConfigError& err) {
    log << err.what() << "\n";
    return 2;
  }
  const double solve_seconds = now_seconds() - t0;

  fs::create_directories(dir);
  for (std::size_t l = 0; l < sweep.records.size(); ++l) {
    std::ostringstream name;
    name << "level_" << std::setw(2) << std::setfill('0') << l;
    RunConfig level_cfg = cfg;
    level_cfg.linear = false;
    level_cfg.time = sweep.levels[l].time;
    level_cfg.scales = sweep.levels[l].scales;
    TrajectoryRecord rec = sweep.records[l];
    write_run_outputs(dir / name.str(), level_cfg, rec, fenchel_residuals(rec), 0.0);
  }
  if (sweep.reference) {
    RunConfig ref_cfg = cfg;
    ref_cfg.linear = true;
    ref_cfg.time = sweep.reference->time;
    ref_cfg.scales = sweep.reference->scales;
    write_run_outputs(dir / "reference", ref_cfg, *sweep.reference,
                      fenchel_residuals(*sweep.reference), 0.0);
  }

  io::write_text_atomic((dir / "errors.csv").string(),
                        io::errors_csv(sweep.error_params, sweep.errors));
  io::write_text_atomic(
      (dir / "rates.csv").string(),
      io::rates_csv(sweep.error_params, sweep.errors,
                    sweep.rates ? &*sweep.rates : nullptr));

  json manifest;
  manifest["version"] = kVersion;
  manifest["kind"] = sweep_kind_name(kind);
  manifest["levels"] = levels;
  manifest["config"] = json::parse(dump_config(cfg));
  manifest["timings_s"] = {{"solve", solve_seconds}};
  if (sweep.rates) manifest["fitted_slope"] = sweep.rates->fitted_slope;
  io::write_text_atomic((dir / "manifest.json").string(), manifest.dump(2) + "\n");
  log << "sweep written to " << dir.string() << "\n";
  return 0;
}

namespace {

struct CheckContext {
  double tol_scale = 1.0;
  std::ostream* log = nullptr;
  int failures = 0;

  void fail(int step, const std::string& what) {
    ++failures;
    (*log) << "check failed at step " << step << ": " << what << "\n";
  }
};

bool close(double a, double b, double tol) {
  return std::abs(a - b) <= tol * (1.0 + std::max(std::abs(a), std::abs(b)));
}

}  // namespace

int cmd_check(const std::string& run_dir, double tol_scale, std::ostream& log) {
  const fs::path dir(run_dir);
  RunConfig cfg;
  json manifest;
  try {
    manifest = json::parse(io::read_text((dir / "manifest.json").string()));
    cfg = parse_config(manifest["config"].dump());
  } catch (const std::exception& err) {
    log << "check: cannot load manifest: " << err.what() << "\n";
    return 2;
  }

  CheckContext ctx;
  ctx.tol_scale = tol_scale;
  ctx.log = &log;
  try {
    auto grid = std::make_shared<const Grid>(cfg.dimension, cfg.grid_n);
    const std::vector<Field> states = io::read_states_bin((dir / "states.bin").string(), grid);
    if (states.empty()) {
      log << "check: no states found\n";
      return 4;
    }

    // Rebuild the per-step data exactly as the run constructed it.
    TrajectoryRecord rec;
    rec.linear = cfg.linear;
    rec.time = cfg.time;
    rec.scales = cfg.scales;
    rec.material = cfg.material;
    rec.states = states;
    Field v0 = make_family(grid, cfg.initial_velocity);
    ForceSpec force = make_force(grid, cfg.force);
    if (!cfg.linear) {
      v0.data *= cfg.scales.delta;
      force.profile.data *= cfg.scales.delta;
    }
    const int n = cfg.time.steps_per_block();
    const int completed = static_cast<int>(states.size()) - 1;
    for (int k = 1; k <= completed; ++k) {
      const int block = (k - 1) / n;
      const std::vector<Field> w_block =
          delayed_velocity_sequence(rec.states, v0, cfg.time.tau, n, block);
      rec.w_seq.push_back(w_block[(k - 1) % n]);
      rec.f_seq.push_back(force.interval_average((k - 1) * cfg.time.tau, k * cfg.time.tau));
      StepLedger led;
      led.step = k;
      rec.ledger.push_back(led);
    }

    const std::vector<EnergyBreakdown> rows = recompute_breakdowns(rec);
    const std::vector<double> slack = energy_slack(rec);

    const io::CsvTable ledger = io::parse_csv(io::read_text((dir / "ledger.csv").string()));
    if (static_cast<int>(ledger.rows.size()) != completed) {
      log << "check: ledger has " << ledger.rows.size() << " rows, expected " << completed
          << "\n";
      return 4;
    }
    for (int k = 1; k <= completed; ++k) {
      const auto& row = ledger.rows[k - 1];
      const EnergyBreakdown& b = rows[k - 1];
      const double stored[7] = {row[0], row[1], row[2], row[3], row[4], row[5], row[6]};
      const double fresh[7] = {static_cast<double>(k), b.elastic_W, b.second_grade_P,
                               b.dissipation_R, b.inertial, b.force_work, b.total};
      for (int c = 0; c < 7; ++c)
        if (!close(stored[c], fresh[c], 1e-9 * tol_scale)) {
          ctx.fail(k, "ledger column '" + ledger.columns[c] + "' does not match recomputation");
          break;
        }
    }

    const io::CsvTable diag = io::parse_csv(io::read_text((dir / "diagnostics.csv").string()));
    auto col = [&](const std::string& name) -> int {
      for (std::size_t i = 0; i < diag.columns.size(); ++i)
        if (diag.columns[i] == name) return static_cast<int>(i);
      throw std::runtime_error("diagnostics.csv lacks column " + name);
    };
    const int c_rhs = col("rhs_simplified");
    const int c_refined = col("slack_refined");
    const int c_kin = col("interp_kinetic");
    const int c_dual = col("interp_dual");

    const std::vector<FenchelEntry> fenchel = fenchel_residuals(rec);
    for (int k = 1; k <= completed; ++k) {
      const double rhs = diag.rows[k - 1][c_rhs];
      const double scale = 1.0 + std::abs(rhs);
      if (slack[k - 1] < -kTolSimplified * scale * tol_scale)
        ctx.fail(k, "simplified energy inequality violated (slack " +
                        io::format_double(slack[k - 1]) + ")");
      const double stored_refined = diag.rows[k - 1][c_refined];
      if (std::isfinite(stored_refined)) {
        const double fresh_refined =
            slack[k - 1] - diag.rows[k - 1][c_kin] - diag.rows[k - 1][c_dual];
        if (!close(stored_refined, fresh_refined, 1e-9 * tol_scale))
          ctx.fail(k, "stored refined slack inconsistent with its parts");
        if (stored_refined < -kTolRefined * scale * tol_scale)
          ctx.fail(k, "refined energy inequality violated (slack " +
                          io::format_double(stored_refined) + ")");
      }
      const double fr = fenchel[k - 1].residual;
      if (fr > kTolFenchel * (1.0 + std::abs(fenchel[k - 1].pairing)) * tol_scale)
        ctx.fail(k, "Fenchel-Young residual above tolerance (" + io::format_double(fr) + ")");
      if (!cfg.linear && min_det(rec.states[k]) <= 0.0)
        ctx.fail(k, "orientation violated");
    }
  } catch (const std::exception& err) {
    log << "check: " << err.what() << "\n";
    return 4;
  }

  if (ctx.failures > 0) return 4;
  log << "check passed\n";
  return 0;
}

int cmd_plot_data(const std::string& dir, const std::string& what, std::ostream& out,
                  std::ostream& log) {
  const fs::path base(dir);
  std::string file;
  if (what == "energy") {
    file = "ledger.csv";
  } else if (what == "rates") {
    file = "rates.csv";
  } else if (what == "errors") {
    file = fs::exists(base / "diagnostics.csv") ? "diagnostics.csv" : "errors.csv";
  } else {
    log << "plot-data: unknown --what '" << what << "' (use energy|rates|errors)\n";
    return 2;
  }
  try {
    out << io::read_text((base / file).string());
  } catch (const std::exception& err) {
    log << "plot-data: " << err.what() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace viscoflow::cli
