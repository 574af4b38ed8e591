#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "viscoflow/cli.hpp"
#include "viscoflow/experiment.hpp"
#include "viscoflow/io.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace viscoflow;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "viscoflow_cli_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string small_config_json(bool degiorgi = true) {
  std::ostringstream out;
  out << R"({
    "dimension": 2,
    "grid_n": 9,
    "time": { "T": 0.05, "h": 0.05, "tau": 0.0125 },
    "initial": {
      "displacement": { "family": "trig_bump", "amplitude": 0.1 },
      "velocity": { "family": "trig_bump", "amplitude": 1.0 }
    },
    "force": { "family": "trig_bump", "amplitude": 1.0,
               "modulation": "cosine", "omega": 3.0 },
    "experiment": "nonlinear",
    "ledger": { "degiorgi": )"
      << (degiorgi ? "true" : "false") << R"( }
  })";
  return out.str();
}

fs::path write_config(const fs::path& dir, const std::string& text) {
  const fs::path path = dir / "config.json";
  std::ofstream out(path);
  out << text;
  return path;
}

}  // namespace

TEST_CASE("config parsing: defaults, schema faults, round-trip") {
  const RunConfig defaults = parse_config("{}");
  CHECK(defaults.dimension == 2);
  CHECK(defaults.grid_n == 17);
  CHECK(defaults.material.elastic.s_exp == doctest::Approx(4.0));  // p d/(p-d)
  CHECK_FALSE(defaults.linear);

  CHECK_THROWS_AS((void)parse_config(R"({"grid": 5})"), ConfigError);
  CHECK_THROWS_AS((void)parse_config(R"({"grid_n": 2})"), ConfigError);
  CHECK_THROWS_AS((void)parse_config(R"({"time": {"T": 0.1, "h": 0.1, "tau": 0.03}})"),
                  ConfigError);
  CHECK_THROWS_AS((void)parse_config(R"({"initial": {"displacement": {"family": "what"}}})"),
                  ConfigError);
  CHECK_THROWS_AS((void)parse_config(R"({"experiment": "both"})"), ConfigError);

  // Syntax errors carry line and column information.
  try {
    (void)parse_config("{\n  \"grid_n\": 9,\n  oops\n}");
    CHECK(false);
  } catch (const ConfigError& err) {
    const std::string what = err.what();
    CHECK(what.find("line 3") != std::string::npos);
    CHECK(what.find("column") != std::string::npos);
  }

  const RunConfig cfg = parse_config(small_config_json());
  const RunConfig back = parse_config(dump_config(cfg));
  CHECK(back.grid_n == cfg.grid_n);
  CHECK(back.time.tau == cfg.time.tau);
  CHECK(back.force.omega == cfg.force.omega);
  CHECK(back.degiorgi == cfg.degiorgi);

  // The bundled configs parse.
  CHECK_NOTHROW((void)load_config(std::string(VISCOFLOW_SOURCE_DIR) +
                                  "/configs/linearization-d2.json"));
  CHECK_NOTHROW((void)load_config(std::string(VISCOFLOW_SOURCE_DIR) +
                                  "/configs/zero-data-d2.json"));
}

TEST_CASE("closed-form families vanish on the boundary and scale with amplitude") {
  const auto g = std::make_shared<const Grid>(2, 9);
  const Field f = make_family(g, FamilySpec{"trig_bump", 0.3});
  for (int node = 0; node < g->node_count(); ++node)
    if (g->is_boundary(node)) CHECK(f.value(node).norm() == 0.0);
  const Field f2 = make_family(g, FamilySpec{"trig_bump", 0.6});
  CHECK((f2.data - 2.0 * f.data).norm() < 1e-14);
  CHECK(make_family(g, FamilySpec{"zero", 1.0}).data.norm() == 0.0);
}

TEST_CASE("nonlinear runs apply the delta scaling of force and data") {
  RunConfig cfg = parse_config(small_config_json(false));
  const RunResult run = execute_run(cfg);
  REQUIRE_FALSE(run.record.failure.has_value());

  auto grid = run.record.states.front().grid;
  const Field profile = make_family(grid, cfg.force.profile);
  // First-step force datum: delta * profile * interval average of cos(3 t).
  const double t1 = cfg.time.tau;
  const double factor = (std::sin(3.0 * t1) - 0.0) / (3.0 * t1);
  const Field& f1 = run.record.f_seq.front();
  CHECK((f1.data - cfg.scales.delta * factor * profile.data).norm() < 1e-14);

  // First-block delayed datum is the scaled initial velocity.
  const Field v_profile = make_family(grid, cfg.initial_velocity);
  CHECK((run.record.w_seq.front().data - cfg.scales.delta * v_profile.data).norm() < 1e-14);
}

TEST_CASE("simulate, check and plot round-trip on a small run") {
  const fs::path dir = fresh_dir("roundtrip");
  const fs::path config = write_config(dir, small_config_json());
  std::ostringstream log;

  CHECK(cli::cmd_simulate(config.string(), (dir / "run").string(), log) == 0);
  for (const char* name :
       {"ledger.csv", "diagnostics.csv", "states.bin", "summary.json", "manifest.json"})
    CHECK(fs::exists(dir / "run" / name));

  CHECK(cli::cmd_check((dir / "run").string(), 1.0, log) == 0);

  std::ostringstream energy;
  CHECK(cli::cmd_plot_data((dir / "run").string(), "energy", energy, log) == 0);
  CHECK(energy.str() == io::read_text((dir / "run" / "ledger.csv").string()));
  std::ostringstream twice;
  CHECK(cli::cmd_plot_data((dir / "run").string(), "energy", twice, log) == 0);
  CHECK(twice.str() == energy.str());

  std::ostringstream sink;
  CHECK(cli::cmd_plot_data((dir / "run").string(), "nonsense", sink, log) == 2);
  CHECK(cli::cmd_plot_data((dir / "run").string(), "rates", sink, log) == 2);

  // The ledger CSV columns match the breakdown schema.
  const io::CsvTable ledger =
      io::parse_csv(io::read_text((dir / "run" / "ledger.csv").string()));
  const std::vector<std::string> expect{"step",       "elastic_W",  "second_grade_P",
                                        "dissipation_R", "inertial", "force_work",
                                        "total"};
  CHECK(ledger.columns == expect);
  CHECK(ledger.rows.size() == 4);
}

TEST_CASE("repeated runs are byte-identical") {
  const fs::path dir = fresh_dir("determinism");
  const fs::path config = write_config(dir, small_config_json());
  std::ostringstream log;
  CHECK(cli::cmd_simulate(config.string(), (dir / "a").string(), log) == 0);
  CHECK(cli::cmd_simulate(config.string(), (dir / "b").string(), log) == 0);
  CHECK(io::read_text((dir / "a" / "ledger.csv").string()) ==
        io::read_text((dir / "b" / "ledger.csv").string()));
  CHECK(io::read_text((dir / "a" / "states.bin").string()) ==
        io::read_text((dir / "b" / "states.bin").string()));
  CHECK(io::read_text((dir / "a" / "diagnostics.csv").string()) ==
        io::read_text((dir / "b" / "diagnostics.csv").string()));
}

TEST_CASE("malformed configs exit with code 2") {
  const fs::path dir = fresh_dir("badconfig");
  const fs::path config = write_config(dir, "{ this is not json");
  std::ostringstream log;
  CHECK(cli::cmd_simulate(config.string(), (dir / "run").string(), log) == 2);
  CHECK(log.str().find("line") != std::string::npos);
  CHECK(cli::cmd_sweep(config.string(), "tau", 2, (dir / "sweep").string(), log) == 2);

  const fs::path ok = write_config(dir, small_config_json());
  CHECK(cli::cmd_sweep(ok.string(), "banana", 2, (dir / "sweep").string(), log) == 2);
}

TEST_CASE("corrupted ledgers are detected and named") {
  const fs::path dir = fresh_dir("corrupt");
  const fs::path config = write_config(dir, small_config_json());
  std::ostringstream log;
  REQUIRE(cli::cmd_simulate(config.string(), (dir / "run").string(), log) == 0);

  // Tamper with the third data row of the ledger.
  const fs::path ledger = dir / "run" / "ledger.csv";
  std::string text = io::read_text(ledger.string());
  std::size_t pos = 0;
  for (int line = 0; line < 3; ++line) pos = text.find('\n', pos) + 1;
  const std::size_t comma = text.find(',', pos);
  text = text.substr(0, comma + 1) + "99.5" + text.substr(text.find(',', comma + 1));
  std::ofstream(ledger) << text;

  std::ostringstream check_log;
  CHECK(cli::cmd_check((dir / "run").string(), 1.0, check_log) == 4);
  CHECK(check_log.str().find("step 3") != std::string::npos);
}

TEST_CASE("tolerance override widens the ledger comparison") {
  const fs::path dir = fresh_dir("tolscale");
  const fs::path config = write_config(dir, small_config_json(false));
  std::ostringstream log;
  REQUIRE(cli::cmd_simulate(config.string(), (dir / "run").string(), log) == 0);

  // Nudge one ledger entry by a relative 1e-7: fails at the default
  // tolerance, passes when all tolerances are scaled up.
  const fs::path ledger = dir / "run" / "ledger.csv";
  io::CsvTable table = io::parse_csv(io::read_text(ledger.string()));
  std::ostringstream out;
  out << "step,elastic_W,second_grade_P,dissipation_R,inertial,force_work,total\n";
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    auto row = table.rows[r];
    if (r == 1) row[1] *= 1.0 + 1e-7;
    out << static_cast<int>(row[0]);
    for (int c = 1; c < 7; ++c) out << ',' << io::format_double(row[c]);
    out << '\n';
  }
  std::ofstream(ledger) << out.str();

  std::ostringstream sink;
  CHECK(cli::cmd_check((dir / "run").string(), 1.0, sink) == 4);
  CHECK(cli::cmd_check((dir / "run").string(), 1e4, sink) == 0);
}

TEST_CASE("sweep command writes levels, errors and rates") {
  const fs::path dir = fresh_dir("sweep");
  const fs::path config = write_config(dir, small_config_json(false));
  std::ostringstream log;
  REQUIRE(cli::cmd_sweep(config.string(), "tau", 3, (dir / "sweep").string(), log) == 0);
  CHECK(fs::exists(dir / "sweep" / "level_00" / "ledger.csv"));
  CHECK(fs::exists(dir / "sweep" / "level_02" / "ledger.csv"));
  CHECK(fs::exists(dir / "sweep" / "errors.csv"));
  CHECK(fs::exists(dir / "sweep" / "rates.csv"));

  std::ostringstream rates;
  CHECK(cli::cmd_plot_data((dir / "sweep").string(), "rates", rates, log) == 0);
  CHECK(rates.str() == io::read_text((dir / "sweep" / "rates.csv").string()));
  std::ostringstream errors;
  CHECK(cli::cmd_plot_data((dir / "sweep").string(), "errors", errors, log) == 0);
  const io::CsvTable etable = io::parse_csv(errors.str());
  CHECK(etable.rows.size() == 2);  // pairwise differences of three levels

  // Levels within a sweep remain checkable runs.
  CHECK(cli::cmd_check((dir / "sweep" / "level_01").string(), 1.0, log) == 0);
}

TEST_CASE("zero-data simulate passes every check") {
  const fs::path dir = fresh_dir("zerodata");
  std::ostringstream log;
  const std::string config =
      std::string(VISCOFLOW_SOURCE_DIR) + "/configs/zero-data-d2.json";
  CHECK(cli::cmd_simulate(config, (dir / "run").string(), log) == 0);
  CHECK(cli::cmd_check((dir / "run").string(), 1.0, log) == 0);
  const io::CsvTable ledger =
      io::parse_csv(io::read_text((dir / "run" / "ledger.csv").string()));
  for (const auto& row : ledger.rows)
    for (std::size_t c = 1; c < row.size(); ++c) CHECK(std::abs(row[c]) < 1e-25);
}

TEST_CASE("installed binary responds to --help and --version") {
  const std::string exe = VISCOFLOW_CLI_PATH;
  CHECK(std::system((exe + " --help > /dev/null 2>&1").c_str()) == 0);
  CHECK(std::system((exe + " --version > /dev/null 2>&1").c_str()) == 0);
}

TEST_CASE("one-dimensional runs work end to end") {
  const fs::path dir = fresh_dir("onedim");
  const std::string config_text = R"({
    "dimension": 1,
    "grid_n": 17,
    "time": { "T": 0.05, "h": 0.05, "tau": 0.0125 },
    "initial": { "displacement": {"family": "trig_bump", "amplitude": 0.1},
                 "velocity": {"family": "trig_bump", "amplitude": 0.5} },
    "force": { "family": "trig_bump", "amplitude": 1.0 },
    "experiment": "nonlinear",
    "ledger": { "degiorgi": true }
  })";
  const fs::path config = write_config(dir, config_text);
  std::ostringstream log;
  CHECK(cli::cmd_simulate(config.string(), (dir / "run").string(), log) == 0);
  CHECK(cli::cmd_check((dir / "run").string(), 1.0, log) == 0);

  // Three dimensions stay out of the experiment harness.
  CHECK_THROWS_AS((void)parse_config(R"({"dimension": 3})"), ConfigError);
}

TEST_CASE("linear runs round-trip through check") {
  const fs::path dir = fresh_dir("linearrun");
  std::string text = small_config_json(false);
  text.replace(text.find("\"nonlinear\""), 11, "\"linear\"");
  const fs::path config = write_config(dir, text);
  std::ostringstream log;
  CHECK(cli::cmd_simulate(config.string(), (dir / "run").string(), log) == 0);
  CHECK(cli::cmd_check((dir / "run").string(), 1.0, log) == 0);
}

TEST_CASE("solver failures keep partial outputs and flag the manifest") {
  const fs::path dir = fresh_dir("partial");
  std::string text = small_config_json(false);
  text.insert(text.rfind('}'), R"(, "solver": {"max_iters": 1, "grad_tol": 1e-16,
                                             "grad_tol_abs": 1e-16})");
  const fs::path config = write_config(dir, text);
  std::ostringstream log;
  CHECK(cli::cmd_simulate(config.string(), (dir / "run").string(), log) == 3);
  CHECK(fs::exists(dir / "run" / "manifest.json"));
  const std::string manifest = io::read_text((dir / "run" / "manifest.json").string());
  CHECK(manifest.find("nonconvergence") != std::string::npos);
}

TEST_CASE("sweep results are independent of the worker cap") {
  const fs::path dir = fresh_dir("threads");
  const fs::path config = write_config(dir, small_config_json(false));
  std::ostringstream log;
  REQUIRE(cli::cmd_sweep(config.string(), "tau", 2, (dir / "seq").string(), log) == 0);
  setenv("VISCOFLOW_THREADS", "2", 1);
  const int rc = cli::cmd_sweep(config.string(), "tau", 2, (dir / "par").string(), log);
  unsetenv("VISCOFLOW_THREADS");
  REQUIRE(rc == 0);
  for (const char* level : {"level_00", "level_01"})
    CHECK(io::read_text((dir / "seq" / level / "ledger.csv").string()) ==
          io::read_text((dir / "par" / level / "ledger.csv").string()));
  CHECK(io::read_text((dir / "seq" / "errors.csv").string()) ==
        io::read_text((dir / "par" / "errors.csv").string()));
}
