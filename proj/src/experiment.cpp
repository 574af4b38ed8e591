#include "viscoflow/experiment.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace viscoflow {

using nlohmann::json;

namespace {

[[noreturn]] void config_fail(const std::string& msg) { throw ConfigError("config: " + msg); }

void check_keys(const json& obj, const std::string& where, const std::set<std::string>& allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!allowed.count(it.key()))
      config_fail("unknown key '" + it.key() + "' in " + where);
}

double get_num(const json& obj, const std::string& key, double fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_number()) config_fail("'" + key + "' must be a number");
  return obj[key].get<double>();
}

int get_int(const json& obj, const std::string& key, int fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_number_integer()) config_fail("'" + key + "' must be an integer");
  return obj[key].get<int>();
}

std::string get_str(const json& obj, const std::string& key, const std::string& fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_string()) config_fail("'" + key + "' must be a string");
  return obj[key].get<std::string>();
}

bool get_bool(const json& obj, const std::string& key, bool fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_boolean()) config_fail("'" + key + "' must be a boolean");
  return obj[key].get<bool>();
}

FamilySpec parse_family(const json& obj, const std::string& where) {
  check_keys(obj, where, {"family", "amplitude"});
  FamilySpec spec;
  spec.family = get_str(obj, "family", "zero");
  spec.amplitude = get_num(obj, "amplitude", 0.0);
  if (spec.family != "zero" && spec.family != "trig_bump")
    config_fail("unknown family '" + spec.family + "' in " + where);
  return spec;
}

json family_json(const FamilySpec& spec) {
  return json{{"family", spec.family}, {"amplitude", spec.amplitude}};
}

}  // namespace

void RunConfig::validate() const {
  if (dimension < 1 || dimension > 2)
    config_fail("dimension must be 1 or 2 for the experiment harness");
  if (grid_n < 3) config_fail("grid_n must be at least 3");
  try {
    material.elastic.validate(dimension);
    material.viscosity.validate();
    time.validate();
    ScaleParams sc = scales;
    sc.h = time.h;
    sc.tau = time.tau;
    sc.validate(material.elastic.p_exp);
    solver.validate();
  } catch (const std::invalid_argument& err) {
    config_fail(err.what());
  }
  if (force.modulation != "constant" && force.modulation != "cosine")
    config_fail("force.modulation must be 'constant' or 'cosine'");
  if (sigma_points < 2 || sigma_points > 32) config_fail("sigma_points must be in [2, 32]");
}

RunConfig parse_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& err) {
    // Translate the byte offset into line/column for the diagnostic.
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < err.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    std::ostringstream msg;
    msg << "config: JSON parse error at line " << line << ", column " << col << ": "
        << err.what();
    throw ConfigError(msg.str());
  }
  if (!root.is_object()) config_fail("top level must be an object");
  check_keys(root, "top level",
             {"dimension", "grid_n", "material", "scales", "time", "initial", "force", "solver",
              "experiment", "ledger"});

  RunConfig cfg;
  cfg.dimension = get_int(root, "dimension", 2);
  cfg.grid_n = get_int(root, "grid_n", 17);

  if (root.contains("material")) {
    const json& m = root["material"];
    check_keys(m, "material",
               {"mu", "kappa", "eps_det", "s_exp", "c_P", "p_exp", "eta", "lambda_v", "theta"});
    cfg.material.elastic.mu = get_num(m, "mu", 1.0);
    cfg.material.elastic.kappa = get_num(m, "kappa", 1.0);
    cfg.material.elastic.eps_det = get_num(m, "eps_det", 0.05);
    cfg.material.elastic.p_exp = get_num(m, "p_exp", 4.0);
    cfg.material.elastic.s_exp =
        get_num(m, "s_exp",
                ElasticParams::minimal_compression_exponent(cfg.dimension,
                                                            cfg.material.elastic.p_exp));
    cfg.material.elastic.c_P = get_num(m, "c_P", 0.01);
    cfg.material.viscosity.eta = get_num(m, "eta", 1.0);
    cfg.material.viscosity.lambda_v = get_num(m, "lambda_v", 0.0);
    cfg.material.viscosity.theta = get_num(m, "theta", 0.0);
  } else {
    cfg.material.elastic.s_exp = ElasticParams::minimal_compression_exponent(
        cfg.dimension, cfg.material.elastic.p_exp);
  }

  if (root.contains("scales")) {
    const json& s = root["scales"];
    check_keys(s, "scales", {"delta", "alpha", "rho"});
    cfg.scales.delta = get_num(s, "delta", 0.1);
    cfg.scales.alpha = get_num(s, "alpha", 0.4);
    cfg.scales.rho = get_num(s, "rho", 1.0);
  }

  if (root.contains("time")) {
    const json& t = root["time"];
    check_keys(t, "time", {"T", "h", "tau"});
    cfg.time.T = get_num(t, "T", 0.1);
    cfg.time.h = get_num(t, "h", 0.1);
    cfg.time.tau = get_num(t, "tau", 0.0125);
  }
  cfg.scales.h = cfg.time.h;
  cfg.scales.tau = cfg.time.tau;

  if (root.contains("initial")) {
    const json& ini = root["initial"];
    check_keys(ini, "initial", {"displacement", "velocity"});
    if (ini.contains("displacement"))
      cfg.initial_displacement = parse_family(ini["displacement"], "initial.displacement");
    if (ini.contains("velocity"))
      cfg.initial_velocity = parse_family(ini["velocity"], "initial.velocity");
  }

  if (root.contains("force")) {
    const json& f = root["force"];
    check_keys(f, "force", {"family", "amplitude", "modulation", "omega"});
    cfg.force.profile.family = get_str(f, "family", "zero");
    cfg.force.profile.amplitude = get_num(f, "amplitude", 0.0);
    if (cfg.force.profile.family != "zero" && cfg.force.profile.family != "trig_bump")
      config_fail("unknown family '" + cfg.force.profile.family + "' in force");
    cfg.force.modulation = get_str(f, "modulation", "constant");
    cfg.force.omega = get_num(f, "omega", 0.0);
  }

  if (root.contains("solver")) {
    const json& s = root["solver"];
    check_keys(s, "solver",
               {"grad_tol", "grad_tol_abs", "max_iters", "backtrack", "armijo", "det_floor"});
    cfg.solver.grad_tol = get_num(s, "grad_tol", 1e-10);
    cfg.solver.grad_tol_abs = get_num(s, "grad_tol_abs", 1e-12);
    cfg.solver.max_iters = get_int(s, "max_iters", 100);
    cfg.solver.backtrack = get_num(s, "backtrack", 0.5);
    cfg.solver.armijo = get_num(s, "armijo", 1e-4);
    cfg.solver.det_floor = get_num(s, "det_floor", 1e-8);
  }

  const std::string experiment = get_str(root, "experiment", "nonlinear");
  if (experiment == "nonlinear")
    cfg.linear = false;
  else if (experiment == "linear")
    cfg.linear = true;
  else
    config_fail("experiment must be 'nonlinear' or 'linear'");

  if (root.contains("ledger")) {
    const json& l = root["ledger"];
    check_keys(l, "ledger", {"degiorgi", "sigma_points"});
    cfg.degiorgi = get_bool(l, "degiorgi", false);
    cfg.sigma_points = get_int(l, "sigma_points", 8);
  }

  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string dump_config(const RunConfig& cfg) {
  json root;
  root["dimension"] = cfg.dimension;
  root["grid_n"] = cfg.grid_n;
  root["material"] = {{"mu", cfg.material.elastic.mu},
                      {"kappa", cfg.material.elastic.kappa},
                      {"eps_det", cfg.material.elastic.eps_det},
                      {"s_exp", cfg.material.elastic.s_exp},
                      {"c_P", cfg.material.elastic.c_P},
                      {"p_exp", cfg.material.elastic.p_exp},
                      {"eta", cfg.material.viscosity.eta},
                      {"lambda_v", cfg.material.viscosity.lambda_v},
                      {"theta", cfg.material.viscosity.theta}};
  root["scales"] = {{"delta", cfg.scales.delta}, {"alpha", cfg.scales.alpha}, {"rho", cfg.scales.rho}};
  root["time"] = {{"T", cfg.time.T}, {"h", cfg.time.h}, {"tau", cfg.time.tau}};
  root["initial"] = {{"displacement", family_json(cfg.initial_displacement)},
                     {"velocity", family_json(cfg.initial_velocity)}};
  root["force"] = {{"family", cfg.force.profile.family},
                   {"amplitude", cfg.force.profile.amplitude},
                   {"modulation", cfg.force.modulation},
                   {"omega", cfg.force.omega}};
  root["solver"] = {{"grad_tol", cfg.solver.grad_tol},
                    {"grad_tol_abs", cfg.solver.grad_tol_abs},
                    {"max_iters", cfg.solver.max_iters},
                    {"backtrack", cfg.solver.backtrack},
                    {"armijo", cfg.solver.armijo},
                    {"det_floor", cfg.solver.det_floor}};
  root["experiment"] = cfg.linear ? "linear" : "nonlinear";
  root["ledger"] = {{"degiorgi", cfg.degiorgi}, {"sigma_points", cfg.sigma_points}};
  return root.dump(2);
}

namespace {

// Component recipes of the trigonometric bump families. Every factor vanishes
// on the corresponding boundary faces. The mode mix deliberately breaks the
// reflection symmetries of the square; a symmetric bump annihilates the cubic
// Taylor terms and hides the generic first-order linearization gap.
double bump_component(int d, int comp, const Vec& x) {
  const double pi = std::acos(-1.0);
  const double s1x = std::sin(pi * x(0)), s2x = std::sin(2.0 * pi * x(0));
  switch (d) {
    case 1:
      return s1x + 0.4 * s2x;
    case 2: {
      const double s1y = std::sin(pi * x(1)), s2y = std::sin(2.0 * pi * x(1));
      if (comp == 0) return (s1x + 0.4 * s2x) * s1y;
      return 0.6 * s2x * s1y + 0.25 * s1x * s2y;
    }
    default: {
      const double s1y = std::sin(pi * x(1)), s2y = std::sin(2.0 * pi * x(1));
      const double s1z = std::sin(pi * x(2));
      if (comp == 0) return (s1x + 0.4 * s2x) * s1y * s1z;
      if (comp == 1) return (0.6 * s2x * s1y + 0.25 * s1x * s2y) * s1z;
      return 0.4 * s1x * s2y * s1z;
    }
  }
}

}  // namespace

Field make_family(std::shared_ptr<const Grid> grid, const FamilySpec& spec) {
  Field f(grid);
  if (spec.family == "zero" || spec.amplitude == 0.0) return f;
  const int d = grid->dim();
  for (int node = 0; node < grid->node_count(); ++node) {
    const Vec x = grid->node_position(node);
    for (int c = 0; c < d; ++c) f.at(node, c) = spec.amplitude * bump_component(d, c, x);
  }
  apply_dirichlet_zero(f);  // pin roundoff on the boundary to exact zeros
  return f;
}

ForceSpec make_force(std::shared_ptr<const Grid> grid, const ForceConfig& cfg) {
  ForceSpec spec;
  spec.profile = make_family(grid, cfg.profile);
  spec.modulation = cfg.modulation == "cosine" ? ForceSpec::Modulation::cosine
                                               : ForceSpec::Modulation::constant;
  spec.omega = cfg.omega;
  return spec;
}

RunResult execute_run(const RunConfig& cfg) {
  cfg.validate();
  auto grid = std::make_shared<const Grid>(cfg.dimension, cfg.grid_n);

  const Field u0 = make_family(grid, cfg.initial_displacement);
  const Field v0_profile = make_family(grid, cfg.initial_velocity);
  ForceSpec force = make_force(grid, cfg.force);

  ScaleParams scales = cfg.scales;
  scales.h = cfg.time.h;
  scales.tau = cfg.time.tau;

  RunOptions opts;
  opts.linear = cfg.linear;
  opts.degiorgi = cfg.degiorgi && !cfg.linear;
  opts.sigma_points = cfg.sigma_points;
  opts.newton = cfg.solver;
  opts.keep_partial = true;

  Field initial(grid);
  Field v0 = v0_profile;
  if (cfg.linear) {
    initial = u0;
  } else {
    initial = identity_field(grid);
    initial.data += scales.delta * u0.data;
    v0.data *= scales.delta;
    force.profile.data *= scales.delta;
  }

  RunResult result;
  result.config = cfg;
  result.record = run_two_scale(cfg.time, initial, v0, force, scales, cfg.material, opts);
  result.fenchel = fenchel_residuals(result.record);
  return result;
}

SweepKind parse_sweep_kind(const std::string& name) {
  if (name == "tau") return SweepKind::tau;
  if (name == "h") return SweepKind::h;
  if (name == "delta") return SweepKind::delta;
  if (name == "diagonal") return SweepKind::diagonal;
  throw ConfigError("unknown sweep parameter '" + name + "' (use delta|tau|h|diagonal)");
}

std::string sweep_kind_name(SweepKind kind) {
  switch (kind) {
    case SweepKind::tau: return "tau";
    case SweepKind::h: return "h";
    case SweepKind::delta: return "delta";
    case SweepKind::diagonal: return "diagonal";
  }
  return "?";
}

SweepResult execute_sweep(const RunConfig& base, SweepKind kind, int levels) {
  if (levels < 1) throw ConfigError("sweep: levels must be at least 1");
  RunConfig cfg = base;
  cfg.linear = false;  // refinement sweeps probe the nonlinear scheme
  cfg.validate();

  auto grid = std::make_shared<const Grid>(cfg.dimension, cfg.grid_n);
  const Field u0 = make_family(grid, cfg.initial_displacement);
  const Field v0 = make_family(grid, cfg.initial_velocity);
  const ForceSpec force = make_force(grid, cfg.force);

  ScaleParams scales = cfg.scales;
  scales.h = cfg.time.h;
  scales.tau = cfg.time.tau;

  RunOptions opts;
  opts.linear = false;
  opts.degiorgi = false;
  opts.newton = cfg.solver;

  SweepResult out;
  out.kind = kind;
  out.levels = sweep_levels(kind, cfg.time, scales, levels);
  out.records = refine_sweep(kind, cfg.time, u0, v0, force, scales, cfg.material, opts, levels);

  if (kind == SweepKind::delta || kind == SweepKind::diagonal) {
    // Linear reference: same grid and data profiles; for the diagonal sweep a
    // finer inner step stands in for the time-delayed limit.
    RunConfig ref = cfg;
    ref.linear = true;
    ref.degiorgi = false;
    if (kind == SweepKind::diagonal) {
      ref.time.tau = out.levels.back().time.tau / 2.0;
      ref.scales.tau = ref.time.tau;
    }
    RunResult ref_run = execute_run(ref);
    if (ref_run.record.failure)
      throw SolverError(ref_run.record.failure->status, ref_run.record.failure->step,
                        "sweep reference run failed");
    out.reference = std::move(ref_run.record);

    const double t_final = cfg.time.T;
    const Field u_ref = out.reference->interpolant(t_final);
    for (std::size_t l = 0; l < out.records.size(); ++l) {
      const TrajectoryRecord& rec = out.records[l];
      const Field u_nl = displacement_of(rec, rec.interpolant(t_final));
      out.errors.push_back(h1_distance(u_nl, u_ref));
      out.error_params.push_back(out.levels[l].parameter);
    }
  } else {
    // Cauchy differences between consecutive levels at shared times.
    const std::vector<double> times = comparison_times(out.records);
    for (std::size_t l = 0; l + 1 < out.records.size(); ++l) {
      double worst = 0.0;
      for (double t : times)
        worst = std::max(worst, h1_distance(out.records[l].interpolant(t),
                                            out.records[l + 1].interpolant(t)));
      out.errors.push_back(worst);
      out.error_params.push_back(out.levels[l].parameter);
    }
  }

  if (out.errors.size() >= 3) out.rates = observed_order(out.errors, out.error_params);
  return out;
}

}  // namespace viscoflow
