#include "viscoflow/solver.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <thread>

namespace viscoflow {

namespace {

double quad_weight(const Grid& g) { return std::pow(g.dx(), g.dim()); }

Eigen::VectorXd lumped_covector(const Field& f) {
  return quad_weight(*f.grid) * gather_interior(f);
}

int env_thread_cap() {
  const char* env = std::getenv("VISCOFLOW_THREADS");
  if (!env) return 1;
  const long v = std::strtol(env, nullptr, 10);
  return v > 0 ? static_cast<int>(v) : 1;
}

}  // namespace

void NewtonConfig::validate() const {
  if (grad_tol <= 0.0 || grad_tol_abs <= 0.0 || max_iters <= 0 || det_floor <= 0.0 ||
      backtrack <= 0.0 || backtrack >= 1.0 || armijo <= 0.0 || max_backtracks <= 0)
    throw std::invalid_argument("NewtonConfig: invalid entry");
}

StepResult minimize_cost(const StepCost& cost, const NewtonConfig& cfg, const Field& guess) {
  cfg.validate();
  StepResult res;
  res.state = guess;
  Field& y = res.state;
  StepDiagnostics& diag = res.diag;

  double fy = cost.value(y);
  diag.cost_initial = fy;
  if (!std::isfinite(fy) || cost.orientation_margin(y) <= cfg.det_floor) {
    diag.status = StepStatus::degenerate_step;
    diag.cost_final = fy;
    return res;
  }

  Eigen::VectorXd g = cost.gradient(y);
  diag.initial_grad_norm = g.norm();
  double tol = std::max(cfg.grad_tol * diag.initial_grad_norm, cfg.grad_tol_abs);
  diag.grad_norm = diag.initial_grad_norm;
  if (diag.grad_norm <= tol) {
    diag.cost_final = fy;
    return res;
  }

  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
  for (int it = 0; it < cfg.max_iters; ++it) {
    const Eigen::SparseMatrix<double> h = cost.hessian(y);
    double max_diag = 0.0;
    for (int k = 0; k < h.rows(); ++k) max_diag = std::max(max_diag, std::abs(h.coeff(k, k)));
    const double base_shift = 1e-8 * (max_diag + 1.0);

    // The gradient cannot be evaluated below the rounding floor set by the
    // stiffest terms of the cost; widen the target accordingly (relevant for
    // very small delta, where the inertia scaling dominates).
    const double grad_floor = 8.0 * 2.2e-16 * max_diag *
                              (1.0 + y.data.lpNorm<Eigen::Infinity>()) *
                              std::sqrt(static_cast<double>(g.size()));
    tol = std::max(tol, grad_floor);
    if (diag.grad_norm <= tol) {
      diag.cost_final = fy;
      return res;
    }

    double lambda = 0.0;
    bool accepted = false;
    bool saw_admissible = false;
    Field y_new = y;
    double f_new = fy;
    for (int escalation = 0; escalation < 12 && !accepted; ++escalation) {
      Eigen::SparseMatrix<double> hs = h;
      if (lambda > 0.0) {
        Eigen::SparseMatrix<double> id(h.rows(), h.cols());
        id.setIdentity();
        hs = h + lambda * id;
      }
      ldlt.compute(hs);
      if (ldlt.info() == Eigen::Success) {
        const Eigen::VectorXd p = -ldlt.solve(g);
        const double slope = g.dot(p);
        if (p.allFinite() && slope < 0.0) {
          const double noise =
              64.0 * 2.2e-16 * (1.0 + std::abs(fy) + cost.rounding_scale());
          if (-slope <= noise) {
            // Endgame: the predicted decrease is below the rounding level of
            // the cost, so Armijo cannot certify any step. Take the full
            // Newton step when it shrinks the gradient without raising the
            // cost beyond rounding noise.
            Field trial = y;
            add_interior(trial, p);
            if (cost.orientation_margin(trial) > cfg.det_floor) {
              const double ft = cost.value(trial);
              if (std::isfinite(ft)) saw_admissible = true;
              if (std::isfinite(ft) && ft <= fy + noise &&
                  cost.gradient(trial).norm() < 0.9 * g.norm()) {
                y_new = std::move(trial);
                f_new = std::min(ft, fy);
                accepted = true;
              }
            }
          }
          double t = 1.0;
          for (int bk = 0; bk <= cfg.max_backtracks && !accepted; ++bk) {
            Field trial = y;
            add_interior(trial, p, t);
            if (cost.orientation_margin(trial) > cfg.det_floor) {
              const double ft = cost.value(trial);
              if (std::isfinite(ft)) saw_admissible = true;
              if (std::isfinite(ft) && ft <= fy + cfg.armijo * t * slope) {
                y_new = std::move(trial);
                f_new = ft;
                accepted = true;
                diag.backtracks += bk;
                break;
              }
            }
            t *= cfg.backtrack;
          }
        }
      }
      if (!accepted) lambda = (lambda == 0.0 ? base_shift : lambda * 100.0);
    }

    if (!accepted) {
      diag.status = saw_admissible ? StepStatus::non_convergence : StepStatus::degenerate_step;
      diag.cost_final = fy;
      return res;
    }

    y = std::move(y_new);
    fy = f_new;
    diag.iterations = it + 1;
    g = cost.gradient(y);
    diag.grad_norm = g.norm();
    if (diag.grad_norm <= tol) {
      diag.cost_final = fy;
      return res;
    }
  }

  diag.status = StepStatus::non_convergence;
  diag.cost_final = fy;
  return res;
}

StepResult minimize_step(const StepSetup& setup, const NewtonConfig& cfg, const Field& guess) {
  if (min_det(setup.y_prev) <= 0.0)
    throw std::invalid_argument("minimize_step: previous state violates orientation");
  NonlinearStepCost cost(setup);
  return minimize_cost(cost, cfg, guess);
}

Field linear_step(const StepSetup& setup) {
  LinearStepCost cost(setup);
  Field zero(setup.y_prev.grid);  // zero everywhere; zero boundary data
  const Eigen::VectorXd b = cost.gradient(zero);
  const Eigen::SparseMatrix<double> k = cost.hessian(zero);

  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(k);
  if (ldlt.info() != Eigen::Success)
    throw std::runtime_error("linear_step: factorization failed; assembly bug (system is SPD)");
  Eigen::VectorXd u = ldlt.solve(-b);
  u += ldlt.solve(-b - k * u);  // one step of iterative refinement
  const double resid = (k * u + b).norm();
  if (!(resid <= 1e-12 * std::max(1.0, b.norm())))
    throw std::runtime_error("linear_step: residual above tolerance; assembly bug");

  Field out(setup.y_prev.grid);
  scatter_interior(u, out);
  return out;
}

// --- DeGiorgi ------------------------------------------------------------------

std::vector<double> default_sigma_grid(double tau, int points) {
  std::vector<double> grid(points);
  for (int j = 0; j < points; ++j) grid[j] = tau * std::ldexp(1.0, -(points - 1 - j));
  return grid;
}

DeGiorgiResult degiorgi_interpolant(const StepSetup& setup, const std::vector<double>& sigma_grid,
                                    const NewtonConfig& cfg) {
  const double tau = setup.scales.tau;
  if (sigma_grid.empty()) throw std::invalid_argument("degiorgi_interpolant: empty sigma grid");
  for (std::size_t i = 0; i < sigma_grid.size(); ++i) {
    if (sigma_grid[i] <= 0.0 || sigma_grid[i] > tau * (1.0 + 1e-12))
      throw std::invalid_argument("degiorgi_interpolant: sigma values must lie in (0, tau]");
    if (i > 0 && sigma_grid[i] <= sigma_grid[i - 1])
      throw std::invalid_argument("degiorgi_interpolant: sigma grid must be increasing");
  }

  const ScaleParams& sc = setup.scales;
  const double d2 = sc.delta * sc.delta;
  const double kin_coef = sc.rho / (2.0 * sc.h * d2);
  const double inertia_coef = sc.rho / (sc.h * d2);

  DualDissipation dual(setup.y_prev, sc, setup.material);
  const Eigen::VectorXd force_cov = lumped_covector(setup.f) / d2;

  // The 1/sigma conditioning of the interpolated cost puts the rounding floor
  // of the gradient above the outer solver tolerance for the smallest sigma
  // values. The interpolant terms only feed a quadrature checked at 1e-6, so
  // the sub-solves run at a tolerance matched to their conditioning.
  NewtonConfig sigma_cfg = cfg;
  sigma_cfg.grad_tol = std::max(cfg.grad_tol, 1e-8);
  sigma_cfg.grad_tol_abs = std::max(cfg.grad_tol_abs, 1e-10);

  DeGiorgiResult out;
  out.samples.reserve(sigma_grid.size());
  Field guess = setup.y_prev;
  for (double sigma : sigma_grid) {
    const StepSetup s_sigma = setup.with_timestep(sigma);
    NonlinearStepCost cost(s_sigma);
    StepResult res = minimize_cost(cost, sigma_cfg, guess);
    if (res.diag.status != StepStatus::converged)
      throw SolverError(res.diag.status, -1, "degiorgi_interpolant: sigma step failed");
    guess = res.state;  // warm start for the next, larger sigma

    DeGiorgiSample sample;
    sample.sigma = sigma;
    sample.state = res.state;
    sample.value = res.diag.cost_final;

    Field v = res.state;
    v.data = (res.state.data - setup.y_prev.data) / sigma;
    sample.kinetic_term = kin_coef * lumped_norm2(v);

    Field vw = v;
    vw.data -= setup.w.data;
    const Eigen::VectorXd xi = force_cov -
                               scaled_energy_gradient(res.state, sc, setup.material) -
                               inertia_coef * lumped_covector(vw);
    sample.dual_term = dual.evaluate(xi);
    out.samples.push_back(std::move(sample));
  }

  // Midpoint-type rule: each sigma owns its Voronoi interval within (0, tau].
  const std::size_t m = out.samples.size();
  for (std::size_t i = 0; i < m; ++i) {
    const double lo = (i == 0) ? 0.0 : 0.5 * (sigma_grid[i - 1] + sigma_grid[i]);
    const double hi = (i + 1 == m) ? tau : 0.5 * (sigma_grid[i] + sigma_grid[i + 1]);
    out.samples[i].weight = hi - lo;
    out.interp_kinetic += out.samples[i].weight * out.samples[i].kinetic_term;
    out.interp_dual += out.samples[i].weight * out.samples[i].dual_term;
  }
  return out;
}

// --- trajectories ----------------------------------------------------------------

void TwoScaleConfig::validate() const {
  if (T <= 0.0 || h <= 0.0 || tau <= 0.0) throw std::invalid_argument("TwoScaleConfig: positive");
  const double mb = T / h;
  const double ms = h / tau;
  if (std::abs(mb - std::round(mb)) > 1e-9 * mb)
    throw std::invalid_argument("TwoScaleConfig: T/h must be an integer");
  if (std::abs(ms - std::round(ms)) > 1e-9 * ms)
    throw std::invalid_argument("TwoScaleConfig: h/tau must be an integer");
}

int TwoScaleConfig::blocks() const { return static_cast<int>(std::llround(T / h)); }
int TwoScaleConfig::steps_per_block() const { return static_cast<int>(std::llround(h / tau)); }

Field TrajectoryRecord::interpolant(double t) const {
  const double tau = time.tau;
  const int last = static_cast<int>(states.size()) - 1;
  if (t <= 0.0) return states.front();
  if (t >= last * tau) return states.back();
  const int k = static_cast<int>(std::floor(t / tau));
  const double theta = (t - k * tau) / tau;
  Field out = states[k];
  out.data = (1.0 - theta) * states[k].data + theta * states[k + 1].data;
  return out;
}

Field TrajectoryRecord::increment(int k) const {
  Field v = states.at(k);
  v.data = (states.at(k).data - states.at(k - 1).data) / time.tau;
  return v;
}

std::vector<Field> delayed_velocity_sequence(const std::vector<Field>& states_so_far,
                                             const Field& v0, double tau, int steps_per_block,
                                             int block_index) {
  std::vector<Field> w;
  w.reserve(steps_per_block);
  for (int k = 1; k <= steps_per_block; ++k) {
    const int global = block_index * steps_per_block + k;
    if (global <= steps_per_block) {
      w.push_back(v0);
    } else {
      const int j = global - steps_per_block;  // uses increment (y_j - y_{j-1})/tau
      Field wk = states_so_far.at(j);
      wk.data = (states_so_far.at(j).data - states_so_far.at(j - 1).data) / tau;
      w.push_back(std::move(wk));
    }
  }
  return w;
}

namespace {

// Returns false when a step failed and keep_partial suppressed the throw.
bool append_block(TrajectoryRecord& rec, const std::vector<Field>& w_seq,
                  const std::vector<Field>& f_seq, const RunOptions& opts) {
  const ScaleParams& sc = rec.scales;
  const Material& mat = rec.material;
  const int n_steps = static_cast<int>(w_seq.size());

  for (int k = 0; k < n_steps; ++k) {
    const int global_step = static_cast<int>(rec.ledger.size()) + 1;
    StepSetup setup{rec.states.back(), w_seq[k], f_seq[k], sc, mat};

    StepLedger led;
    led.step = global_step;

    Field next;
    if (opts.linear) {
      next = linear_step(setup);
      LinearStepCost cost(setup);
      const double competitor = cost.value(setup.y_prev);
      led.breakdown = EnergyBreakdown{};
      const double total = cost.value(next, &led.breakdown);
      led.slack_simplified = competitor - total;
      led.rhs_simplified = competitor + led.breakdown.force_work;
      led.energy = linearized_energy(next, mat);
      led.grad_norm = cost.gradient(next).norm();
      led.min_det = 0.0;
      led.newton_iters = 0;
    } else {
      StepResult res = minimize_step(setup, opts.newton, setup.y_prev);
      if (res.diag.status != StepStatus::converged) {
        const std::string msg = res.diag.status == StepStatus::non_convergence
                                    ? "step did not converge within max_iters"
                                    : "no admissible line-search point";
        if (opts.keep_partial) {
          rec.failure = RunFailure{global_step, res.diag.status, msg};
          return false;
        }
        throw SolverError(res.diag.status, global_step, msg);
      }
      next = res.state;
      NonlinearStepCost cost(setup);
      const double competitor = cost.value(setup.y_prev);
      const double total = cost.value(next, &led.breakdown);
      led.slack_simplified = competitor - total;
      led.rhs_simplified = competitor + led.breakdown.force_work;
      led.energy = scaled_energy(next, sc, mat);
      led.grad_norm = res.diag.grad_norm;
      led.min_det = min_det(next);
      led.newton_iters = res.diag.iterations;

      if (opts.degiorgi) {
        const DeGiorgiResult dg =
            degiorgi_interpolant(setup, default_sigma_grid(sc.tau, opts.sigma_points), opts.newton);
        led.interp_kinetic = dg.interp_kinetic;
        led.interp_dual = dg.interp_dual;
        led.slack_refined = led.slack_simplified - dg.interp_kinetic - dg.interp_dual;
        led.refined_available = true;
      }
    }

    led.w_lumped_norm2 = lumped_norm2(w_seq[k]);
    Field v = next;
    v.data = (next.data - rec.states.back().data) / sc.tau;
    led.v_lumped_norm2 = lumped_norm2(v);

    rec.states.push_back(std::move(next));
    rec.w_seq.push_back(w_seq[k]);
    rec.f_seq.push_back(f_seq[k]);
    rec.ledger.push_back(led);
  }
  return true;
}

}  // namespace

TrajectoryRecord run_block(const Field& initial, const std::vector<Field>& w_seq,
                           const std::vector<Field>& f_seq, const ScaleParams& scales,
                           const Material& mat, const RunOptions& opts) {
  if (w_seq.size() != f_seq.size())
    throw std::invalid_argument("run_block: per-step data sizes differ");
  TrajectoryRecord rec;
  rec.linear = opts.linear;
  rec.scales = scales;
  rec.material = mat;
  rec.time =
      TwoScaleConfig{scales.tau * static_cast<double>(w_seq.size()), scales.h, scales.tau};
  rec.states.push_back(initial);
  append_block(rec, w_seq, f_seq, opts);
  return rec;
}

Field ForceSpec::interval_average(double t0, double t1) const {
  Field out = profile;
  if (modulation == Modulation::cosine && omega != 0.0) {
    out.data *= (std::sin(omega * t1) - std::sin(omega * t0)) / (omega * (t1 - t0));
  }
  return out;
}

TrajectoryRecord run_two_scale(const TwoScaleConfig& cfg, const Field& y0, const Field& v0,
                               const ForceSpec& force, const ScaleParams& scales,
                               const Material& mat, const RunOptions& opts) {
  cfg.validate();
  if (std::abs(scales.tau - cfg.tau) > 1e-12 * cfg.tau ||
      std::abs(scales.h - cfg.h) > 1e-12 * cfg.h)
    throw std::invalid_argument("run_two_scale: time config and scale params disagree");

  TrajectoryRecord rec;
  rec.linear = opts.linear;
  rec.scales = scales;
  rec.material = mat;
  rec.time = cfg;
  rec.states.push_back(y0);

  const int n = cfg.steps_per_block();
  for (int block = 0; block < cfg.blocks(); ++block) {
    const std::vector<Field> w_seq =
        delayed_velocity_sequence(rec.states, v0, cfg.tau, n, block);
    std::vector<Field> f_seq;
    f_seq.reserve(n);
    for (int k = 1; k <= n; ++k) {
      const double t0 = (block * n + k - 1) * cfg.tau;
      f_seq.push_back(force.interval_average(t0, t0 + cfg.tau));
    }
    if (!append_block(rec, w_seq, f_seq, opts)) break;
  }
  return rec;
}

std::vector<SweepLevel> sweep_levels(SweepKind kind, const TwoScaleConfig& base,
                                     const ScaleParams& scales, int levels) {
  if (levels < 1) throw std::invalid_argument("sweep_levels: need at least one level");
  std::vector<SweepLevel> out;
  out.reserve(levels);
  for (int l = 0; l < levels; ++l) {
    const double factor = std::ldexp(1.0, -l);
    SweepLevel lev;
    lev.time = base;
    lev.scales = scales;
    switch (kind) {
      case SweepKind::tau:
        lev.time.tau = base.tau * factor;
        lev.parameter = lev.time.tau;
        break;
      case SweepKind::h:
        lev.time.h = base.h * factor;
        lev.time.tau = base.tau * factor;  // keep tau/h fixed
        lev.parameter = lev.time.h;
        break;
      case SweepKind::delta:
        lev.scales.delta = scales.delta * factor;
        lev.parameter = lev.scales.delta;
        break;
      case SweepKind::diagonal:
        lev.time.tau = base.tau * factor;
        lev.scales.delta = scales.delta * factor;
        lev.parameter = lev.scales.delta;
        break;
    }
    lev.scales.h = lev.time.h;
    lev.scales.tau = lev.time.tau;
    out.push_back(lev);
  }
  return out;
}

std::vector<TrajectoryRecord> refine_sweep(SweepKind kind, const TwoScaleConfig& base,
                                           const Field& y0_profile, const Field& v0_profile,
                                           const ForceSpec& force_profile,
                                           const ScaleParams& scales, const Material& mat,
                                           const RunOptions& opts, int levels) {
  const std::vector<SweepLevel> levs = sweep_levels(kind, base, scales, levels);
  std::vector<TrajectoryRecord> records(levs.size());
  std::vector<std::exception_ptr> errors(levs.size());

  auto run_level = [&](std::size_t i) {
    try {
      const SweepLevel& lev = levs[i];
      // Scale the delta-independent profiles into actual data for this level.
      Field y0 = identity_field(y0_profile.grid);
      y0.data += lev.scales.delta * y0_profile.data;
      Field v0 = v0_profile;
      v0.data *= lev.scales.delta;
      ForceSpec force = force_profile;
      force.profile.data *= lev.scales.delta;
      records[i] = run_two_scale(lev.time, y0, v0, force, lev.scales, mat, opts);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };

  const int cap = std::max(1, env_thread_cap());
  if (cap <= 1 || levs.size() <= 1) {
    for (std::size_t i = 0; i < levs.size(); ++i) run_level(i);
  } else {
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
      for (std::size_t i = next.fetch_add(1); i < levs.size(); i = next.fetch_add(1))
        run_level(i);
    };
    std::vector<std::thread> pool;
    const int nthreads = std::min<int>(cap, static_cast<int>(levs.size()));
    pool.reserve(nthreads);
    for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (const auto& err : errors)
    if (err) std::rethrow_exception(err);
  return records;
}

std::vector<double> comparison_times(const std::vector<TrajectoryRecord>& records) {
  if (records.empty()) return {};
  double tau_max = 0.0;
  double t_final = records.front().time.T;
  for (const auto& rec : records) {
    tau_max = std::max(tau_max, rec.time.tau);
    t_final = std::min(t_final, rec.time.T);
  }
  std::vector<double> times;
  const int count = static_cast<int>(std::llround(t_final / tau_max));
  times.reserve(count);
  for (int j = 1; j <= count; ++j) times.push_back(j * tau_max);
  return times;
}

}  // namespace viscoflow
