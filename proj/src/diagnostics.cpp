#include "viscoflow/diagnostics.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>

#include <cmath>
#include <stdexcept>

namespace viscoflow {

namespace {

double quad_weight(const Grid& g) { return std::pow(g.dx(), g.dim()); }

Eigen::VectorXd lumped_covector(const Field& f) {
  return quad_weight(*f.grid) * gather_interior(f);
}

/// Gram matrix of the cell-gradient map on interior dofs:
/// v^T G v = sum_cells |grad v|^2 dx^d.
Eigen::SparseMatrix<double> gradient_gram(const Grid& g) {
  const int d = g.dim();
  const int ndof = g.interior_count() * d;
  const double wq = quad_weight(g);
  std::vector<Eigen::Triplet<double>> trips;
  int corners[8];
  for (int cell = 0; cell < g.cell_count(); ++cell) {
    g.cell_corners(cell, corners);
    for (int a = 0; a < g.corners_per_cell(); ++a) {
      const int orda = g.interior_ordinal(corners[a]);
      if (orda < 0) continue;
      for (int b = 0; b < g.corners_per_cell(); ++b) {
        const int ordb = g.interior_ordinal(corners[b]);
        if (ordb < 0) continue;
        double gg = 0.0;
        for (int dir = 0; dir < d; ++dir)
          gg += g.corner_gradient_weight(a, dir) * g.corner_gradient_weight(b, dir);
        for (int c = 0; c < d; ++c)
          trips.emplace_back(orda * d + c, ordb * d + c, wq * gg);
      }
    }
  }
  Eigen::SparseMatrix<double> out(ndof, ndof);
  out.setFromTriplets(trips.begin(), trips.end());
  return out;
}

StepSetup setup_for_step(const TrajectoryRecord& traj, int k) {
  return StepSetup{traj.states.at(k - 1), traj.w_seq.at(k - 1), traj.f_seq.at(k - 1),
                   traj.scales, traj.material};
}

}  // namespace

RateReport observed_order(const std::vector<double>& errors,
                          const std::vector<double>& parameters) {
  if (errors.size() != parameters.size() || errors.size() < 3)
    throw std::invalid_argument("observed_order: need at least three matching levels");
  RateReport rep;
  rep.parameters = parameters;
  rep.errors = errors;
  const std::size_t m = errors.size();
  for (std::size_t i = 0; i < m; ++i) {
    if (errors[i] <= 0.0) throw std::invalid_argument("observed_order: errors must be positive");
    if (parameters[i] <= 0.0)
      throw std::invalid_argument("observed_order: parameters must be positive");
    if (i > 0 && parameters[i] >= parameters[i - 1])
      throw std::invalid_argument("observed_order: parameters must be strictly decreasing");
  }
  double sx = 0.0, sy = 0.0;
  std::vector<double> lx(m), ly(m);
  for (std::size_t i = 0; i < m; ++i) {
    lx[i] = std::log(parameters[i]);
    ly[i] = std::log(errors[i]);
    sx += lx[i];
    sy += ly[i];
  }
  const double mx = sx / m, my = sy / m;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  rep.fitted_slope = sxy / sxx;
  rep.pair_slopes.resize(m - 1);
  for (std::size_t i = 0; i + 1 < m; ++i)
    rep.pair_slopes[i] = (ly[i] - ly[i + 1]) / (lx[i] - lx[i + 1]);
  return rep;
}

std::vector<double> energy_slack(const TrajectoryRecord& traj) {
  std::vector<double> slack(traj.ledger.size());
  for (int k = 1; k <= static_cast<int>(traj.ledger.size()); ++k) {
    const StepSetup setup = setup_for_step(traj, k);
    if (traj.linear) {
      LinearStepCost cost(setup);
      slack[k - 1] = cost.value(setup.y_prev) - cost.value(traj.states.at(k));
    } else {
      NonlinearStepCost cost(setup);
      slack[k - 1] = cost.value(setup.y_prev) - cost.value(traj.states.at(k));
    }
  }
  return slack;
}

std::vector<EnergyBreakdown> recompute_breakdowns(const TrajectoryRecord& traj) {
  std::vector<EnergyBreakdown> rows(traj.ledger.size());
  for (int k = 1; k <= static_cast<int>(traj.ledger.size()); ++k) {
    const StepSetup setup = setup_for_step(traj, k);
    if (traj.linear)
      LinearStepCost(setup).value(traj.states.at(k), &rows[k - 1]);
    else
      NonlinearStepCost(setup).value(traj.states.at(k), &rows[k - 1]);
  }
  return rows;
}

Field displacement_of(const TrajectoryRecord& rec, const Field& state) {
  if (rec.linear) return state;
  Field u = state;
  const Field id = identity_field(state.grid);
  u.data = (state.data - id.data) / rec.scales.delta;
  return u;
}

std::vector<double> linearization_error(const TrajectoryRecord& nl, const TrajectoryRecord& lin,
                                        const std::vector<double>& times) {
  if (nl.states.front().grid->node_count() != lin.states.front().grid->node_count())
    throw std::invalid_argument("linearization_error: grids misaligned");
  std::vector<double> err;
  err.reserve(times.size());
  for (double t : times) {
    const Field u_nl = displacement_of(nl, nl.interpolant(t));
    const Field u_l = displacement_of(lin, lin.interpolant(t));
    err.push_back(h1_distance(u_nl, u_l));
  }
  return err;
}

double korn_ratio(const Field& y, const Field& v, const ScaleParams& scales, const Material& mat) {
  if (min_det(y) <= 0.0) throw std::domain_error("korn_ratio: orientation violated");
  const Grid& g = *y.grid;
  double num = 0.0, den = 0.0;
  for (int cell = 0; cell < g.cell_count(); ++cell) {
    const Mat gv = cell_gradient(v, cell);
    num += gv.squaredNorm();
    den += 2.0 * dissipation_density(cell_gradient(y, cell), gv, mat.viscosity);
  }
  (void)scales;
  if (num == 0.0) throw std::invalid_argument("korn_ratio: test field vanishes");
  return num / den;
}

KornConstant korn_constant(const Field& y, const ScaleParams& scales, const Material& mat) {
  const Grid& g = *y.grid;
  const int ndof = g.interior_count() * g.dim();
  // Unscaled 2R-form: v^T A v = 2 * sum_cells R(grad y, grad v) dx^d.
  Eigen::SparseMatrix<double> a = dissipation_matrix(y, scales, mat, /*unit_scale=*/true);
  const Eigen::SparseMatrix<double> gram = gradient_gram(g);

  const Eigen::MatrixXd ad = Eigen::MatrixXd(a);
  const Eigen::MatrixXd gd = Eigen::MatrixXd(gram);
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(ad, gd);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("korn_constant: generalized eigensolver failed");
  const double lam_min = es.eigenvalues()(0);

  // Cross-check: inverse power iterations followed by Rayleigh-quotient steps.
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(a);
  if (ldlt.info() != Eigen::Success)
    throw std::runtime_error("korn_constant: dissipation form singular");
  Eigen::VectorXd x = Eigen::VectorXd::Ones(ndof);
  x /= std::sqrt(x.dot(gd * x));
  for (int it = 0; it < 30; ++it) {
    x = ldlt.solve(gram * x);
    x /= std::sqrt(x.dot(gd * x));
  }
  double rho = x.dot(ad * x) / x.dot(gd * x);
  for (int it = 0; it < 6; ++it) {
    const Eigen::MatrixXd shifted = ad - rho * gd;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(shifted);
    Eigen::VectorXd xn = lu.solve(gd * x);
    const double nrm = std::sqrt(xn.dot(gd * xn));
    if (!std::isfinite(nrm) || nrm == 0.0) break;  // exactly at the eigenvalue
    x = xn / nrm;
    rho = x.dot(ad * x) / x.dot(gd * x);
  }

  KornConstant out;
  out.eigen_min = lam_min;
  out.constant = 1.0 / lam_min;
  out.power_iter_value = 1.0 / rho;
  return out;
}

RigidityReport rigidity_report(const Field& y, const ScaleParams& scales) {
  RigidityReport rep;
  const Field id = identity_field(y.grid);
  Field u = y;
  u.data = (y.data - id.data) / scales.delta;
  const FieldNorms n = discrete_norms(u);
  rep.u_h1 = std::sqrt(n.l2 * n.l2 + n.h1_semi * n.h1_semi);
  rep.delta_grad_inf = scales.delta * n.linf_grad;
  rep.min_det = min_det(y);
  const Grid& g = *y.grid;
  double acc = 0.0;
  for (int cell = 0; cell < g.cell_count(); ++cell) {
    const double dist = rotation_distance(cell_gradient(y, cell)).distance;
    acc += dist * dist;
  }
  rep.dist_so_l2 = std::sqrt(acc * quad_weight(g));
  return rep;
}

namespace {

struct StepDual {
  Eigen::VectorXd xi;
  double r_value = 0.0;
  double dual_value = 0.0;
};

StepDual step_dual_data(const TrajectoryRecord& traj, int k, const DualDissipation& dual) {
  const StepSetup setup = setup_for_step(traj, k);
  const ScaleParams& sc = traj.scales;
  const Field& y_k = traj.states.at(k);
  Field v = traj.increment(k);
  Field vw = v;
  vw.data -= setup.w.data;

  StepDual out;
  if (traj.linear) {
    out.xi = lumped_covector(setup.f) - linearized_energy_gradient(y_k, traj.material) -
             (sc.rho / sc.h) * lumped_covector(vw);
    out.r_value = linearized_dissipation(v, traj.material);
  } else {
    const double d2 = sc.delta * sc.delta;
    out.xi = lumped_covector(setup.f) / d2 -
             scaled_energy_gradient(y_k, sc, traj.material) -
             (sc.rho / (sc.h * d2)) * lumped_covector(vw);
    out.r_value = scaled_dissipation(setup.y_prev, v, sc, traj.material);
  }
  out.dual_value = dual.evaluate(out.xi);
  return out;
}

DualDissipation dual_for_step(const TrajectoryRecord& traj, int k) {
  if (traj.linear) return DualDissipation(*traj.states.front().grid, traj.material);
  return DualDissipation(traj.states.at(k - 1), traj.scales, traj.material);
}

}  // namespace

std::vector<FenchelEntry> fenchel_residuals(const TrajectoryRecord& traj) {
  std::vector<FenchelEntry> out(traj.ledger.size());
  for (int k = 1; k <= static_cast<int>(traj.ledger.size()); ++k) {
    const DualDissipation dual = dual_for_step(traj, k);
    const StepDual sd = step_dual_data(traj, k, dual);
    const Eigen::VectorXd v = gather_interior(traj.increment(k));
    out[k - 1].pairing = sd.xi.dot(v);
    out[k - 1].residual = sd.r_value + sd.dual_value - out[k - 1].pairing;
  }
  return out;
}

FenchelEntry fenchel_residual_perturbed(const TrajectoryRecord& traj, int step,
                                        const Field& v_perturbed) {
  const DualDissipation dual = dual_for_step(traj, step);
  const StepDual sd = step_dual_data(traj, step, dual);
  const StepSetup setup = setup_for_step(traj, step);
  const double r_pert = traj.linear
                            ? linearized_dissipation(v_perturbed, traj.material)
                            : scaled_dissipation(setup.y_prev, v_perturbed, traj.scales,
                                                 traj.material);
  FenchelEntry out;
  out.pairing = sd.xi.dot(gather_interior(v_perturbed));
  out.residual = r_pert + sd.dual_value - out.pairing;
  return out;
}

namespace {

// Degenerate data (a zero probe field) produce identically zero gaps; report
// them without a fitted slope rather than fault.
RateReport rate_report_allowing_zero(const std::vector<double>& errors,
                                     const std::vector<double>& parameters) {
  for (double e : errors)
    if (e <= 0.0) {
      RateReport rep;
      rep.parameters = parameters;
      rep.errors = errors;
      rep.fitted_slope = 0.0;
      return rep;
    }
  return observed_order(errors, parameters);
}

}  // namespace

GammaProbe gamma_probe(const Field& u, const Field& v, const std::vector<double>& deltas,
                       const ScaleParams& scales, const Material& mat) {
  const Field id = identity_field(u.grid);
  const double e0 = linearized_energy(u, mat);
  const double r0 = linearized_dissipation(v, mat);

  std::vector<double> gap_e, gap_p, gap_r;
  for (double delta : deltas) {
    ScaleParams sc = scales;
    sc.delta = delta;
    Field y = id;
    y.data += delta * u.data;
    Field v_delta = v;
    v_delta.data *= delta;
    gap_e.push_back(std::abs(scaled_energy(y, sc, mat) - e0));
    gap_p.push_back(scaled_energy_second_grade(y, sc, mat));
    gap_r.push_back(std::abs(scaled_dissipation(y, v_delta, sc, mat) - r0));
  }
  GammaProbe probe;
  probe.energy_gap = rate_report_allowing_zero(gap_e, deltas);
  probe.second_grade_gap = rate_report_allowing_zero(gap_p, deltas);
  probe.dissipation_gap = rate_report_allowing_zero(gap_r, deltas);
  return probe;
}

TdShadow td_shadow(const TrajectoryRecord& traj) {
  TdShadow out;
  const int total = static_cast<int>(traj.ledger.size());
  const int n = traj.time.steps_per_block();
  const double tau = traj.time.tau;

  for (const auto& led : traj.ledger)
    if (!led.refined_available)
      throw std::invalid_argument("td_shadow: refined ledger terms are required");

  // Telescoping of the delayed-velocity data against earlier increments.
  double t1 = 0.0, t2 = 0.0;
  const double w0 = traj.ledger.front().w_lumped_norm2;
  for (int k = 1; k <= total; ++k) t1 += tau * traj.ledger[k - 1].w_lumped_norm2;
  t2 += n * tau * w0;
  for (int k = 1; k <= total - n; ++k) t2 += tau * traj.ledger[k - 1].v_lumped_norm2;
  out.telescoping_identity = t1 - t2;

  double acc = 0.0;
  for (int k = 1; k <= total; ++k) {
    acc += traj.ledger[k - 1].slack_refined;
    if (k % n == 0) out.block_slack.push_back(acc);
  }
  return out;
}

}  // namespace viscoflow
