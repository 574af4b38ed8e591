#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "support/test_support.hpp"
#include "viscoflow/diagnostics.hpp"

#include <cmath>

using namespace viscoflow;
using namespace viscoflow::testing;

namespace {

Material material_d2() {
  Material m;
  m.elastic.mu = 1.0;
  m.elastic.kappa = 1.0;
  m.elastic.eps_det = 0.05;
  m.elastic.s_exp = 4.0;
  m.elastic.c_P = 0.01;
  m.elastic.p_exp = 4.0;
  m.viscosity.eta = 1.0;
  m.viscosity.lambda_v = 0.3;
  m.viscosity.theta = 0.0;
  return m;
}

ScaleParams scales_with(double tau, double h = 0.1, double delta = 0.1) {
  ScaleParams sc;
  sc.delta = delta;
  sc.alpha = 0.4;
  sc.rho = 1.0;
  sc.h = h;
  sc.tau = tau;
  return sc;
}

Field bump(std::shared_ptr<const Grid> g, double amp) {
  const double pi = std::acos(-1.0);
  return sample_field(g, [&](const Vec& x, double* out) {
    out[0] = amp * std::sin(pi * x(0)) * std::sin(pi * x(1));
    out[1] = 0.6 * amp * std::sin(2.0 * pi * x(0)) * std::sin(pi * x(1));
  });
}

TrajectoryRecord small_nonlinear_run(std::shared_ptr<const Grid> g, bool degiorgi = false,
                                     double delta = 0.1) {
  TwoScaleConfig time{0.05, 0.05, 0.0125};
  ScaleParams sc = scales_with(time.tau, time.h, delta);
  Field y0 = identity_field(g);
  y0.data += sc.delta * bump(g, 0.1).data;
  Field v0 = bump(g, 0.5);
  v0.data *= sc.delta;
  ForceSpec force;
  force.profile = bump(g, 1.0);
  force.profile.data *= sc.delta;
  RunOptions opts;
  opts.degiorgi = degiorgi;
  return run_two_scale(time, y0, v0, force, sc, material_d2(), opts);
}

TrajectoryRecord small_linear_run(std::shared_ptr<const Grid> g, double tau = 0.0125) {
  TwoScaleConfig time{0.05, 0.05, tau};
  ScaleParams sc = scales_with(time.tau, time.h);
  Field u0 = bump(g, 0.1);
  Field v0 = bump(g, 0.5);
  ForceSpec force;
  force.profile = bump(g, 1.0);
  RunOptions opts;
  opts.linear = true;
  return run_two_scale(time, u0, v0, force, sc, material_d2(), opts);
}

}  // namespace

TEST_CASE("observed order recovers power laws") {
  std::vector<double> params{0.2, 0.1, 0.05, 0.025};
  std::vector<double> lin(4), quad(4), noisy(4);
  for (int i = 0; i < 4; ++i) {
    lin[i] = 3.7 * params[i];
    quad[i] = 0.3 * params[i] * params[i];
    noisy[i] = 2.0 * std::pow(params[i], 1.5) * (1.0 + 0.01 * ((i % 2) ? 1.0 : -1.0));
  }
  CHECK(observed_order(lin, params).fitted_slope == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(observed_order(quad, params).fitted_slope == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(std::abs(observed_order(noisy, params).fitted_slope - 1.5) < 0.05);

  const RateReport rep = observed_order(lin, params);
  REQUIRE(rep.pair_slopes.size() == 3);
  for (double s : rep.pair_slopes) CHECK(s == doctest::Approx(1.0).epsilon(1e-12));

  CHECK_THROWS_AS((void)observed_order({1.0, 0.0, 1.0}, params), std::invalid_argument);
  CHECK_THROWS_AS((void)observed_order({1.0, 1.0}, {0.2, 0.1}), std::invalid_argument);
  CHECK_THROWS_AS((void)observed_order({1.0, 1.0, 1.0}, {0.1, 0.1, 0.05}),
                  std::invalid_argument);
}

TEST_CASE("energy slack: zero data, converged runs, corrupted states") {
  const auto g = std::make_shared<const Grid>(2, 7);

  // Zero data: all slacks vanish identically.
  TwoScaleConfig time{0.05, 0.05, 0.025};
  ScaleParams sc = scales_with(time.tau, time.h);
  RunOptions opts;
  ForceSpec zero_force;
  zero_force.profile = Field(g);
  TrajectoryRecord zero_run = run_two_scale(time, identity_field(g), Field(g), zero_force,
                                            sc, material_d2(), opts);
  for (double s : energy_slack(zero_run)) CHECK(s == 0.0);

  // A converged forced run satisfies the scaled inequality at every step.
  TrajectoryRecord rec = small_nonlinear_run(g);
  const std::vector<double> slack = energy_slack(rec);
  for (std::size_t k = 0; k < slack.size(); ++k) {
    CHECK(slack[k] >= -1e-9 * (1.0 + std::abs(rec.ledger[k].rhs_simplified)));
    CHECK(rel_error(slack[k], rec.ledger[k].slack_simplified) < 1e-9);
  }

  // Corrupting a stored state drives the recomputed slack negative.
  TrajectoryRecord bad = rec;
  bad.states[2].at(g->interior_nodes()[5], 0) += 0.02;
  const std::vector<double> bad_slack = energy_slack(bad);
  CHECK(bad_slack[1] < -1e-6);
}

TEST_CASE("recomputed breakdowns match the ledger") {
  const auto g = std::make_shared<const Grid>(2, 7);
  const TrajectoryRecord rec = small_nonlinear_run(g);
  const auto rows = recompute_breakdowns(rec);
  REQUIRE(rows.size() == rec.ledger.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    CHECK(rows[k].total == rec.ledger[k].breakdown.total);
    CHECK(rows[k].elastic_W == rec.ledger[k].breakdown.elastic_W);
  }
}

TEST_CASE("linearization error: identical trajectories, tiny delta, monotone sweep") {
  const auto g = std::make_shared<const Grid>(2, 7);
  const TrajectoryRecord lin = small_linear_run(g);
  const std::vector<double> times = comparison_times({lin});

  CHECK(linearization_error(lin, lin, times).back() == 0.0);

  // Tiny delta: the nonlinear displacement collapses onto the linear one.
  const TrajectoryRecord nl_tiny = small_nonlinear_run(g, false, 1e-6);
  const std::vector<double> err_tiny = linearization_error(nl_tiny, lin, times);
  CHECK(err_tiny.back() < 1e-4);

  // Halving delta shrinks the final-time error monotonically.
  double prev = std::numeric_limits<double>::infinity();
  for (double delta : {0.2, 0.1, 0.05}) {
    const TrajectoryRecord nl = small_nonlinear_run(g, false, delta);
    const double err = linearization_error(nl, lin, times).back();
    CHECK(err < prev);
    prev = err;
  }
}

TEST_CASE("korn ratio and the extremal korn constant") {
  const auto g = std::make_shared<const Grid>(2, 7);
  const ScaleParams sc = scales_with(0.0125);
  const Material mat = material_d2();
  const Field id = identity_field(g);

  const KornConstant kc = korn_constant(id, sc, mat);
  CHECK(kc.constant > 0.0);
  CHECK(rel_error(kc.power_iter_value, kc.constant) < 1e-8);

  // Every admissible test field stays below the extremal constant.
  for (int rep = 0; rep < 20; ++rep) {
    const Field v = random_interior_field(g, 1.0);
    const double ratio = korn_ratio(id, v, sc, mat);
    CHECK(ratio > 0.0);
    CHECK(ratio <= kc.constant * (1.0 + 1e-10));
  }

  // A clamped infinitesimal rotation keeps a finite quotient.
  const Field rot = sample_field(g, [](const Vec& x, double* out) {
    const double wx = x(0) * (1.0 - x(0)) * 4.0;
    const double wy = x(1) * (1.0 - x(1)) * 4.0;
    out[0] = -(x(1) - 0.5) * wx * wy;
    out[1] = (x(0) - 0.5) * wx * wy;
  });
  const double rot_ratio = korn_ratio(id, rot, sc, mat);
  CHECK(std::isfinite(rot_ratio));
  CHECK(rot_ratio <= kc.constant * (1.0 + 1e-10));

  // Stability of the quotient under order-delta perturbations of the state.
  Field y = id;
  y.data += sc.delta * bump(g, 0.1).data;
  const Field v = bump(g, 0.7);
  CHECK(std::abs(korn_ratio(y, v, sc, mat) - korn_ratio(id, v, sc, mat)) <
        10.0 * sc.delta * korn_ratio(id, v, sc, mat));

  CHECK_THROWS_AS((void)korn_ratio(id, Field(g), sc, mat), std::invalid_argument);
}

TEST_CASE("rigidity report") {
  const auto g = std::make_shared<const Grid>(2, 9);
  const ScaleParams sc = scales_with(0.0125);
  const Field id = identity_field(g);

  const RigidityReport at_id = rigidity_report(id, sc);
  CHECK(at_id.u_h1 == 0.0);
  CHECK(at_id.delta_grad_inf == 0.0);
  CHECK(at_id.min_det == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(at_id.dist_so_l2 < 1e-12);

  // y = id + delta u: the rotation distance scales with delta.
  const Field u = bump(g, 0.2);
  double prev = std::numeric_limits<double>::infinity();
  for (double delta : {0.2, 0.1, 0.05}) {
    ScaleParams sd = sc;
    sd.delta = delta;
    Field y = id;
    y.data += delta * u.data;
    const RigidityReport rep = rigidity_report(y, sd);
    CHECK(rep.dist_so_l2 < prev);
    CHECK(rep.dist_so_l2 < 2.0 * delta * discrete_norms(u).h1_semi);
    prev = rep.dist_so_l2;
    // The report exposes the monitors used for threshold flags.
    CHECK(rep.u_h1 > 0.0);
    CHECK(rep.min_det > 0.0);
  }
}

TEST_CASE("fenchel residuals vanish along solutions and detect perturbations") {
  const auto g = std::make_shared<const Grid>(2, 9);

  // Linear run: the recovered functional matches the quadratic form exactly.
  const TrajectoryRecord lin = small_linear_run(g);
  for (const FenchelEntry& e : fenchel_residuals(lin)) {
    CHECK(e.residual >= -1e-10);
    CHECK(e.residual <= 1e-8 * (1.0 + std::abs(e.pairing)));
  }

  // A run with a pronounced velocity datum so the dissipation scale is
  // well above the perturbation threshold.
  TwoScaleConfig time{0.05, 0.05, 0.0125};
  ScaleParams sc = scales_with(time.tau, time.h);
  Field y0 = identity_field(g);
  y0.data += sc.delta * bump(g, 0.1).data;
  Field v0 = bump(g, 1.5);
  v0.data *= sc.delta;
  ForceSpec force;
  force.profile = bump(g, 1.0);
  force.profile.data *= sc.delta;
  RunOptions opts;
  const TrajectoryRecord rec = run_two_scale(time, y0, v0, force, sc, material_d2(), opts);
  const auto entries = fenchel_residuals(rec);
  for (const FenchelEntry& e : entries) {
    CHECK(e.residual >= -1e-10);
    CHECK(e.residual <= 1e-8 * (1.0 + std::abs(e.pairing)));
  }

  // Perturbing the increment leaves the inequality strictly slack.
  Field v = rec.increment(2);
  Field stripes(g);
  for (int node : g->interior_nodes()) {
    int coords[3];
    g->node_coords(node, coords);
    const double sign = (coords[0] % 2 == 0) ? 1.0 : -1.0;
    stripes.at(node, 0) = sign;
    stripes.at(node, 1) = (coords[1] % 2 == 0) ? 1.0 : -1.0;
  }
  const double scale = 0.01 * std::sqrt(lumped_norm2(v) / lumped_norm2(stripes));
  Field v_pert = v;
  v_pert.data += scale * stripes.data;
  const FenchelEntry pert = fenchel_residual_perturbed(rec, 2, v_pert);
  CHECK(pert.residual > 1e-4 * (1.0 + std::abs(pert.pairing)));
}

TEST_CASE("gamma probe: zero field, bump orders, isolated second-gradient order") {
  const auto g = std::make_shared<const Grid>(2, 9);
  const ScaleParams sc = scales_with(0.0125);
  const Material mat = material_d2();
  const std::vector<double> deltas{0.2, 0.1, 0.05, 0.025};

  const GammaProbe zero = gamma_probe(Field(g), Field(g), deltas, sc, mat);
  for (double e : zero.energy_gap.errors) CHECK(e == 0.0);
  for (double e : zero.dissipation_gap.errors) CHECK(e == 0.0);

  const Field u = bump(g, 0.1);
  const Field v = bump(g, 1.0);
  const GammaProbe probe = gamma_probe(u, v, deltas, sc, mat);
  CHECK(probe.energy_gap.fitted_slope >= 0.9);
  CHECK(probe.dissipation_gap.fitted_slope >= 0.9);
  // The isolated second-gradient term decays exactly like delta^{p(1-alpha)}.
  const double expect = mat.elastic.p_exp * (1.0 - sc.alpha);
  CHECK(std::abs(probe.second_grade_gap.fitted_slope - expect) < 1e-10);
}

TEST_CASE("time-delayed shadow of the refined ledger") {
  const auto g = std::make_shared<const Grid>(2, 7);
  TwoScaleConfig time{0.1, 0.05, 0.0125};  // two blocks
  ScaleParams sc = scales_with(time.tau, time.h);
  Field y0 = identity_field(g);
  y0.data += sc.delta * bump(g, 0.1).data;
  Field v0 = bump(g, 0.5);
  v0.data *= sc.delta;
  ForceSpec force;
  force.profile = bump(g, 1.0);
  force.profile.data *= sc.delta;
  RunOptions opts;
  opts.degiorgi = true;
  const TrajectoryRecord rec = run_two_scale(time, y0, v0, force, sc, material_d2(), opts);

  const TdShadow shadow = td_shadow(rec);
  REQUIRE(shadow.block_slack.size() == 2);
  CHECK(std::abs(shadow.telescoping_identity) < 1e-12);
  for (double s : shadow.block_slack) CHECK(s >= -1e-6 * rec.ledger.size());

  const TrajectoryRecord plain = small_nonlinear_run(g, false);
  CHECK_THROWS_AS((void)td_shadow(plain), std::invalid_argument);
}

TEST_CASE("displacement extraction") {
  const auto g = std::make_shared<const Grid>(2, 7);
  const TrajectoryRecord nl = small_nonlinear_run(g);
  const Field u = displacement_of(nl, nl.states.back());
  Field expect = nl.states.back();
  expect.data = (nl.states.back().data - identity_field(g).data) / nl.scales.delta;
  CHECK((u.data - expect.data).norm() == 0.0);

  const TrajectoryRecord lin = small_linear_run(g);
  CHECK((displacement_of(lin, lin.states.back()).data - lin.states.back().data).norm() == 0.0);
}
