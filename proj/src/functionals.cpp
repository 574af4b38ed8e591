#include "viscoflow/functionals.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace viscoflow {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double quad_weight(const Grid& g) { return std::pow(g.dx(), g.dim()); }

void check_same_grid(const Field& a, const Field& b, const char* who) {
  if (a.grid.get() != b.grid.get() &&
      (a.grid->dim() != b.grid->dim() || a.grid->n() != b.grid->n()))
    throw std::invalid_argument(std::string(who) + ": fields on different grids");
}

// Scatters stress-times-shape contributions of one cell into an interior-dof
// vector.
void scatter_cell_stress(const Grid& g, const int* corners, const Mat& stress, double weight,
                         Eigen::VectorXd& out) {
  const int d = g.dim();
  for (int a = 0; a < g.corners_per_cell(); ++a) {
    const int ord = g.interior_ordinal(corners[a]);
    if (ord < 0) continue;
    for (int c = 0; c < d; ++c) {
      double s = 0.0;
      for (int j = 0; j < d; ++j) s += stress(c, j) * g.corner_gradient_weight(a, j);
      out[ord * d + c] += weight * s;
    }
  }
}

// Adds the cell-local Hessian block K[(a,c),(b,e)] = w * sum_{j,l}
// T(c,j,e,l) g_a[j] g_b[l] for a fourth-order tangent given through its
// action on unit directions.
template <typename TangentApply>
void add_cell_tangent(const Grid& g, const int* corners, double weight, TangentApply&& tangent,
                      std::vector<Eigen::Triplet<double>>& trips) {
  const int d = g.dim();
  const int nc = g.corners_per_cell();
  // tangent4[e][l] = tangent applied to the unit matrix E^{el}
  Mat tangent4[3][3];
  for (int e = 0; e < d; ++e)
    for (int l = 0; l < d; ++l) {
      Mat unit = Mat::Zero(d, d);
      unit(e, l) = 1.0;
      tangent4[e][l] = tangent(unit);
    }
  for (int a = 0; a < nc; ++a) {
    const int orda = g.interior_ordinal(corners[a]);
    if (orda < 0) continue;
    for (int b = 0; b < nc; ++b) {
      const int ordb = g.interior_ordinal(corners[b]);
      if (ordb < 0) continue;
      for (int c = 0; c < d; ++c)
        for (int e = 0; e < d; ++e) {
          double k = 0.0;
          for (int j = 0; j < d; ++j) {
            const double ga = g.corner_gradient_weight(a, j);
            for (int l = 0; l < d; ++l)
              k += tangent4[e][l](c, j) * ga * g.corner_gradient_weight(b, l);
          }
          if (k != 0.0) trips.emplace_back(orda * d + c, ordb * d + e, weight * k);
        }
    }
  }
}

}  // namespace

double scaled_energy_elastic(const Field& y, const ScaleParams& scales, const Material& mat) {
  const Grid& g = *y.grid;
  double acc = 0.0;
  for (int cell = 0; cell < g.cell_count(); ++cell) {
    const double w = elastic_density(cell_gradient(y, cell), mat.elastic);
    if (!std::isfinite(w)) return kInf;
    acc += w;
  }
  return acc * quad_weight(g) / (scales.delta * scales.delta);
}

double scaled_energy_second_grade(const Field& y, const ScaleParams& scales,
                                  const Material& mat) {
  const Grid& g = *y.grid;
  double acc = 0.0;
  for (int node : g.interior_nodes())
    acc += second_grade_density(node_hessian(y, node), mat.elastic);
  return acc * quad_weight(g) * std::pow(scales.delta, -scales.alpha * mat.elastic.p_exp);
}

double scaled_energy(const Field& y, const ScaleParams& scales, const Material& mat) {
  const double el = scaled_energy_elastic(y, scales, mat);
  if (!std::isfinite(el)) return kInf;
  return el + scaled_energy_second_grade(y, scales, mat);
}

double linearized_energy(const Field& u, const Material& mat) {
  const Grid& g = *u.grid;
  double acc = 0.0;
  for (int cell = 0; cell < g.cell_count(); ++cell) {
    const Mat e = sym(cell_gradient(u, cell));
    acc += 0.5 * frobenius_dot(e, elastic_moduli_apply(e, mat.elastic));
  }
  return acc * quad_weight(g);
}

double scaled_dissipation(const Field& y, const Field& v, const ScaleParams& scales,
                          const Material& mat) {
  check_same_grid(y, v, "scaled_dissipation");
  const Grid& g = *y.grid;
  double acc = 0.0;
  for (int cell = 0; cell < g.cell_count(); ++cell)
    acc += dissipation_density(cell_gradient(y, cell), cell_gradient(v, cell), mat.viscosity);
  return acc * quad_weight(g) / (scales.delta * scales.delta);
}

double linearized_dissipation(const Field& v, const Material& mat) {
  const Grid& g = *v.grid;
  double acc = 0.0;
  for (int cell = 0; cell < g.cell_count(); ++cell) {
    const Mat e = sym(cell_gradient(v, cell));
    acc += 0.5 * frobenius_dot(e, viscosity_apply_constant(e, mat.viscosity));
  }
  return acc * quad_weight(g);
}

double lumped_inner(const Field& a, const Field& b) {
  check_same_grid(a, b, "lumped_inner");
  const Grid& g = *a.grid;
  double acc = 0.0;
  for (int node : g.interior_nodes()) acc += a.value(node).dot(b.value(node));
  return acc * quad_weight(g);
}

double lumped_norm2(const Field& a) { return lumped_inner(a, a); }

// --- NonlinearStepCost ------------------------------------------------------

NonlinearStepCost::NonlinearStepCost(StepSetup setup) : setup_(std::move(setup)) {
  setup_.material.elastic.validate(setup_.y_prev.grid->dim());
  setup_.material.viscosity.validate();
  setup_.scales.validate(setup_.material.elastic.p_exp);
}

double NonlinearStepCost::value(const Field& state, EnergyBreakdown* bd) const {
  const StepSetup& s = setup_;
  const double tau = s.scales.tau;
  const double d2 = s.scales.delta * s.scales.delta;

  EnergyBreakdown b;
  b.elastic_W = scaled_energy_elastic(state, s.scales, s.material);
  if (!std::isfinite(b.elastic_W)) {
    b.total = kInf;
    if (bd) *bd = b;
    return kInf;
  }
  b.second_grade_P = scaled_energy_second_grade(state, s.scales, s.material);

  Field v = state;
  v.data = (state.data - s.y_prev.data) / tau;
  b.dissipation_R = tau * scaled_dissipation(s.y_prev, v, s.scales, s.material);

  Field vw = v;
  vw.data -= s.w.data;
  b.inertial = tau * s.scales.rho / (2.0 * s.scales.h * d2) * lumped_norm2(vw);
  b.force_work = tau / d2 * lumped_inner(s.f, v);
  b.total = b.elastic_W + b.second_grade_P + b.dissipation_R + b.inertial - b.force_work;
  if (bd) *bd = b;
  return b.total;
}

Eigen::VectorXd NonlinearStepCost::gradient(const Field& state) const {
  const StepSetup& s = setup_;
  const Grid& g = *state.grid;
  const int d = g.dim();
  const double tau = s.scales.tau;
  const double d2 = s.scales.delta * s.scales.delta;
  const double wq = quad_weight(g);
  const double scale_p = std::pow(s.scales.delta, -s.scales.alpha * s.material.elastic.p_exp);

  Eigen::VectorXd grad = Eigen::VectorXd::Zero(g.interior_count() * d);
  int corners[8];
  for (int cell = 0; cell < g.cell_count(); ++cell) {
    g.cell_corners(cell, corners);
    const Mat fy = cell_gradient(state, cell);
    if (fy.determinant() <= 0.0)
      throw std::domain_error("gradient: orientation violated on a cell");
    const Mat fprev = cell_gradient(s.y_prev, cell);
    const Mat fv = (fy - fprev) / tau;
    const Mat stress =
        elastic_stress(fy, s.material.elastic) / d2 +
        viscous_stress(fprev, fv, s.material.viscosity) / d2;
    scatter_cell_stress(g, corners, stress, wq, grad);
  }

  for (int node : g.interior_nodes()) {
    const Tensor3 hyper = hyperstress(node_hessian(state, node), s.material.elastic);
    const auto st = g.hessian_stencil(node);
    for (std::size_t r = 0; r < st.nodes.size(); ++r) {
      const int ord = g.interior_ordinal(st.nodes[r]);
      if (ord < 0) continue;
      for (int c = 0; c < d; ++c) {
        double acc = 0.0;
        for (int j = 0; j < d; ++j)
          for (int k = 0; k < d; ++k) acc += hyper(c, j, k) * st.weights[r](j, k);
        grad[ord * d + c] += wq * scale_p * acc;
      }
    }
  }

  const double inertia = s.scales.rho / (s.scales.h * d2);
  for (int i = 0; i < g.interior_count(); ++i) {
    const int node = g.interior_nodes()[i];
    const auto vy = state.value(node);
    const auto vp = s.y_prev.value(node);
    for (int c = 0; c < d; ++c) {
      const double v = (vy(c) - vp(c)) / tau;
      grad[i * d + c] += wq * (inertia * (v - s.w.at(node, c)) - s.f.at(node, c) / d2);
    }
  }
  return grad;
}

Eigen::SparseMatrix<double> NonlinearStepCost::hessian(const Field& state) const {
  const StepSetup& s = setup_;
  const Grid& g = *state.grid;
  const int d = g.dim();
  const int ndof = g.interior_count() * d;
  const double tau = s.scales.tau;
  const double d2 = s.scales.delta * s.scales.delta;
  const double wq = quad_weight(g);
  const double scale_p = std::pow(s.scales.delta, -s.scales.alpha * s.material.elastic.p_exp);
  const double p = s.material.elastic.p_exp;
  const double cp = s.material.elastic.c_P;

  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(g.cell_count()) * g.corners_per_cell() *
                    g.corners_per_cell() * d * d +
                static_cast<std::size_t>(g.interior_count()) * 81 + ndof);

  int corners[8];
  for (int cell = 0; cell < g.cell_count(); ++cell) {
    g.cell_corners(cell, corners);
    const Mat fy = cell_gradient(state, cell);
    if (fy.determinant() <= 0.0)
      throw std::domain_error("hessian: orientation violated on a cell");
    const Mat fprev = cell_gradient(s.y_prev, cell);
    add_cell_tangent(
        g, corners, wq,
        [&](const Mat& h) -> Mat {
          return elastic_stress_tangent(fy, h, s.material.elastic) / d2 +
                 viscous_stress_tangent(fprev, h, s.material.viscosity) / (d2 * tau);
        },
        trips);
  }

  for (int node : g.interior_nodes()) {
    const Tensor3 hess = node_hessian(state, node);
    const double n2 = hess.squared_norm();
    if (n2 == 0.0) continue;
    const auto st = g.hessian_stencil(node);
    const std::size_t ns = st.nodes.size();
    // gamma[r](c) = <G(c,:,:), W_r>, omega[r][s] = <W_r, W_s>
    std::vector<Vec> gamma(ns);
    for (std::size_t r = 0; r < ns; ++r) {
      gamma[r] = Vec::Zero(d);
      for (int c = 0; c < d; ++c) {
        double acc = 0.0;
        for (int j = 0; j < d; ++j)
          for (int k = 0; k < d; ++k) acc += hess(c, j, k) * st.weights[r](j, k);
        gamma[r](c) = acc;
      }
    }
    const double coef1 = cp * p * (p - 2.0) * std::pow(n2, 0.5 * p - 2.0);
    const double coef2 = cp * p * std::pow(n2, 0.5 * (p - 2.0));
    for (std::size_t r = 0; r < ns; ++r) {
      const int ordr = g.interior_ordinal(st.nodes[r]);
      if (ordr < 0) continue;
      for (std::size_t q = 0; q < ns; ++q) {
        const int ordq = g.interior_ordinal(st.nodes[q]);
        if (ordq < 0) continue;
        const double omega = frobenius_dot(st.weights[r], st.weights[q]);
        for (int c = 0; c < d; ++c)
          for (int e = 0; e < d; ++e) {
            double k = coef1 * gamma[r](c) * gamma[q](e);
            if (c == e) k += coef2 * omega;
            if (k != 0.0)
              trips.emplace_back(ordr * d + c, ordq * d + e, wq * scale_p * k);
          }
      }
    }
  }

  const double inertia = wq * s.scales.rho / (s.scales.h * d2 * tau);
  for (int i = 0; i < ndof; ++i) trips.emplace_back(i, i, inertia);

  Eigen::SparseMatrix<double> out(ndof, ndof);
  out.setFromTriplets(trips.begin(), trips.end());
  return out;
}

double NonlinearStepCost::orientation_margin(const Field& state) const {
  return min_det(state);
}

double NonlinearStepCost::rounding_scale() const {
  const ScaleParams& sc = setup_.scales;
  const double d2 = sc.delta * sc.delta;
  return 1.0 / d2 + std::pow(sc.delta, -sc.alpha * setup_.material.elastic.p_exp) +
         sc.tau * sc.rho / (2.0 * sc.h * d2);
}

// --- LinearStepCost ---------------------------------------------------------

LinearStepCost::LinearStepCost(StepSetup setup) : setup_(std::move(setup)) {
  setup_.material.elastic.validate(setup_.y_prev.grid->dim());
  setup_.material.viscosity.validate();
}

double LinearStepCost::value(const Field& state, EnergyBreakdown* bd) const {
  const StepSetup& s = setup_;
  const double tau = s.scales.tau;

  EnergyBreakdown b;
  b.elastic_W = linearized_energy(state, s.material);
  Field v = state;
  v.data = (state.data - s.y_prev.data) / tau;
  b.dissipation_R = tau * linearized_dissipation(v, s.material);
  Field vw = v;
  vw.data -= s.w.data;
  b.inertial = tau * s.scales.rho / (2.0 * s.scales.h) * lumped_norm2(vw);
  b.force_work = tau * lumped_inner(s.f, v);
  b.total = b.elastic_W + b.dissipation_R + b.inertial - b.force_work;
  if (bd) *bd = b;
  return b.total;
}

Eigen::VectorXd LinearStepCost::gradient(const Field& state) const {
  const StepSetup& s = setup_;
  const Grid& g = *state.grid;
  const int d = g.dim();
  const double tau = s.scales.tau;
  const double wq = quad_weight(g);

  Eigen::VectorXd grad = Eigen::VectorXd::Zero(g.interior_count() * d);
  int corners[8];
  for (int cell = 0; cell < g.cell_count(); ++cell) {
    g.cell_corners(cell, corners);
    const Mat eu = sym(cell_gradient(state, cell));
    const Mat eprev = sym(cell_gradient(s.y_prev, cell));
    const Mat ev = (eu - eprev) / tau;
    const Mat stress = elastic_moduli_apply(eu, s.material.elastic) +
                       viscosity_apply_constant(ev, s.material.viscosity);
    scatter_cell_stress(g, corners, stress, wq, grad);
  }

  const double inertia = s.scales.rho / s.scales.h;
  for (int i = 0; i < g.interior_count(); ++i) {
    const int node = g.interior_nodes()[i];
    for (int c = 0; c < d; ++c) {
      const double v = (state.at(node, c) - s.y_prev.at(node, c)) / tau;
      grad[i * d + c] += wq * (inertia * (v - s.w.at(node, c)) - s.f.at(node, c));
    }
  }
  return grad;
}

Eigen::SparseMatrix<double> LinearStepCost::hessian(const Field& state) const {
  const StepSetup& s = setup_;
  const Grid& g = *state.grid;
  const int d = g.dim();
  const int ndof = g.interior_count() * d;
  const double tau = s.scales.tau;
  const double wq = quad_weight(g);

  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(g.cell_count()) * g.corners_per_cell() *
                    g.corners_per_cell() * d * d +
                ndof);
  int corners[8];
  for (int cell = 0; cell < g.cell_count(); ++cell) {
    g.cell_corners(cell, corners);
    add_cell_tangent(
        g, corners, wq,
        [&](const Mat& h) -> Mat {
          const Mat e = sym(h);
          return elastic_moduli_apply(e, s.material.elastic) +
                 viscosity_apply_constant(e, s.material.viscosity) / tau;
        },
        trips);
  }
  const double inertia = wq * s.scales.rho / (s.scales.h * tau);
  for (int i = 0; i < ndof; ++i) trips.emplace_back(i, i, inertia);

  Eigen::SparseMatrix<double> out(ndof, ndof);
  out.setFromTriplets(trips.begin(), trips.end());
  return out;
}

// --- wrappers ----------------------------------------------------------------

double cost_nonlinear(const Field& y, const StepSetup& setup, EnergyBreakdown* bd) {
  return NonlinearStepCost(setup).value(y, bd);
}

double cost_linear(const Field& u, const StepSetup& setup, EnergyBreakdown* bd) {
  return LinearStepCost(setup).value(u, bd);
}

namespace {
Field field_from_interior(const Grid& g, const Field& like, const Eigen::VectorXd& dofs) {
  Field out(like.grid);
  out.data.setZero();
  scatter_interior(dofs, out);
  (void)g;
  return out;
}
}  // namespace

Field grad_cost_nonlinear(const Field& y, const StepSetup& setup) {
  NonlinearStepCost cost(setup);
  return field_from_interior(cost.grid(), y, cost.gradient(y));
}

Field grad_cost_linear(const Field& u, const StepSetup& setup) {
  LinearStepCost cost(setup);
  return field_from_interior(cost.grid(), u, cost.gradient(u));
}

Field hess_action_nonlinear(const Field& y, const StepSetup& setup, const Field& direction) {
  NonlinearStepCost cost(setup);
  const Eigen::VectorXd hd = cost.hessian(y) * gather_interior(direction);
  return field_from_interior(cost.grid(), y, hd);
}

Field hess_action_linear(const Field& u, const StepSetup& setup, const Field& direction) {
  LinearStepCost cost(setup);
  const Eigen::VectorXd hd = cost.hessian(u) * gather_interior(direction);
  return field_from_interior(cost.grid(), u, hd);
}

// --- energy gradients --------------------------------------------------------

Eigen::VectorXd scaled_energy_gradient(const Field& y, const ScaleParams& scales,
                                       const Material& mat) {
  const Grid& g = *y.grid;
  const int d = g.dim();
  const double d2 = scales.delta * scales.delta;
  const double wq = quad_weight(g);
  const double scale_p = std::pow(scales.delta, -scales.alpha * mat.elastic.p_exp);

  Eigen::VectorXd grad = Eigen::VectorXd::Zero(g.interior_count() * d);
  int corners[8];
  for (int cell = 0; cell < g.cell_count(); ++cell) {
    g.cell_corners(cell, corners);
    const Mat fy = cell_gradient(y, cell);
    if (fy.determinant() <= 0.0)
      throw std::domain_error("scaled_energy_gradient: orientation violated");
    scatter_cell_stress(g, corners, elastic_stress(fy, mat.elastic) / d2, wq, grad);
  }
  for (int node : g.interior_nodes()) {
    const Tensor3 hyper = hyperstress(node_hessian(y, node), mat.elastic);
    const auto st = g.hessian_stencil(node);
    for (std::size_t r = 0; r < st.nodes.size(); ++r) {
      const int ord = g.interior_ordinal(st.nodes[r]);
      if (ord < 0) continue;
      for (int c = 0; c < d; ++c) {
        double acc = 0.0;
        for (int j = 0; j < d; ++j)
          for (int k = 0; k < d; ++k) acc += hyper(c, j, k) * st.weights[r](j, k);
        grad[ord * d + c] += wq * scale_p * acc;
      }
    }
  }
  return grad;
}

Eigen::VectorXd linearized_energy_gradient(const Field& u, const Material& mat) {
  const Grid& g = *u.grid;
  const double wq = quad_weight(g);
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(g.interior_count() * g.dim());
  int corners[8];
  for (int cell = 0; cell < g.cell_count(); ++cell) {
    g.cell_corners(cell, corners);
    const Mat eu = sym(cell_gradient(u, cell));
    scatter_cell_stress(g, corners, elastic_moduli_apply(eu, mat.elastic), wq, grad);
  }
  return grad;
}

// --- dissipation matrix and dual ----------------------------------------------

Eigen::SparseMatrix<double> dissipation_matrix(const Field& y, const ScaleParams& scales,
                                               const Material& mat, bool unit_scale) {
  const Grid& g = *y.grid;
  const int d = g.dim();
  const int ndof = g.interior_count() * d;
  const double wq = quad_weight(g);
  const double scale = unit_scale ? 1.0 : 1.0 / (scales.delta * scales.delta);

  std::vector<Eigen::Triplet<double>> trips;
  int corners[8];
  for (int cell = 0; cell < g.cell_count(); ++cell) {
    g.cell_corners(cell, corners);
    const Mat fy = cell_gradient(y, cell);
    add_cell_tangent(
        g, corners, wq * scale,
        [&](const Mat& h) -> Mat { return viscous_stress_tangent(fy, h, mat.viscosity); },
        trips);
  }
  Eigen::SparseMatrix<double> out(ndof, ndof);
  out.setFromTriplets(trips.begin(), trips.end());
  return out;
}

Eigen::SparseMatrix<double> linearized_dissipation_matrix(const Grid& g, const Material& mat) {
  const int d = g.dim();
  const int ndof = g.interior_count() * d;
  const double wq = quad_weight(g);
  std::vector<Eigen::Triplet<double>> trips;
  int corners[8];
  for (int cell = 0; cell < g.cell_count(); ++cell) {
    g.cell_corners(cell, corners);
    add_cell_tangent(
        g, corners, wq,
        [&](const Mat& h) -> Mat { return viscosity_apply_constant(sym(h), mat.viscosity); },
        trips);
  }
  Eigen::SparseMatrix<double> out(ndof, ndof);
  out.setFromTriplets(trips.begin(), trips.end());
  return out;
}

DualDissipation::DualDissipation(const Field& y, const ScaleParams& scales, const Material& mat)
    : a_(dissipation_matrix(y, scales, mat)) {
  factorize();
}

DualDissipation::DualDissipation(const Grid& grid, const Material& mat)
    : a_(linearized_dissipation_matrix(grid, mat)) {
  factorize();
}

void DualDissipation::factorize() {
  ldlt_.compute(a_);
  if (ldlt_.info() != Eigen::Success)
    throw std::runtime_error(
        "DualDissipation: dissipation form is numerically singular (Korn failure)");
}

Eigen::VectorXd DualDissipation::maximizer(const Eigen::VectorXd& xi) const {
  Eigen::VectorXd z = ldlt_.solve(xi);
  z += ldlt_.solve(xi - a_ * z);  // one step of iterative refinement
  return z;
}

double DualDissipation::evaluate(const Eigen::VectorXd& xi) const {
  return 0.5 * xi.dot(maximizer(xi));
}

double dual_dissipation(const Field& y, const Eigen::VectorXd& xi, const ScaleParams& scales,
                        const Material& mat) {
  return DualDissipation(y, scales, mat).evaluate(xi);
}

double dual_dissipation(const Field& y, const Field& xi, const ScaleParams& scales,
                        const Material& mat) {
  const Eigen::VectorXd covector = quad_weight(*xi.grid) * gather_interior(xi);
  return DualDissipation(y, scales, mat).evaluate(covector);
}

}  // namespace viscoflow
