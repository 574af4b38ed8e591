#include "viscoflow/grid.hpp"

#include <cmath>
#include <stdexcept>

namespace viscoflow {

Grid::Grid(int dim, int nodes_per_axis) : dim_(dim), n_(nodes_per_axis) {
  if (dim < 1 || dim > 3) throw std::invalid_argument("Grid: dimension must be 1, 2 or 3");
  if (n_ < 3) throw std::invalid_argument("Grid: need at least 3 nodes per axis");
  dx_ = 1.0 / static_cast<double>(n_ - 1);
  node_count_ = 1;
  cell_count_ = 1;
  for (int k = 0; k < dim_; ++k) {
    node_count_ *= n_;
    cell_count_ *= n_ - 1;
  }
  corners_ = 1 << dim_;

  interior_ordinal_.assign(node_count_, -1);
  int coords[3] = {0, 0, 0};
  for (int node = 0; node < node_count_; ++node) {
    node_coords(node, coords);
    bool boundary = false;
    for (int k = 0; k < dim_; ++k)
      if (coords[k] == 0 || coords[k] == n_ - 1) boundary = true;
    if (!boundary) {
      interior_ordinal_[node] = static_cast<int>(interior_nodes_.size());
      interior_nodes_.push_back(node);
    }
  }
}

int Grid::node_index(const int* coords) const {
  int idx = 0;
  for (int k = dim_ - 1; k >= 0; --k) idx = idx * n_ + coords[k];
  return idx;
}

void Grid::node_coords(int node, int* coords) const {
  for (int k = 0; k < dim_; ++k) {
    coords[k] = node % n_;
    node /= n_;
  }
}

Vec Grid::node_position(int node) const {
  int coords[3];
  node_coords(node, coords);
  Vec x(dim_);
  for (int k = 0; k < dim_; ++k) x(k) = coords[k] * dx_;
  return x;
}

bool Grid::is_boundary(int node) const { return interior_ordinal_[node] < 0; }

void Grid::cell_corners(int cell, int* out) const {
  int base[3] = {0, 0, 0};
  for (int k = 0; k < dim_; ++k) {
    base[k] = cell % (n_ - 1);
    cell /= n_ - 1;
  }
  for (int a = 0; a < corners_; ++a) {
    int coords[3];
    for (int k = 0; k < dim_; ++k) coords[k] = base[k] + ((a >> k) & 1);
    out[a] = node_index(coords);
  }
}

double Grid::corner_gradient_weight(int corner, int dir) const {
  const double sign = ((corner >> dir) & 1) ? 1.0 : -1.0;
  const double denom = static_cast<double>(1 << (dim_ - 1)) * dx_;
  return sign / denom;
}

Grid::HessianStencil Grid::hessian_stencil(int node) const {
  if (is_boundary(node))
    throw std::invalid_argument("hessian_stencil: node must be interior");
  HessianStencil st;
  const double inv2 = 1.0 / (dx_ * dx_);
  int coords[3];
  node_coords(node, coords);

  auto push = [&](const int* c, int j, int k, double w) {
    const int id = node_index(c);
    for (std::size_t i = 0; i < st.nodes.size(); ++i) {
      if (st.nodes[i] == id) {
        st.weights[i](j, k) += w;
        if (j != k) st.weights[i](k, j) += w;
        return;
      }
    }
    st.nodes.push_back(id);
    Mat m = Mat::Zero(dim_, dim_);
    m(j, k) += w;
    if (j != k) m(k, j) += w;
    st.weights.push_back(m);
  };

  int c[3];
  for (int m = 0; m < dim_; ++m) {
    for (int k = 0; k < 3; ++k) c[k] = coords[k];
    push(c, m, m, -2.0 * inv2);
    c[m] = coords[m] + 1;
    push(c, m, m, inv2);
    c[m] = coords[m] - 1;
    push(c, m, m, inv2);
  }
  const double inv4 = 0.25 * inv2;
  for (int m = 0; m < dim_; ++m)
    for (int l = m + 1; l < dim_; ++l)
      for (int sm = -1; sm <= 1; sm += 2)
        for (int sl = -1; sl <= 1; sl += 2) {
          for (int k = 0; k < 3; ++k) c[k] = coords[k];
          c[m] = coords[m] + sm;
          c[l] = coords[l] + sl;
          push(c, m, l, sm * sl * inv4);
        }
  return st;
}

Field identity_field(std::shared_ptr<const Grid> grid) {
  Field f(grid);
  for (int node = 0; node < grid->node_count(); ++node) f.value(node) = grid->node_position(node);
  return f;
}

Mat cell_gradient(const Field& f, int cell) {
  const Grid& g = *f.grid;
  const int d = g.dim();
  int corners[8];
  g.cell_corners(cell, corners);
  Mat grad = Mat::Zero(d, d);
  for (int a = 0; a < g.corners_per_cell(); ++a) {
    const auto v = f.value(corners[a]);
    for (int dir = 0; dir < d; ++dir) {
      const double w = g.corner_gradient_weight(a, dir);
      for (int c = 0; c < d; ++c) grad(c, dir) += v(c) * w;
    }
  }
  return grad;
}

std::vector<Mat> cell_gradients(const Field& f) {
  std::vector<Mat> out(f.grid->cell_count());
  for (int cell = 0; cell < f.grid->cell_count(); ++cell) out[cell] = cell_gradient(f, cell);
  return out;
}

Tensor3 node_hessian(const Field& f, int node) {
  const Grid& g = *f.grid;
  const int d = g.dim();
  const auto st = g.hessian_stencil(node);
  Tensor3 hess(d);
  for (std::size_t s = 0; s < st.nodes.size(); ++s) {
    const auto v = f.value(st.nodes[s]);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j)
        for (int k = 0; k < d; ++k) hess(i, j, k) += v(i) * st.weights[s](j, k);
  }
  return hess;
}

double integrate_cells(const Grid& grid, const std::vector<double>& cell_values) {
  if (static_cast<int>(cell_values.size()) != grid.cell_count())
    throw std::invalid_argument("integrate_cells: size mismatch");
  double s = 0.0;
  for (double v : cell_values) s += v;
  return s * std::pow(grid.dx(), grid.dim());
}

double integrate_nodes(const Grid& grid, const std::vector<double>& interior_values) {
  if (static_cast<int>(interior_values.size()) != grid.interior_count())
    throw std::invalid_argument("integrate_nodes: size mismatch");
  double s = 0.0;
  for (double v : interior_values) s += v;
  return s * std::pow(grid.dx(), grid.dim());
}

void apply_dirichlet_identity(Field& y) {
  const Grid& g = *y.grid;
  for (int node = 0; node < g.node_count(); ++node)
    if (g.is_boundary(node)) y.value(node) = g.node_position(node);
}

void apply_dirichlet_zero(Field& u) {
  const Grid& g = *u.grid;
  for (int node = 0; node < g.node_count(); ++node)
    if (g.is_boundary(node)) u.value(node).setZero();
}

double min_det(const Field& y) {
  double m = std::numeric_limits<double>::infinity();
  for (int cell = 0; cell < y.grid->cell_count(); ++cell)
    m = std::min(m, cell_gradient(y, cell).determinant());
  return m;
}

FieldNorms discrete_norms(const Field& u) {
  const Grid& g = *u.grid;
  const double wq = std::pow(g.dx(), g.dim());
  FieldNorms out;
  double l2 = 0.0;
  for (int node = 0; node < g.node_count(); ++node) l2 += u.value(node).squaredNorm();
  out.l2 = std::sqrt(l2 * wq);
  double h1 = 0.0;
  for (int cell = 0; cell < g.cell_count(); ++cell) {
    const double s = cell_gradient(u, cell).squaredNorm();
    h1 += s;
    out.linf_grad = std::max(out.linf_grad, std::sqrt(s));
  }
  out.h1_semi = std::sqrt(h1 * wq);
  return out;
}

double h1_distance(const Field& a, const Field& b) {
  if (a.grid->node_count() != b.grid->node_count() || a.dim() != b.dim())
    throw std::invalid_argument("h1_distance: fields live on different grids");
  Field diff = a;
  diff.data -= b.data;
  const FieldNorms n = discrete_norms(diff);
  return std::sqrt(n.l2 * n.l2 + n.h1_semi * n.h1_semi);
}

Eigen::VectorXd gather_interior(const Field& f) {
  const Grid& g = *f.grid;
  const int d = g.dim();
  Eigen::VectorXd out(g.interior_count() * d);
  for (int i = 0; i < g.interior_count(); ++i)
    out.segment(i * d, d) = f.value(g.interior_nodes()[i]);
  return out;
}

void scatter_interior(const Eigen::VectorXd& dofs, Field& f) {
  const Grid& g = *f.grid;
  const int d = g.dim();
  if (dofs.size() != g.interior_count() * d)
    throw std::invalid_argument("scatter_interior: size mismatch");
  for (int i = 0; i < g.interior_count(); ++i)
    f.value(g.interior_nodes()[i]) = dofs.segment(i * d, d);
}

void add_interior(Field& f, const Eigen::VectorXd& dofs, double scale) {
  const Grid& g = *f.grid;
  const int d = g.dim();
  for (int i = 0; i < g.interior_count(); ++i)
    f.value(g.interior_nodes()[i]) += scale * dofs.segment(i * d, d);
}

}  // namespace viscoflow
