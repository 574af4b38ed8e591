#pragma once

#include "viscoflow/small_matrix.hpp"

#include <Eigen/Core>

#include <memory>
#include <vector>

namespace viscoflow {

/// Structured grid on [0,1]^d with n nodes per axis. Boundary nodes are those
/// with any coordinate index in {0, n-1}. Node linearization is column-major
/// (first axis fastest).
class Grid {
 public:
  Grid(int dim, int nodes_per_axis);

  int dim() const { return dim_; }
  int n() const { return n_; }
  double dx() const { return dx_; }

  int node_count() const { return node_count_; }
  int cell_count() const { return cell_count_; }
  int interior_count() const { return static_cast<int>(interior_nodes_.size()); }
  int corners_per_cell() const { return corners_; }

  int node_index(const int* coords) const;
  void node_coords(int node, int* coords) const;
  Vec node_position(int node) const;
  bool is_boundary(int node) const;

  const std::vector<int>& interior_nodes() const { return interior_nodes_; }
  /// Interior ordinal of a node, -1 for boundary nodes.
  int interior_ordinal(int node) const { return interior_ordinal_[node]; }

  /// Corner node ids of a cell, in bit order of the 2^d offsets.
  void cell_corners(int cell, int* out) const;
  /// Per-corner gradient weight: d(cell gradient)_dir / d(corner value).
  double corner_gradient_weight(int corner, int dir) const;

  /// Neighborhood stencil of the second-difference operator at an interior
  /// node: neighbor node ids plus the symmetric d x d weight matrices so that
  /// hess(i,j,k) = sum_nbr value(nbr, i) * weight[nbr](j,k).
  struct HessianStencil {
    std::vector<int> nodes;
    std::vector<Mat> weights;
  };
  HessianStencil hessian_stencil(int interior_node) const;

 private:
  int dim_;
  int n_;
  double dx_;
  int node_count_;
  int cell_count_;
  int corners_;
  std::vector<int> interior_nodes_;
  std::vector<int> interior_ordinal_;
};

/// Nodal vector field on a grid; node-major storage [node*d + c].
struct Field {
  std::shared_ptr<const Grid> grid;
  Eigen::VectorXd data;

  Field() = default;
  explicit Field(std::shared_ptr<const Grid> g)
      : grid(std::move(g)), data(Eigen::VectorXd::Zero(grid->node_count() * grid->dim())) {}

  int dim() const { return grid->dim(); }
  double& at(int node, int c) { return data[node * grid->dim() + c]; }
  double at(int node, int c) const { return data[node * grid->dim() + c]; }
  Eigen::VectorBlock<Eigen::VectorXd> value(int node) {
    return data.segment(node * grid->dim(), grid->dim());
  }
  Eigen::VectorBlock<const Eigen::VectorXd> value(int node) const {
    return data.segment(node * grid->dim(), grid->dim());
  }
};

Field identity_field(std::shared_ptr<const Grid> grid);

/// Gradient of the multilinear interpolant averaged at the cell center.
/// Exact on affine fields.
Mat cell_gradient(const Field& f, int cell);
std::vector<Mat> cell_gradients(const Field& f);

/// Central second differences at an interior node. Exact on quadratics.
Tensor3 node_hessian(const Field& f, int node);

/// Midpoint quadrature over cells / interior nodes: sum * dx^d.
double integrate_cells(const Grid& grid, const std::vector<double>& cell_values);
double integrate_nodes(const Grid& grid, const std::vector<double>& interior_values);

void apply_dirichlet_identity(Field& y);
void apply_dirichlet_zero(Field& u);

/// Minimum of det(cell_gradient) over all cells.
double min_det(const Field& y);

struct FieldNorms {
  double l2 = 0.0;        // nodal quadrature over all nodes
  double h1_semi = 0.0;   // cell-gradient L2 norm
  double linf_grad = 0.0; // max Frobenius norm of cell gradients
};
FieldNorms discrete_norms(const Field& u);

/// sqrt(l2^2 + h1_semi^2) of the difference a - b; the comparison norm used
/// across trajectories.
double h1_distance(const Field& a, const Field& b);

// Interior degree-of-freedom packing shared by assembly and solvers.
Eigen::VectorXd gather_interior(const Field& f);
void scatter_interior(const Eigen::VectorXd& dofs, Field& f);
void add_interior(Field& f, const Eigen::VectorXd& dofs, double scale = 1.0);

}  // namespace viscoflow
