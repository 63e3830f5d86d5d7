#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "koopman_hjb/basis.hpp"

namespace koopman_hjb {

/// Raw (pre-orthonormalization) spline tabulation at quadrature nodes, stored
/// cell-locally: every node of a cell sees the same n_local active functions.
struct RawTable {
  int dim = 0;
  int n_raw = 0;
  int n_local = 0;
  int n_nodes = 0;
  std::vector<int> cell_begin;   // node range of cell c: [cell_begin[c], cell_begin[c+1])
  std::vector<int> cell_active;  // n_cells x n_local raw indices
  std::vector<double> values;    // n_nodes x n_local
  std::vector<double> gradients; // (n_nodes x dim) x n_local
  // Cells touching each raw function, ascending, with the slot of the
  // function inside that cell's active list.
  std::vector<int> support_begin;
  std::vector<int> support_cell;
  std::vector<int> support_slot;

  int n_cells() const { return static_cast<int>(cell_begin.size()) - 1; }
  const int* active(int cell) const { return cell_active.data() + cell * n_local; }
  const double* node_values(int q) const { return values.data() + q * n_local; }
  const double* node_gradient(int q, int axis) const {
    return gradients.data() + (q * dim + axis) * n_local;
  }
};

RawTable tabulate_raw(const TensorSplineBasis& basis, const QuadratureGrid& grid);

/// Per-node local field of length n_nodes * n_local (e.g. values, b·∇φ).
using LocalField = std::vector<double>;

/// Local field of the directional derivative `direction(x_q) · ∇φ_a(x_q)`;
/// `direction` is dim x n_nodes.
LocalField directional_field(const RawTable& table, const Eigen::MatrixXd& direction);
/// Local field of ∂φ_a/∂x_axis.
LocalField gradient_field(const RawTable& table, int axis);
/// Local field g(x_q) · left_a(x_q) for a per-node scalar g.
LocalField scaled_field(const RawTable& table, std::span<const double> left,
                        const Eigen::VectorXd& node_scalar);

namespace kernels {

// Two implementations of every assembly kernel. `serial` scatters cell by cell
// and is the reference; `omp` gathers per output column / node in parallel.
// Both visit cells and nodes in the same ascending order for each entry.

namespace serial {
/// out(i, j) = Σ_q scale_q · left_i(x_q) · right_j(x_q)
Eigen::MatrixXd pair_sum(const RawTable& table, std::span<const double> left,
                         std::span<const double> right,
                         std::span<const double> scale);
/// out(i) = Σ_q scale_q · left_i(x_q)
Eigen::VectorXd load_sum(const RawTable& table, std::span<const double> left,
                         std::span<const double> scale);
/// out_q = Σ_{a,b} left_a(x_q) · S(active_a, active_b) · right_b(x_q)
Eigen::VectorXd node_bilinear(const RawTable& table, std::span<const double> left,
                              std::span<const double> right,
                              const Eigen::MatrixXd& S);
}  // namespace serial

namespace omp {
Eigen::MatrixXd pair_sum(const RawTable& table, std::span<const double> left,
                         std::span<const double> right,
                         std::span<const double> scale);
Eigen::VectorXd load_sum(const RawTable& table, std::span<const double> left,
                         std::span<const double> scale);
Eigen::VectorXd node_bilinear(const RawTable& table, std::span<const double> left,
                              std::span<const double> right,
                              const Eigen::MatrixXd& S);
}  // namespace omp

}  // namespace kernels

/// Applies KOOPMAN_HJB_THREADS (if set) as the OpenMP thread cap. Returns the
/// active thread count.
int configure_threads_from_env();

}  // namespace koopman_hjb
