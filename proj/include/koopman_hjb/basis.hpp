#pragma once

#include <vector>

#include <Eigen/Dense>

namespace koopman_hjb {

/// Axis-aligned box Ω = Π [lower_k, upper_k]; dimensions 1 and 2 only.
class BoxDomain {
 public:
  BoxDomain(std::vector<double> lower, std::vector<double> upper);

  int dim() const { return static_cast<int>(lower_.size()); }
  const std::vector<double>& lower() const { return lower_; }
  const std::vector<double>& upper() const { return upper_; }
  double volume() const;
  /// Membership in the closure, with an absolute slack per coordinate.
  bool contains(const Eigen::VectorXd& x, double slack = 0.0) const;
  bool contains_origin() const;

  bool operator==(const BoxDomain&) const = default;

 private:
  std::vector<double> lower_;
  std::vector<double> upper_;
};

/// Clamped B-spline space on one interval.
struct SplineSpec1D {
  double lower = 0.0;
  double upper = 1.0;
  int n_grid = 2;   // grid points including both ends
  int degree = 1;
  int n_basis = 2;  // n_grid + degree - 1
  std::vector<double> knots;

  int n_cells() const { return n_grid - 1; }
  /// Knot span s with knots[s] <= x < knots[s+1]; the right end maps to the
  /// last non-degenerate span.
  int find_span(double x) const;
  /// Values and first derivatives of the degree+1 basis functions that are
  /// nonzero on `span` (indices span-degree .. span).
  void eval_nonzero(int span, double x, double* values,
                    double* derivatives) const;
};

SplineSpec1D make_clamped_knots(double lower, double upper, int n_grid,
                                int degree);

struct ValueAndDerivative {
  double value = 0.0;
  double derivative = 0.0;
};

ValueAndDerivative bspline_eval(const SplineSpec1D& spec, int index, double x);

struct ValueAndGradient {
  double value = 0.0;
  Eigen::VectorXd gradient;
};

/// Tensor products of per-axis clamped splines. Flat indices run with axis 0
/// fastest.
class TensorSplineBasis {
 public:
  TensorSplineBasis(BoxDomain domain, std::vector<SplineSpec1D> specs);
  static TensorSplineBasis uniform(const BoxDomain& domain, int n_grid,
                                   int degree);

  const BoxDomain& domain() const { return domain_; }
  const std::vector<SplineSpec1D>& specs() const { return specs_; }
  int dim() const { return domain_.dim(); }
  int n_total() const { return n_total_; }
  /// Number of basis functions nonzero on a single cell.
  int n_local() const { return n_local_; }
  int n_cells() const { return n_cells_; }

  std::vector<int> multi_index(int flat) const;
  int flat_index(const std::vector<int>& multi) const;

  std::vector<int> cell_multi_index(int cell) const;
  int cell_index(const std::vector<int>& multi) const;
  /// Raw flat indices active on a cell, in local (axis 0 fastest) order.
  std::vector<int> active_indices(int cell) const;

  /// Active indices, values and gradients (row-major, dim x n_local) at a
  /// point of the closed domain. Returns the cell that owns the point.
  int eval_local(const Eigen::VectorXd& point, std::vector<int>& active,
                 double* values, double* gradients) const;

 private:
  BoxDomain domain_;
  std::vector<SplineSpec1D> specs_;
  int n_total_ = 0;
  int n_local_ = 0;
  int n_cells_ = 0;
};

ValueAndGradient tensor_eval(const TensorSplineBasis& basis, int flat_index,
                             const Eigen::VectorXd& point);

struct GaussLegendreRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Gauss–Legendre rule on (-1, 1), exact for degree <= 2*order - 1.
GaussLegendreRule gauss_legendre_rule(int order);

struct QuadratureCell {
  int cell = 0;   // flat cell index in the tensor basis
  int begin = 0;  // node range [begin, end)
  int end = 0;
};

/// Per-cell tensor Gauss–Legendre nodes. Nodes are stored column-wise.
struct QuadratureGrid {
  Eigen::MatrixXd nodes;
  Eigen::VectorXd weights;
  std::vector<QuadratureCell> cells;
  int order = 0;

  int n_nodes() const { return static_cast<int>(weights.size()); }
  int dim() const { return static_cast<int>(nodes.rows()); }
  double min_origin_distance() const;
};

/// With `split_at_origin`, any cell whose interior contains a zero coordinate
/// is integrated as two sub-intervals on that axis so no node sits on the
/// origin.
QuadratureGrid build_quadrature_grid(const TensorSplineBasis& basis, int order,
                                     bool split_at_origin = false);

}  // namespace koopman_hjb
