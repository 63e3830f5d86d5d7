#include "koopman_hjb/basis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace koopman_hjb {

BoxDomain::BoxDomain(std::vector<double> lower, std::vector<double> upper)
    : lower_(std::move(lower)), upper_(std::move(upper)) {
  if (lower_.size() != upper_.size()) {
    throw std::invalid_argument("BoxDomain: lower and upper differ in length");
  }
  if (lower_.empty() || lower_.size() > 2) {
    throw std::invalid_argument("BoxDomain: only dimensions 1 and 2 are supported");
  }
  for (std::size_t k = 0; k < lower_.size(); ++k) {
    if (!(lower_[k] < upper_[k]) || !std::isfinite(lower_[k]) ||
        !std::isfinite(upper_[k])) {
      throw std::invalid_argument("BoxDomain: require lower < upper on axis " +
                                  std::to_string(k));
    }
  }
}

double BoxDomain::volume() const {
  double v = 1.0;
  for (int k = 0; k < dim(); ++k) v *= upper_[k] - lower_[k];
  return v;
}

bool BoxDomain::contains(const Eigen::VectorXd& x, double slack) const {
  if (x.size() != dim()) return false;
  for (int k = 0; k < dim(); ++k) {
    if (x[k] < lower_[k] - slack || x[k] > upper_[k] + slack) return false;
  }
  return true;
}

bool BoxDomain::contains_origin() const {
  return contains(Eigen::VectorXd::Zero(dim()));
}

// ---------------------------------------------------------------------------

SplineSpec1D make_clamped_knots(double lower, double upper, int n_grid,
                                int degree) {
  if (!(lower < upper)) {
    throw std::invalid_argument("make_clamped_knots: require lower < upper");
  }
  if (n_grid < 2) {
    throw std::invalid_argument("make_clamped_knots: n_grid must be >= 2");
  }
  if (degree < 1) {
    throw std::invalid_argument("make_clamped_knots: degree must be >= 1");
  }
  SplineSpec1D spec;
  spec.lower = lower;
  spec.upper = upper;
  spec.n_grid = n_grid;
  spec.degree = degree;
  spec.n_basis = n_grid + degree - 1;
  spec.knots.reserve(n_grid + 2 * degree);
  for (int i = 0; i < degree; ++i) spec.knots.push_back(lower);
  const int m = n_grid - 1;
  for (int i = 0; i <= m; ++i) {
    // Convex combination keeps symmetric grids exactly symmetric (0 is hit
    // exactly when it is a grid point).
    spec.knots.push_back((lower * (m - i) + upper * i) / m);
  }
  for (int i = 0; i < degree; ++i) spec.knots.push_back(upper);
  return spec;
}

int SplineSpec1D::find_span(double x) const {
  if (x >= upper) return n_basis - 1;
  if (x <= lower) return degree;
  int lo = degree;
  int hi = n_basis;  // knots[hi] == upper > x
  while (hi - lo > 1) {
    const int mid = (lo + hi) / 2;
    if (x < knots[mid]) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return lo;
}

namespace {

// Nonzero basis functions of degree q on `span` (q+1 values).
void basis_funs(const std::vector<double>& knots, int span, double x, int q,
                double* out) {
  double left[32];
  double right[32];
  out[0] = 1.0;
  for (int j = 1; j <= q; ++j) {
    left[j] = x - knots[span + 1 - j];
    right[j] = knots[span + j] - x;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      const double temp = out[r] / (right[r + 1] + left[j - r]);
      out[r] = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    out[j] = saved;
  }
}

}  // namespace

void SplineSpec1D::eval_nonzero(int span, double x, double* values,
                                double* derivatives) const {
  const int p = degree;
  if (p > 30) throw std::invalid_argument("spline degree above 30");
  basis_funs(knots, span, x, p, values);
  double lower_degree[32];
  basis_funs(knots, span, x, p - 1, lower_degree);
  for (int r = 0; r <= p; ++r) {
    const int i = span - p + r;
    double d = 0.0;
    if (r >= 1) d += p / (knots[i + p] - knots[i]) * lower_degree[r - 1];
    if (r <= p - 1) d -= p / (knots[i + p + 1] - knots[i + 1]) * lower_degree[r];
    derivatives[r] = d;
  }
}

ValueAndDerivative bspline_eval(const SplineSpec1D& spec, int index, double x) {
  if (index < 0 || index >= spec.n_basis) {
    throw std::out_of_range("bspline_eval: index out of range");
  }
  if (!(x >= spec.lower && x <= spec.upper)) {
    throw std::out_of_range("bspline_eval: x outside the knot span");
  }
  const int span = spec.find_span(x);
  const int first = span - spec.degree;
  if (index < first || index > span) return {};
  double values[32];
  double derivs[32];
  spec.eval_nonzero(span, x, values, derivs);
  return {values[index - first], derivs[index - first]};
}

// ---------------------------------------------------------------------------

TensorSplineBasis::TensorSplineBasis(BoxDomain domain,
                                     std::vector<SplineSpec1D> specs)
    : domain_(std::move(domain)), specs_(std::move(specs)) {
  if (static_cast<int>(specs_.size()) != domain_.dim()) {
    throw std::invalid_argument("TensorSplineBasis: one spline spec per axis");
  }
  n_total_ = 1;
  n_local_ = 1;
  n_cells_ = 1;
  for (int k = 0; k < dim(); ++k) {
    const auto& s = specs_[k];
    if (s.lower != domain_.lower()[k] || s.upper != domain_.upper()[k]) {
      throw std::invalid_argument("TensorSplineBasis: knot span must match the domain");
    }
    n_total_ *= s.n_basis;
    n_local_ *= s.degree + 1;
    n_cells_ *= s.n_cells();
  }
}

TensorSplineBasis TensorSplineBasis::uniform(const BoxDomain& domain,
                                             int n_grid, int degree) {
  std::vector<SplineSpec1D> specs;
  for (int k = 0; k < domain.dim(); ++k) {
    specs.push_back(make_clamped_knots(domain.lower()[k], domain.upper()[k],
                                       n_grid, degree));
  }
  return TensorSplineBasis(domain, std::move(specs));
}

std::vector<int> TensorSplineBasis::multi_index(int flat) const {
  if (flat < 0 || flat >= n_total_) throw std::out_of_range("flat index");
  std::vector<int> multi(dim());
  for (int k = 0; k < dim(); ++k) {
    multi[k] = flat % specs_[k].n_basis;
    flat /= specs_[k].n_basis;
  }
  return multi;
}

int TensorSplineBasis::flat_index(const std::vector<int>& multi) const {
  int flat = 0;
  int stride = 1;
  for (int k = 0; k < dim(); ++k) {
    if (multi[k] < 0 || multi[k] >= specs_[k].n_basis) {
      throw std::out_of_range("multi index");
    }
    flat += multi[k] * stride;
    stride *= specs_[k].n_basis;
  }
  return flat;
}

std::vector<int> TensorSplineBasis::cell_multi_index(int cell) const {
  std::vector<int> multi(dim());
  for (int k = 0; k < dim(); ++k) {
    multi[k] = cell % specs_[k].n_cells();
    cell /= specs_[k].n_cells();
  }
  return multi;
}

int TensorSplineBasis::cell_index(const std::vector<int>& multi) const {
  int flat = 0;
  int stride = 1;
  for (int k = 0; k < dim(); ++k) {
    flat += multi[k] * stride;
    stride *= specs_[k].n_cells();
  }
  return flat;
}

std::vector<int> TensorSplineBasis::active_indices(int cell) const {
  const auto c = cell_multi_index(cell);
  std::vector<int> active(n_local_);
  for (int a = 0; a < n_local_; ++a) {
    int rem = a;
    int flat = 0;
    int stride = 1;
    for (int k = 0; k < dim(); ++k) {
      const int p1 = specs_[k].degree + 1;
      flat += (c[k] + rem % p1) * stride;
      rem /= p1;
      stride *= specs_[k].n_basis;
    }
    active[a] = flat;
  }
  return active;
}

int TensorSplineBasis::eval_local(const Eigen::VectorXd& point,
                                  std::vector<int>& active, double* values,
                                  double* gradients) const {
  if (!domain_.contains(point)) {
    throw std::out_of_range("eval_local: point outside the domain");
  }
  const int d = dim();
  double vals[2][32];
  double ders[2][32];
  std::vector<int> cell(d);
  for (int k = 0; k < d; ++k) {
    const int span = specs_[k].find_span(point[k]);
    specs_[k].eval_nonzero(span, point[k], vals[k], ders[k]);
    cell[k] = span - specs_[k].degree;
  }
  const int cell_flat = cell_index(cell);
  active = active_indices(cell_flat);
  for (int a = 0; a < n_local_; ++a) {
    int loc[2] = {0, 0};
    int rem = a;
    for (int k = 0; k < d; ++k) {
      const int p1 = specs_[k].degree + 1;
      loc[k] = rem % p1;
      rem /= p1;
    }
    double v = 1.0;
    for (int k = 0; k < d; ++k) v *= vals[k][loc[k]];
    values[a] = v;
    for (int k = 0; k < d; ++k) {
      double g = ders[k][loc[k]];
      for (int l = 0; l < d; ++l) {
        if (l != k) g *= vals[l][loc[l]];
      }
      gradients[k * n_local_ + a] = g;
    }
  }
  return cell_flat;
}

ValueAndGradient tensor_eval(const TensorSplineBasis& basis, int flat_index,
                             const Eigen::VectorXd& point) {
  if (!basis.domain().contains(point)) {
    throw std::out_of_range("tensor_eval: point outside the domain");
  }
  const auto multi = basis.multi_index(flat_index);
  const int d = basis.dim();
  std::vector<ValueAndDerivative> factors(d);
  for (int k = 0; k < d; ++k) {
    factors[k] = bspline_eval(basis.specs()[k], multi[k], point[k]);
  }
  ValueAndGradient out;
  out.value = 1.0;
  for (const auto& f : factors) out.value *= f.value;
  out.gradient = Eigen::VectorXd::Zero(d);
  for (int k = 0; k < d; ++k) {
    double g = factors[k].derivative;
    for (int l = 0; l < d; ++l) {
      if (l != k) g *= factors[l].value;
    }
    out.gradient[k] = g;
  }
  return out;
}

// ---------------------------------------------------------------------------

GaussLegendreRule gauss_legendre_rule(int order) {
  if (order < 1 || order > 64) {
    throw std::invalid_argument("gauss_legendre_rule: order must be in [1, 64]");
  }
  GaussLegendreRule rule;
  rule.nodes.assign(order, 0.0);
  rule.weights.assign(order, 0.0);
  const int n = order;
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p1 = 1.0;
      double p2 = 0.0;
      for (int j = 1; j <= n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = ((2.0 * j - 1.0) * z * p2 - (j - 1.0) * p3) / j;
      }
      pp = n * (z * p1 - p2) / (z * z - 1.0);
      const double z_prev = z;
      z = z_prev - p1 / pp;
      if (std::abs(z - z_prev) <= 1e-16) break;
    }
    if (n % 2 == 1 && i == n / 2) z = 0.0;
    // Legendre derivative at the converged root.
    {
      double p1 = 1.0;
      double p2 = 0.0;
      for (int j = 1; j <= n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = ((2.0 * j - 1.0) * z * p2 - (j - 1.0) * p3) / j;
      }
      pp = n * (z * p1 - p2) / (z * z - 1.0);
    }
    const double w = 2.0 / ((1.0 - z * z) * pp * pp);
    rule.nodes[i] = -z;
    rule.nodes[n - 1 - i] = z;
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  return rule;
}

double QuadratureGrid::min_origin_distance() const {
  if (n_nodes() == 0) return std::numeric_limits<double>::infinity();
  return nodes.colwise().norm().minCoeff();
}

QuadratureGrid build_quadrature_grid(const TensorSplineBasis& basis, int order,
                                     bool split_at_origin) {
  const auto rule = gauss_legendre_rule(order);
  const int d = basis.dim();

  // Per axis, per cell: 1-D nodes and weights.
  std::vector<std::vector<std::vector<double>>> axis_nodes(d);
  std::vector<std::vector<std::vector<double>>> axis_weights(d);
  for (int k = 0; k < d; ++k) {
    const auto& spec = basis.specs()[k];
    for (int c = 0; c < spec.n_cells(); ++c) {
      const double a = spec.knots[c + spec.degree];
      const double b = spec.knots[c + spec.degree + 1];
      std::vector<std::pair<double, double>> pieces;
      if (split_at_origin && a < 0.0 && 0.0 < b) {
        pieces = {{a, 0.0}, {0.0, b}};
      } else {
        pieces = {{a, b}};
      }
      std::vector<double> xs;
      std::vector<double> ws;
      for (const auto& [lo, hi] : pieces) {
        const double mid = 0.5 * (lo + hi);
        const double half = 0.5 * (hi - lo);
        for (int i = 0; i < order; ++i) {
          xs.push_back(mid + half * rule.nodes[i]);
          ws.push_back(half * rule.weights[i]);
        }
      }
      axis_nodes[k].push_back(std::move(xs));
      axis_weights[k].push_back(std::move(ws));
    }
  }

  QuadratureGrid grid;
  grid.order = order;
  std::vector<double> node_data;
  std::vector<double> weight_data;
  for (int cell = 0; cell < basis.n_cells(); ++cell) {
    const auto c = basis.cell_multi_index(cell);
    QuadratureCell qc;
    qc.cell = cell;
    qc.begin = static_cast<int>(weight_data.size());
    if (d == 1) {
      const auto& xs = axis_nodes[0][c[0]];
      const auto& ws = axis_weights[0][c[0]];
      for (std::size_t i = 0; i < xs.size(); ++i) {
        node_data.push_back(xs[i]);
        weight_data.push_back(ws[i]);
      }
    } else {
      const auto& xs0 = axis_nodes[0][c[0]];
      const auto& ws0 = axis_weights[0][c[0]];
      const auto& xs1 = axis_nodes[1][c[1]];
      const auto& ws1 = axis_weights[1][c[1]];
      for (std::size_t j = 0; j < xs1.size(); ++j) {
        for (std::size_t i = 0; i < xs0.size(); ++i) {
          node_data.push_back(xs0[i]);
          node_data.push_back(xs1[j]);
          weight_data.push_back(ws0[i] * ws1[j]);
        }
      }
    }
    qc.end = static_cast<int>(weight_data.size());
    grid.cells.push_back(qc);
  }
  const int n = static_cast<int>(weight_data.size());
  grid.nodes = Eigen::Map<Eigen::MatrixXd>(node_data.data(), d, n);
  grid.weights = Eigen::Map<Eigen::VectorXd>(weight_data.data(), n);
  return grid;
}

}  // namespace koopman_hjb
