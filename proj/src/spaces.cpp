#include "koopman_hjb/spaces.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

namespace koopman_hjb {

double weight_eval(const WeightSpec& spec, const Eigen::VectorXd& x) {
  if (spec.kind == WeightKind::constant) return 1.0;
  const double r = std::max(x.norm(), spec.floor);
  if (r == 0.0) {
    throw std::domain_error("weight_eval: inverse-norm weight is singular at the origin");
  }
  return 1.0 / r;
}

Eigen::VectorXd weighted_measure(const QuadratureGrid& grid, const WeightSpec& w) {
  Eigen::VectorXd m(grid.n_nodes());
  for (int q = 0; q < grid.n_nodes(); ++q) {
    const double wq = weight_eval(w, grid.nodes.col(q));
    m[q] = wq * wq * grid.weights[q];
    if (!std::isfinite(m[q])) {
      throw std::domain_error("weighted_measure: non-finite weight at a quadrature node");
    }
  }
  return m;
}

namespace {

Eigen::MatrixXd symmetrized(Eigen::MatrixXd G) {
  Eigen::MatrixXd S = 0.5 * (G + G.transpose());
  return S;
}

void require_finite(const Eigen::MatrixXd& G, const char* what) {
  if (!G.allFinite()) {
    throw std::domain_error(std::string(what) +
                            ": non-finite entries (quadrature node at the weight singularity?)");
  }
}

}  // namespace

Eigen::MatrixXd gram_HX(const RawTable& table, const Eigen::VectorXd& measure) {
  const std::span<const double> m(measure.data(), measure.size());
  Eigen::MatrixXd G = symmetrized(kernels::omp::pair_sum(table, table.values, table.values, m));
  require_finite(G, "gram_HX");
  return G;
}

Eigen::MatrixXd gram_HY(const RawTable& table, const Eigen::VectorXd& measure,
                        const Eigen::VectorXd& quad_weights) {
  const std::span<const double> m(measure.data(), measure.size());
  const std::span<const double> omega(quad_weights.data(), quad_weights.size());
  Eigen::MatrixXd G = kernels::omp::pair_sum(table, table.values, table.values, m);
  for (int k = 0; k < table.dim; ++k) {
    const auto gk = gradient_field(table, k);
    G += kernels::omp::pair_sum(table, gk, gk, omega);
  }
  G = symmetrized(std::move(G));
  require_finite(G, "gram_HY");
  return G;
}

Eigen::MatrixXd gram_HX(const TensorSplineBasis& raw, const QuadratureGrid& quad,
                        const WeightSpec& w) {
  return gram_HX(tabulate_raw(raw, quad), weighted_measure(quad, w));
}

Eigen::MatrixXd gram_HY(const TensorSplineBasis& raw, const QuadratureGrid& quad,
                        const WeightSpec& w) {
  return gram_HY(tabulate_raw(raw, quad), weighted_measure(quad, w), quad.weights);
}

Eigen::MatrixXd orthonormalize(const Eigen::MatrixXd& gram) {
  if (gram.rows() != gram.cols()) throw std::invalid_argument("orthonormalize: Gram not square");
  Eigen::LLT<Eigen::MatrixXd> llt(gram);
  if (llt.info() != Eigen::Success) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
    std::ostringstream msg;
    msg << "orthonormalize: Gram matrix is not positive definite (smallest eigenvalue "
        << eig.eigenvalues().minCoeff() << ")";
    throw std::runtime_error(msg.str());
  }
  const Eigen::Index n = gram.rows();
  Eigen::MatrixXd R = Eigen::MatrixXd::Identity(n, n);
  llt.matrixU().solveInPlace(R);
  return R;
}

Eigen::MatrixXd origin_constraint(const TensorSplineBasis& raw) {
  const int n = raw.n_total();
  std::vector<int> active;
  std::vector<double> values(raw.n_local());
  std::vector<double> grads(raw.dim() * raw.n_local());
  raw.eval_local(Eigen::VectorXd::Zero(raw.dim()), active, values.data(), grads.data());
  int pivot_slot = 0;
  for (int a = 1; a < raw.n_local(); ++a) {
    if (values[a] > values[pivot_slot]) pivot_slot = a;
  }
  const int pivot = active[pivot_slot];
  const double pivot_value = values[pivot_slot];

  Eigen::VectorXd at_origin = Eigen::VectorXd::Zero(n);
  for (int a = 0; a < raw.n_local(); ++a) at_origin[active[a]] = values[a];

  Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(n, n - 1);
  int col = 0;
  for (int j = 0; j < n; ++j) {
    if (j == pivot) continue;
    Z(j, col) = 1.0;
    Z(pivot, col) = -at_origin[j] / pivot_value;
    ++col;
  }
  return Z;
}

RieszBasis make_riesz_basis(const TensorSplineBasis& raw, const RawTable& table,
                            const Eigen::VectorXd& measure,
                            const Eigen::VectorXd& quad_weights,
                            bool vanish_at_origin) {
  const Eigen::MatrixXd G = gram_HY(table, measure, quad_weights);
  RieszBasis riesz{raw, {}, false};
  if (vanish_at_origin && raw.domain().contains_origin()) {
    const Eigen::MatrixXd Z = origin_constraint(raw);
    const Eigen::MatrixXd GZ = G * Z;
    Eigen::MatrixXd Gc = Z.transpose() * GZ;
    Gc = 0.5 * (Gc + Gc.transpose()).eval();
    riesz.transform = Z * orthonormalize(Gc);
    riesz.vanishes_at_origin = true;
  } else {
    riesz.transform = orthonormalize(G);
  }
  return riesz;
}

RieszBasis make_riesz_basis(const TensorSplineBasis& raw, const QuadratureGrid& quad,
                            const WeightSpec& w, bool vanish_at_origin) {
  return make_riesz_basis(raw, tabulate_raw(raw, quad), weighted_measure(quad, w),
                          quad.weights, vanish_at_origin);
}

NodeTable tabulate(const TensorSplineBasis& raw, const Eigen::MatrixXd& transform,
                   const QuadratureGrid& quad, const WeightSpec& w) {
  const RawTable table = tabulate_raw(raw, quad);
  const int nq = table.n_nodes;
  Eigen::MatrixXd raw_values = Eigen::MatrixXd::Zero(nq, table.n_raw);
  std::vector<Eigen::MatrixXd> raw_grads(table.dim, Eigen::MatrixXd::Zero(nq, table.n_raw));
  for (int c = 0; c < table.n_cells(); ++c) {
    const int* act = table.active(c);
    for (int q = table.cell_begin[c]; q < table.cell_begin[c + 1]; ++q) {
      for (int a = 0; a < table.n_local; ++a) {
        raw_values(q, act[a]) = table.node_values(q)[a];
        for (int k = 0; k < table.dim; ++k) {
          raw_grads[k](q, act[a]) = table.node_gradient(q, k)[a];
        }
      }
    }
  }
  NodeTable out;
  out.values = raw_values * transform;
  for (int k = 0; k < table.dim; ++k) out.gradients.push_back(raw_grads[k] * transform);
  out.quad_weights = quad.weights;
  out.w2.resize(nq);
  for (int q = 0; q < nq; ++q) {
    const double wq = weight_eval(w, quad.nodes.col(q));
    out.w2[q] = wq * wq;
  }
  return out;
}

NodeTable tabulate(const RieszBasis& riesz, const QuadratureGrid& quad,
                   const WeightSpec& w) {
  return tabulate(riesz.raw, riesz.transform, quad, w);
}

}  // namespace koopman_hjb
