#include "koopman_hjb/assembly.hpp"

#include <stdexcept>

namespace koopman_hjb {

namespace {

std::span<const double> as_span(const Eigen::VectorXd& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

Eigen::MatrixXd congruence(const Eigen::MatrixXd& R, const Eigen::MatrixXd& raw) {
  const Eigen::MatrixXd left = R.transpose() * raw;
  return left * R;
}

void require_finite(const Eigen::MatrixXd& X, const char* name) {
  if (!X.allFinite()) throw std::domain_error(std::string("assemble: non-finite entries in ") + name);
}

}  // namespace

Eigen::MatrixXd field_at_nodes(const PolyField& field, const QuadratureGrid& quad) {
  Eigen::MatrixXd out(field.dim_out(), quad.n_nodes());
  for (int q = 0; q < quad.n_nodes(); ++q) out.col(q) = field.value(quad.nodes.col(q));
  return out;
}

AssembledOperators assemble(const RieszBasis& riesz, const QuadratureGrid& quad,
                            const WeightSpec& w, const ControlAffineSystem& sys) {
  if (!(riesz.raw.domain() == sys.domain())) {
    throw std::invalid_argument("assemble: basis and system live on different domains");
  }
  if (quad.dim() != sys.dim()) throw std::invalid_argument("assemble: quadrature dimension mismatch");

  AssembledOperators ops{riesz, quad, w, sys, tabulate_raw(riesz.raw, quad), {}, {},
                         {}, {}, {}, {}, {}, {}, {}};
  const RawTable& t = ops.table;
  const Eigen::MatrixXd& R = riesz.transform;
  ops.measure = weighted_measure(quad, w);
  const auto measure = as_span(ops.measure);

  ops.bgrad = directional_field(t, field_at_nodes(sys.b(), quad));
  const LocalField fgrad = directional_field(t, field_at_nodes(sys.f(), quad));

  Eigen::MatrixXd M = congruence(R, kernels::omp::pair_sum(t, t.values, t.values, measure));
  M = 0.5 * (M + M.transpose()).eval();
  require_finite(M, "M");
  ops.M = std::move(M);
  ops.M_chol.compute(ops.M);
  if (ops.M_chol.info() != Eigen::Success) {
    throw std::runtime_error("assemble: mass matrix is not positive definite");
  }

  ops.F = congruence(R, kernels::omp::pair_sum(t, t.values, fgrad, measure));
  require_finite(ops.F, "F");

  const Eigen::MatrixXd c_nodes = field_at_nodes(sys.c(), quad);
  ops.W.resize(sys.n_observables(), ops.n());
  for (int l = 0; l < sys.n_observables(); ++l) {
    const Eigen::VectorXd scale = ops.measure.cwiseProduct(c_nodes.row(l).transpose());
    ops.W.row(l) = (R.transpose() * kernels::omp::load_sum(t, t.values, as_span(scale))).transpose();
  }
  require_finite(ops.W, "W");
  ops.C_tilde = ops.solve_M(ops.W.transpose()).transpose();
  ops.observable_term = ops.C_tilde.transpose() * ops.C_tilde;

  // H_Y moments of the coordinate functions; exact coordinates whenever z_k
  // lies in the span.
  ops.linear_coords.resize(ops.n(), sys.dim());
  for (int k = 0; k < sys.dim(); ++k) {
    const Eigen::VectorXd scale = ops.measure.cwiseProduct(quad.nodes.row(k).transpose());
    Eigen::VectorXd moments = kernels::omp::load_sum(t, t.values, as_span(scale));
    moments += kernels::omp::load_sum(t, gradient_field(t, k), as_span(quad.weights));
    ops.linear_coords.col(k) = R.transpose() * moments;
  }
  return ops;
}

Eigen::MatrixXd contract_control(const AssembledOperators& ops, const Eigen::VectorXd& u_nodes) {
  if (u_nodes.size() != ops.table.n_nodes) {
    throw std::invalid_argument("contract_control: one value per quadrature node expected");
  }
  const Eigen::VectorXd scale = ops.measure.cwiseProduct(u_nodes);
  return congruence(ops.transform(), kernels::omp::pair_sum(ops.table, ops.table.values,
                                                            ops.bgrad, as_span(scale)));
}

Eigen::VectorXd feedback_nodes(const AssembledOperators& ops, const Eigen::MatrixXd& S) {
  const Eigen::MatrixXd& R = ops.transform();
  if (S.rows() != ops.n() || S.cols() != ops.n()) {
    throw std::invalid_argument("feedback_nodes: S must be N x N");
  }
  const Eigen::MatrixXd S_raw = R * S * R.transpose();
  return -kernels::omp::node_bilinear(ops.table, ops.table.values, ops.bgrad, S_raw);
}

Eigen::VectorXd project_feedback(const AssembledOperators& ops, const Eigen::VectorXd& u_nodes) {
  if (u_nodes.size() != ops.table.n_nodes) {
    throw std::invalid_argument("project_feedback: one value per quadrature node expected");
  }
  const Eigen::VectorXd scale = ops.measure.cwiseProduct(u_nodes);
  const Eigen::VectorXd rhs =
      ops.transform().transpose() * kernels::omp::load_sum(ops.table, ops.table.values, as_span(scale));
  return ops.solve_M(rhs);
}

Eigen::VectorXd node_values(const AssembledOperators& ops, const Eigen::VectorXd& coeffs) {
  const Eigen::VectorXd raw = ops.transform() * coeffs;
  const RawTable& t = ops.table;
  Eigen::VectorXd out(t.n_nodes);
  for (int c = 0; c < t.n_cells(); ++c) {
    const int* act = t.active(c);
    for (int q = t.cell_begin[c]; q < t.cell_begin[c + 1]; ++q) {
      const double* phi = t.node_values(q);
      double acc = 0.0;
      for (int a = 0; a < t.n_local; ++a) acc += phi[a] * raw[act[a]];
      out[q] = acc;
    }
  }
  return out;
}

}  // namespace koopman_hjb
