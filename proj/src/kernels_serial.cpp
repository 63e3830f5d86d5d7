#include <stdexcept>

#include "koopman_hjb/kernels.hpp"

namespace koopman_hjb {

RawTable tabulate_raw(const TensorSplineBasis& basis, const QuadratureGrid& grid) {
  RawTable t;
  t.dim = basis.dim();
  t.n_raw = basis.n_total();
  t.n_local = basis.n_local();
  t.n_nodes = grid.n_nodes();
  const int n_cells = static_cast<int>(grid.cells.size());
  t.cell_begin.resize(n_cells + 1);
  t.cell_active.resize(static_cast<std::size_t>(n_cells) * t.n_local);
  t.values.resize(static_cast<std::size_t>(t.n_nodes) * t.n_local);
  t.gradients.resize(static_cast<std::size_t>(t.n_nodes) * t.dim * t.n_local);

  std::vector<int> active;
  std::vector<double> grads(t.dim * t.n_local);
  for (int c = 0; c < n_cells; ++c) {
    const auto& qc = grid.cells[c];
    if (qc.cell != c) throw std::logic_error("quadrature cells out of order");
    t.cell_begin[c] = qc.begin;
    const auto expected = basis.active_indices(c);
    std::copy(expected.begin(), expected.end(), t.cell_active.begin() + c * t.n_local);
    for (int q = qc.begin; q < qc.end; ++q) {
      const Eigen::VectorXd x = grid.nodes.col(q);
      const int owner = basis.eval_local(x, active, t.values.data() + q * t.n_local,
                                         grads.data());
      if (owner != c) {
        throw std::logic_error("quadrature node not interior to its cell");
      }
      for (int k = 0; k < t.dim; ++k) {
        std::copy(grads.begin() + k * t.n_local, grads.begin() + (k + 1) * t.n_local,
                  t.gradients.begin() + (q * t.dim + k) * t.n_local);
      }
    }
  }
  t.cell_begin[n_cells] = t.n_nodes;

  // Support lists (cells ascending).
  std::vector<int> counts(t.n_raw, 0);
  for (int c = 0; c < n_cells; ++c) {
    for (int a = 0; a < t.n_local; ++a) ++counts[t.active(c)[a]];
  }
  t.support_begin.assign(t.n_raw + 1, 0);
  for (int i = 0; i < t.n_raw; ++i) t.support_begin[i + 1] = t.support_begin[i] + counts[i];
  t.support_cell.resize(t.support_begin.back());
  t.support_slot.resize(t.support_begin.back());
  std::vector<int> fill(t.support_begin.begin(), t.support_begin.end() - 1);
  for (int c = 0; c < n_cells; ++c) {
    for (int a = 0; a < t.n_local; ++a) {
      const int i = t.active(c)[a];
      t.support_cell[fill[i]] = c;
      t.support_slot[fill[i]] = a;
      ++fill[i];
    }
  }
  return t;
}

LocalField directional_field(const RawTable& table, const Eigen::MatrixXd& direction) {
  if (direction.rows() != table.dim || direction.cols() != table.n_nodes) {
    throw std::invalid_argument("directional_field: direction must be dim x n_nodes");
  }
  LocalField out(static_cast<std::size_t>(table.n_nodes) * table.n_local, 0.0);
  for (int q = 0; q < table.n_nodes; ++q) {
    double* o = out.data() + q * table.n_local;
    for (int k = 0; k < table.dim; ++k) {
      const double dk = direction(k, q);
      if (dk == 0.0) continue;
      const double* g = table.node_gradient(q, k);
      for (int a = 0; a < table.n_local; ++a) o[a] += dk * g[a];
    }
  }
  return out;
}

LocalField gradient_field(const RawTable& table, int axis) {
  LocalField out(static_cast<std::size_t>(table.n_nodes) * table.n_local);
  for (int q = 0; q < table.n_nodes; ++q) {
    const double* g = table.node_gradient(q, axis);
    std::copy(g, g + table.n_local, out.begin() + q * table.n_local);
  }
  return out;
}

LocalField scaled_field(const RawTable& table, std::span<const double> left,
                        const Eigen::VectorXd& node_scalar) {
  LocalField out(left.begin(), left.end());
  for (int q = 0; q < table.n_nodes; ++q) {
    for (int a = 0; a < table.n_local; ++a) out[q * table.n_local + a] *= node_scalar[q];
  }
  return out;
}

namespace kernels::serial {

Eigen::MatrixXd pair_sum(const RawTable& t, std::span<const double> left,
                         std::span<const double> right,
                         std::span<const double> scale) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(t.n_raw, t.n_raw);
  const int nl = t.n_local;
  for (int c = 0; c < t.n_cells(); ++c) {
    const int* act = t.active(c);
    for (int q = t.cell_begin[c]; q < t.cell_begin[c + 1]; ++q) {
      const double s = scale[q];
      const double* l = left.data() + q * nl;
      const double* r = right.data() + q * nl;
      for (int b = 0; b < nl; ++b) {
        const double rb = r[b];
        double* col = out.col(act[b]).data();
        for (int a = 0; a < nl; ++a) col[act[a]] += (s * l[a]) * rb;
      }
    }
  }
  return out;
}

Eigen::VectorXd load_sum(const RawTable& t, std::span<const double> left,
                         std::span<const double> scale) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(t.n_raw);
  const int nl = t.n_local;
  for (int c = 0; c < t.n_cells(); ++c) {
    const int* act = t.active(c);
    for (int q = t.cell_begin[c]; q < t.cell_begin[c + 1]; ++q) {
      const double* l = left.data() + q * nl;
      for (int a = 0; a < nl; ++a) out[act[a]] += scale[q] * l[a];
    }
  }
  return out;
}

Eigen::VectorXd node_bilinear(const RawTable& t, std::span<const double> left,
                              std::span<const double> right,
                              const Eigen::MatrixXd& S) {
  Eigen::VectorXd out(t.n_nodes);
  const int nl = t.n_local;
  for (int c = 0; c < t.n_cells(); ++c) {
    const int* act = t.active(c);
    for (int q = t.cell_begin[c]; q < t.cell_begin[c + 1]; ++q) {
      const double* l = left.data() + q * nl;
      const double* r = right.data() + q * nl;
      double acc = 0.0;
      for (int b = 0; b < nl; ++b) {
        const double* col = S.col(act[b]).data();
        double inner = 0.0;
        for (int a = 0; a < nl; ++a) inner += l[a] * col[act[a]];
        acc += inner * r[b];
      }
      out[q] = acc;
    }
  }
  return out;
}

}  // namespace kernels::serial
}  // namespace koopman_hjb
