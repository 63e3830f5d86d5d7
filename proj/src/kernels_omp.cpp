#include <cstdlib>
#include <string>

#include <omp.h>

#include "koopman_hjb/kernels.hpp"

namespace koopman_hjb {

int configure_threads_from_env() {
  if (const char* env = std::getenv("KOOPMAN_HJB_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n >= 1) omp_set_num_threads(n);
    } catch (const std::exception&) {
      // Unparsable values leave the OpenMP default in place.
    }
  }
  return omp_get_max_threads();
}

namespace kernels::omp {

// Column j of the result is owned by one thread; its support cells are
// visited in ascending order, matching the serial scatter.
Eigen::MatrixXd pair_sum(const RawTable& t, std::span<const double> left,
                         std::span<const double> right,
                         std::span<const double> scale) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(t.n_raw, t.n_raw);
  const int nl = t.n_local;
#pragma omp parallel for schedule(dynamic, 8)
  for (int j = 0; j < t.n_raw; ++j) {
    double* col = out.col(j).data();
    for (int s = t.support_begin[j]; s < t.support_begin[j + 1]; ++s) {
      const int c = t.support_cell[s];
      const int b = t.support_slot[s];
      const int* act = t.active(c);
      for (int q = t.cell_begin[c]; q < t.cell_begin[c + 1]; ++q) {
        const double sc = scale[q];
        const double* l = left.data() + q * nl;
        const double rb = right[q * nl + b];
        for (int a = 0; a < nl; ++a) col[act[a]] += (sc * l[a]) * rb;
      }
    }
  }
  return out;
}

Eigen::VectorXd load_sum(const RawTable& t, std::span<const double> left,
                         std::span<const double> scale) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(t.n_raw);
  const int nl = t.n_local;
#pragma omp parallel for schedule(static)
  for (int i = 0; i < t.n_raw; ++i) {
    double acc = 0.0;
    for (int s = t.support_begin[i]; s < t.support_begin[i + 1]; ++s) {
      const int c = t.support_cell[s];
      const int a = t.support_slot[s];
      for (int q = t.cell_begin[c]; q < t.cell_begin[c + 1]; ++q) {
        acc += scale[q] * left[q * nl + a];
      }
    }
    out[i] = acc;
  }
  return out;
}

Eigen::VectorXd node_bilinear(const RawTable& t, std::span<const double> left,
                              std::span<const double> right,
                              const Eigen::MatrixXd& S) {
  Eigen::VectorXd out(t.n_nodes);
  const int nl = t.n_local;
  const int n_cells = t.n_cells();
#pragma omp parallel for schedule(static)
  for (int c = 0; c < n_cells; ++c) {
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

}  // namespace kernels::omp
}  // namespace koopman_hjb
