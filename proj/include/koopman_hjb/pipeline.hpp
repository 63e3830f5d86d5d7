#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "koopman_hjb/assembly.hpp"
#include "koopman_hjb/config.hpp"
#include "koopman_hjb/solver.hpp"

namespace koopman_hjb {

struct Discretization {
  TensorSplineBasis basis;
  QuadratureGrid quad;
  RieszBasis riesz;
  AssembledOperators ops;
};

Discretization discretize(const RunConfig& cfg, const ControlAffineSystem& sys);

/// "%.17g"
std::string format_number(double x);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

/// Numeric CSV with a header row. Throws std::runtime_error on I/O or parse failure.
CsvTable read_csv(const std::string& path);
void write_csv(const std::string& path, const CsvTable& table);

/// Uniform grid over Ω with `points` per axis (endpoints included), axis 0 fastest.
std::vector<Eigen::VectorXd> domain_grid(const BoxDomain& dom, int points);

/// index, sigma
CsvTable singular_values_table(const SosValueModel& model);
/// x1..xd, v, u on domain_grid(dom, points)
CsvTable value_grid_table(const SosValueModel& model, int points);
/// mode, sigma, c1..cN
CsvTable model_table(const SosValueModel& model);
/// Inverse of model_table on a given basis.
SosValueModel model_from_table(const CsvTable& table, const RieszBasis& riesz, const PolyField& b);

/// Σ σ_i a_i a_iᵀ
Eigen::MatrixXd reconstruct(const SosValueModel& model);

}  // namespace koopman_hjb
