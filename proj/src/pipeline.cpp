#include "koopman_hjb/pipeline.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace koopman_hjb {

Discretization discretize(const RunConfig& cfg, const ControlAffineSystem& sys) {
  TensorSplineBasis basis = TensorSplineBasis::uniform(sys.domain(), cfg.n_grid, cfg.degree);
  const bool split = cfg.split_at_origin && cfg.weight.singular_at_origin();
  QuadratureGrid quad = build_quadrature_grid(basis, cfg.quadrature_order(), split);
  const RawTable table = tabulate_raw(basis, quad);
  const Eigen::VectorXd measure = weighted_measure(quad, cfg.weight);
  RieszBasis riesz = make_riesz_basis(basis, table, measure, quad.weights, cfg.vanish_at_origin);
  AssembledOperators ops = assemble(riesz, quad, cfg.weight, sys);
  return {std::move(basis), std::move(quad), std::move(riesz), std::move(ops)};
}

std::string format_number(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  CsvTable t;
  std::string line;
  if (!std::getline(in, line) || line.empty()) throw std::runtime_error("'" + path + "' is empty");
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) t.header.push_back(cell);
  }
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str() || *end != '\0') {
        throw std::runtime_error("'" + path + "' line " + std::to_string(lineno) + ": not a number");
      }
      row.push_back(v);
    }
    if (row.size() != t.header.size()) {
      throw std::runtime_error("'" + path + "' line " + std::to_string(lineno) + ": wrong column count");
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

void write_csv(const std::string& path, const CsvTable& table) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  for (std::size_t i = 0; i < table.header.size(); ++i) out << (i ? "," : "") << table.header[i];
  out << '\n';
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << format_number(row[i]);
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

std::vector<Eigen::VectorXd> domain_grid(const BoxDomain& dom, int points) {
  if (points < 2) throw std::invalid_argument("domain_grid: need at least two points per axis");
  auto coord = [&](int k, int i) {
    const double t = static_cast<double>(i) / (points - 1);
    return dom.lower()[k] * (1.0 - t) + dom.upper()[k] * t;
  };
  std::vector<Eigen::VectorXd> pts;
  if (dom.dim() == 1) {
    for (int i = 0; i < points; ++i) pts.push_back(Eigen::VectorXd::Constant(1, coord(0, i)));
    return pts;
  }
  for (int j = 0; j < points; ++j) {
    for (int i = 0; i < points; ++i) pts.push_back(Eigen::Vector2d(coord(0, i), coord(1, j)));
  }
  return pts;
}

CsvTable singular_values_table(const SosValueModel& model) {
  CsvTable t{{"index", "sigma"}, {}};
  for (int i = 0; i < model.n_modes(); ++i) t.rows.push_back({double(i + 1), model.sigmas()[i]});
  return t;
}

CsvTable value_grid_table(const SosValueModel& model, int points) {
  const BoxDomain& dom = model.riesz().raw.domain();
  CsvTable t;
  for (int k = 0; k < dom.dim(); ++k) t.header.push_back("x" + std::to_string(k + 1));
  t.header.push_back("v");
  t.header.push_back("u");
  for (const auto& z : domain_grid(dom, points)) {
    std::vector<double> row(z.data(), z.data() + z.size());
    const auto vg = model.value_and_gradient(z);
    row.push_back(vg.value);
    row.push_back(-0.5 * model.bfield().value(z).dot(vg.gradient));
    t.rows.push_back(std::move(row));
  }
  return t;
}

CsvTable model_table(const SosValueModel& model) {
  CsvTable t{{"mode", "sigma"}, {}};
  const int N = static_cast<int>(model.coeffs().rows());
  for (int k = 0; k < N; ++k) t.header.push_back("c" + std::to_string(k + 1));
  for (int i = 0; i < model.n_modes(); ++i) {
    std::vector<double> row{double(i + 1), model.sigmas()[i]};
    for (int k = 0; k < N; ++k) row.push_back(model.coeffs()(k, i));
    t.rows.push_back(std::move(row));
  }
  return t;
}

SosValueModel model_from_table(const CsvTable& table, const RieszBasis& riesz, const PolyField& b) {
  const int N = riesz.n();
  if (static_cast<int>(table.header.size()) != N + 2) {
    throw std::runtime_error("model has " + std::to_string(int(table.header.size()) - 2) +
                             " coefficients per mode, basis has " + std::to_string(N));
  }
  const int m = static_cast<int>(table.rows.size());
  Eigen::VectorXd sigmas(m);
  Eigen::MatrixXd coeffs(N, m);
  for (int i = 0; i < m; ++i) {
    sigmas[i] = table.rows[i][1];
    for (int k = 0; k < N; ++k) coeffs(k, i) = table.rows[i][k + 2];
  }
  return SosValueModel(riesz, b, sigmas, coeffs);
}

Eigen::MatrixXd reconstruct(const SosValueModel& model) {
  return model.coeffs() * model.sigmas().asDiagonal() * model.coeffs().transpose();
}

}  // namespace koopman_hjb
