#include "koopman_hjb/commands.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "koopman_hjb/config.hpp"
#include "koopman_hjb/pipeline.hpp"
#include "koopman_hjb/plot.hpp"
#include "koopman_hjb/validate.hpp"

namespace koopman_hjb {

namespace fs = std::filesystem;

namespace {

std::string output_dir(const CommandOptions& opts, const RunConfig& cfg) {
  return opts.out_dir.value_or(cfg.output_directory);
}

bool load(const CommandOptions& opts, RunConfig& cfg, std::ostream& err) {
  try {
    cfg = load_config(opts.config_path);
    return true;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return false;
  }
}

std::string point_text(const Eigen::VectorXd& x) {
  std::ostringstream s;
  s << '(';
  for (Eigen::Index k = 0; k < x.size(); ++k) s << (k ? ", " : "") << x[k];
  s << ')';
  return s.str();
}

/// Prints the tangent report; true when the run may proceed.
bool tangent_gate(const ControlAffineSystem& sys, int samples, bool allow, std::ostream& err) {
  const TangentReport rep = check_tangent_condition(sys, samples);
  if (rep.satisfied()) return true;
  err << (allow ? "warning" : "error") << ": tangent condition violated at "
      << rep.violating_points.size() << " of " << rep.n_samples
      << " boundary samples (max nu.f = " << rep.max_inner_product << ", first at "
      << point_text(rep.violating_points.front()) << ")\n";
  if (!allow) err << "rerun with --allow-boundary to proceed anyway\n";
  return allow;
}

struct SolvedRun {
  Discretization disc;
  ValueSolution solution;
};

SolvedRun run_solver(const RunConfig& cfg, const ControlAffineSystem& sys, const std::string& dir,
                     std::ostream& out) {
  fs::create_directories(dir);
  Discretization disc = discretize(cfg, sys);
  out << "basis: N = " << disc.ops.n() << ", quadrature nodes = " << disc.quad.n_nodes() << '\n';

  std::ofstream trace(fs::path(dir) / "trace.csv");
  trace << "iteration,residual,change,abscissa,damping\n" << std::flush;
  SolverConfig sc = cfg.solver_config();
  sc.on_iteration = [&](const IterationRecord& r) {
    trace << r.iteration << ',' << format_number(r.residual) << ',' << format_number(r.change) << ','
          << format_number(r.abscissa) << ',' << format_number(r.damping) << '\n'
          << std::flush;
    out << "iteration " << r.iteration << ": change " << r.change << ", residual " << r.residual
        << ", abscissa " << r.abscissa << ", damping " << r.damping << '\n';
  };
  ValueSolution sol = solve_value_equation(disc.ops, sc);
  return {std::move(disc), std::move(sol)};
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  f << text;
  if (!f) throw std::runtime_error("cannot write '" + path.string() + "'");
}

}  // namespace

int cmd_solve(const CommandOptions& opts, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  if (!load(opts, cfg, err)) return kExitConfigError;
  const ControlAffineSystem sys = cfg.build_system();
  if (!tangent_gate(sys, cfg.tangent_samples, opts.allow_boundary, err)) return kExitTangentViolation;
  const std::string dir = output_dir(opts, cfg);

  std::optional<SolvedRun> run;
  try {
    run.emplace(run_solver(cfg, sys, dir, out));
  } catch (const NonConvergenceError& e) {
    err << "error: " << e.what() << '\n';
    return kExitNonConvergence;
  } catch (const UnstabilizableError& e) {
    err << "error: " << e.what() << '\n';
    return kExitNonConvergence;
  }
  const SosValueModel model = sos_extract(run->solution.S, cfg.solver_config(), run->disc.riesz, sys.b());
  if (model.negative_warning) {
    err << "warning: value matrix has a negative eigenvalue " << model.min_eigenvalue << '\n';
  }
  write_csv(fs::path(dir) / "singular_values.csv", singular_values_table(model));
  write_csv(fs::path(dir) / "value_grid.csv", value_grid_table(model, cfg.grid_points));
  write_csv(fs::path(dir) / "sos_model.csv", model_table(model));
  write_text(fs::path(dir) / "config.json", to_json(cfg));

  const auto& last = run->solution.trace.records.back();
  out << "converged in " << run->solution.trace.records.size() << " iterations (change "
      << last.change << ", residual " << last.residual << ")\n";
  out << "retained modes: " << model.n_modes();
  if (model.n_modes() > 0) out << ", sigma_1 = " << model.sigmas()[0];
  out << "\nwrote " << dir << '\n';
  if (opts.svg || cfg.emit_svg) return cmd_plot(dir, out, err);
  return kExitOk;
}

int cmd_validate(const CommandOptions& opts, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  if (!load(opts, cfg, err)) return kExitConfigError;
  const ControlAffineSystem sys = cfg.build_system();
  const std::string dir = output_dir(opts, cfg);
  const fs::path model_path = fs::path(opts.model_dir.value_or(dir)) / "sos_model.csv";
  if (!fs::exists(model_path)) {
    err << "error: missing model artifact " << model_path.string() << " (run solve first)\n";
    return kExitConfigError;
  }
  CsvTable table;
  try {
    table = read_csv(model_path.string());
  } catch (const std::runtime_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfigError;
  }

  const Discretization disc = discretize(cfg, sys);
  std::optional<SosValueModel> loaded;
  try {
    loaded = model_from_table(table, disc.riesz, sys.b());
  } catch (const std::exception& e) {
    err << "error: model does not match the configured basis: " << e.what() << '\n';
    return kExitConfigError;
  }
  SosValueModel model = *loaded;
  if (opts.modes) model = model.truncated(*opts.modes);
  const Eigen::MatrixXd S = reconstruct(model);

  const ValidationReport rep = validate_model(sys, model, cfg.validation, &disc.ops, &S);
  fs::create_directories(dir);

  CsvTable traj;
  for (int k = 0; k < sys.dim(); ++k) traj.header.push_back("z" + std::to_string(k + 1));
  for (const char* h : {"simulated_cost", "value", "rel_gap", "max_value_increase", "left_domain"}) {
    traj.header.push_back(h);
  }
  for (const auto& c : rep.cost_vs_value) {
    std::vector<double> row(c.z0.data(), c.z0.data() + c.z0.size());
    row.insert(row.end(), {c.simulated_cost, c.value, c.rel_gap, c.max_value_increase,
                           c.stop == StopReason::left_domain ? 1.0 : 0.0});
    traj.rows.push_back(std::move(row));
  }
  write_csv(fs::path(dir) / "trajectories.csv", traj);

  CsvTable hjb;
  for (int k = 0; k < sys.dim(); ++k) hjb.header.push_back("x" + std::to_string(k + 1));
  hjb.header.push_back("residual");
  hjb.header.push_back("normalized");
  const auto pts = hjb_sample_points(cfg.validation, sys.domain());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    std::vector<double> row(pts[i].data(), pts[i].data() + pts[i].size());
    row.push_back(rep.hjb.residuals[i]);
    row.push_back(rep.hjb.normalized[i]);
    hjb.rows.push_back(std::move(row));
  }
  write_csv(fs::path(dir) / "hjb_residuals.csv", hjb);

  const ValidationThresholds& th = cfg.thresholds;
  std::ofstream summary(fs::path(dir) / "validation.csv");
  summary << "check,value,threshold,status\n";
  auto line = [&](const char* name, std::optional<double> value, std::optional<double> threshold,
                  bool ok) {
    summary << name << ',' << (value ? format_number(*value) : "absent") << ','
            << (threshold ? format_number(*threshold) : "") << ','
            << (value ? (ok ? "pass" : "fail") : "absent") << '\n';
    out << name << ": " << (value ? format_number(*value) + (ok ? " pass" : " fail") : "absent")
        << '\n';
  };
  bool exited = false;
  for (const auto& c : rep.cost_vs_value) exited = exited || c.stop == StopReason::left_domain;
  if (rep.cost_vs_value.empty()) {
    line("cost_gap_max", std::nullopt, th.cost_gap, true);
  } else {
    line("cost_gap_max", rep.max_cost_gap(), th.cost_gap, rep.max_cost_gap() <= th.cost_gap && !exited);
  }
  if (rep.hjb.residuals.empty()) {
    line("hjb_median_normalized", std::nullopt, th.hjb_median, true);
  } else {
    line("hjb_median_normalized", rep.hjb.median_normalized, th.hjb_median,
         rep.hjb.median_normalized <= th.hjb_median);
  }
  if (rep.hessian) {
    line("hessian_rel_gap", rep.hessian->rel_gap, th.hessian_gap, rep.hessian->rel_gap <= th.hessian_gap);
  } else {
    line("hessian_rel_gap", std::nullopt, th.hessian_gap, true);
  }
  if (rep.stability) {
    line("discrete_abscissa", rep.stability->discrete_abscissa, 0.0, rep.stability->discrete_hurwitz);
    line("linearized_abscissa", rep.stability->linearized_abscissa, std::nullopt, true);
    line("omega_bound", rep.stability->omega_bound, std::nullopt, true);
  }
  if (rep.decay) {
    line("decay_slope", rep.decay->slope, std::nullopt, true);
    line("noise_floor_index", rep.decay->noise_floor_index, std::nullopt, true);
  } else {
    line("decay_slope", std::nullopt, std::nullopt, true);
  }
  for (const auto& c : rep.cost_vs_value) {
    if (c.stop == StopReason::left_domain) {
      err << "warning: trajectory from " << point_text(c.z0) << " left the domain\n";
    }
  }
  const bool ok = rep.passes(th);
  out << (ok ? "validation passed" : "validation failed") << '\n';
  return ok ? kExitOk : kExitValidationFailed;
}

int cmd_lqr_check(const CommandOptions& opts, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  if (!load(opts, cfg, err)) return kExitConfigError;
  const ControlAffineSystem sys = cfg.build_system();
  if (!sys.is_linear()) {
    err << "config error: lqr-check needs a linear system (f linear, b constant, c linear)\n";
    return kExitConfigError;
  }
  tangent_gate(sys, cfg.tangent_samples, true, err);
  const std::string dir = output_dir(opts, cfg);

  std::optional<SolvedRun> run;
  try {
    run.emplace(run_solver(cfg, sys, dir, out));
  } catch (const NonConvergenceError& e) {
    err << "error: " << e.what() << '\n';
    return kExitNonConvergence;
  } catch (const UnstabilizableError& e) {
    err << "error: " << e.what() << '\n';
    return kExitNonConvergence;
  }
  const SosValueModel model = sos_extract(run->solution.S, cfg.solver_config(), run->disc.riesz, sys.b());
  const Linearization lin = linearize(sys);
  const RiccatiSolution are = solve_are({lin.A0, lin.b0, lin.Q});
  const Eigen::MatrixXd& P = are.P;

  double v_err = 0.0, v_ref = 0.0, u_err = 0.0, u_ref = 0.0;
  for (const auto& z : domain_grid(sys.domain(), cfg.grid_points)) {
    const double v_ex = z.dot(P * z);
    const double u_ex = -sys.b().value(z).dot(P * z);
    v_err = std::max(v_err, std::abs(model.value(z) - v_ex));
    u_err = std::max(u_err, std::abs(model.feedback(z) - u_ex));
    v_ref = std::max(v_ref, std::abs(v_ex));
    u_ref = std::max(u_ref, std::abs(u_ex));
  }
  const double v_rel = v_ref > 0.0 ? v_err / v_ref : v_err;
  const double u_rel = u_ref > 0.0 ? u_err / u_ref : u_err;
  const HessianCheck hc = hessian_check(model, P);

  std::ofstream table(fs::path(dir) / "lqr_check.csv");
  table << "quantity,pipeline,reference,rel_error\n";
  const Eigen::MatrixXd P_fd = 0.5 * hc.hessian;
  for (Eigen::Index i = 0; i < P.rows(); ++i) {
    for (Eigen::Index j = 0; j < P.cols(); ++j) {
      const double rel = std::abs(P_fd(i, j) - P(i, j)) / P.norm();
      table << "P_" << i + 1 << j + 1 << ',' << format_number(P_fd(i, j)) << ',' << format_number(P(i, j))
            << ',' << format_number(rel) << '\n';
      out << "P[" << i + 1 << "][" << j + 1 << "]: pipeline " << format_number(P_fd(i, j)) << ", riccati "
          << format_number(P(i, j)) << '\n';
    }
  }
  table << "value_grid_linf,," << ',' << format_number(v_rel) << '\n';
  table << "feedback_grid_linf,," << ',' << format_number(u_rel) << '\n';
  table << "hessian_gap,," << ',' << format_number(hc.rel_gap) << '\n';
  out << "riccati residual: " << are.residual << '\n';
  out << "value rel Linf error: " << v_rel << '\n';
  out << "feedback rel Linf error: " << u_rel << '\n';
  out << "hessian rel gap: " << hc.rel_gap << '\n';
  const double tol = cfg.lqr_tolerance;
  const bool ok = v_rel <= tol && u_rel <= tol && hc.rel_gap <= tol;
  out << (ok ? "lqr check passed" : "lqr check failed") << " (tolerance " << tol << ")\n";
  return ok ? kExitOk : kExitValidationFailed;
}

int cmd_plot(const std::string& run_dir, std::ostream& out, std::ostream& err) {
  const fs::path dir(run_dir);
  CsvTable sv, grid;
  try {
    sv = read_csv((dir / "singular_values.csv").string());
    grid = read_csv((dir / "value_grid.csv").string());
  } catch (const std::runtime_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfigError;
  }
  if (sv.rows.empty() || grid.rows.empty()) {
    err << "error: no data rows in " << (sv.rows.empty() ? "singular_values.csv" : "value_grid.csv") << '\n';
    return kExitConfigError;
  }
  std::vector<double> sigmas;
  for (const auto& r : sv.rows) sigmas.push_back(r.at(1));
  try {
    write_text(dir / "decay.svg", render_decay_svg(sigmas));
    write_text(dir / "value.svg", render_value_svg(grid));
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfigError;
  }
  out << "wrote " << (dir / "decay.svg").string() << " and " << (dir / "value.svg").string() << '\n';
  return kExitOk;
}

}  // namespace koopman_hjb
