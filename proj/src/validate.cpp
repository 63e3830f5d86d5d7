#include "koopman_hjb/validate.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <stdexcept>

#include <boost/numeric/odeint.hpp>
#include <Eigen/Eigenvalues>

namespace koopman_hjb {

namespace {

namespace odeint = boost::numeric::odeint;
using OdeState = std::vector<double>;

double domain_extent(const BoxDomain& dom) {
  double e = 0.0;
  for (int k = 0; k < dom.dim(); ++k) e = std::max(e, dom.upper()[k] - dom.lower()[k]);
  return e;
}

Eigen::VectorXd clamp_to(const BoxDomain& dom, Eigen::VectorXd x) {
  for (int k = 0; k < dom.dim(); ++k) x[k] = std::clamp(x[k], dom.lower()[k], dom.upper()[k]);
  return x;
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  const double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  return 0.5 * (hi + *std::max_element(v.begin(), v.begin() + mid));
}

}  // namespace

Trajectory simulate_closed_loop(const ControlAffineSystem& sys, const SosValueModel& model,
                                const Eigen::VectorXd& z0, const SimulationOptions& opts) {
  const BoxDomain& dom = sys.domain();
  const int d = sys.dim();
  if (z0.size() != d) throw std::invalid_argument("simulate_closed_loop: dimension mismatch");
  if (!dom.contains(z0)) throw std::domain_error("simulate_closed_loop: z0 outside the domain");
  if (!(opts.t_final > 0.0) || !(opts.rtol > 0.0)) {
    throw std::invalid_argument("simulate_closed_loop: t_final and rtol must be positive");
  }

  auto control = [&](const Eigen::VectorXd& x) { return model.feedback(clamp_to(dom, x)); };
  auto rhs = [&](const OdeState& s, OdeState& ds, double /*t*/) {
    const Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(s.data(), d);
    const double u = control(x);
    const Eigen::VectorXd dx = sys.f().value(x) + sys.b().value(x) * u;
    for (int k = 0; k < d; ++k) ds[k] = dx[k];
    ds[d] = sys.c().value(x).squaredNorm() + u * u;
  };

  Trajectory traj;
  OdeState s(d + 1, 0.0);
  for (int k = 0; k < d; ++k) s[k] = z0[k];
  double t = 0.0;
  auto record = [&]() {
    const Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(s.data(), d);
    traj.times.push_back(t);
    traj.states.push_back(x);
    traj.controls.push_back(control(x));
    traj.running_cost.push_back(s[d]);
  };
  record();

  const double slack = 1e-9 * domain_extent(dom);
  auto stepper = odeint::make_controlled(opts.atol, opts.rtol, odeint::runge_kutta_dopri5<OdeState>());
  double dt = 1e-3 * opts.t_final;
  traj.stop = StopReason::final_time;
  if (z0.norm() <= opts.origin_radius) {
    traj.stop = StopReason::reached_origin;
  } else {
    while (t < opts.t_final) {
      dt = std::min(dt, opts.t_final - t);
      if (stepper.try_step(rhs, s, t, dt) == odeint::fail) {
        if (dt < 1e-14 * std::max(1.0, t)) {
          throw std::runtime_error("simulate_closed_loop: step-size underflow");
        }
        continue;
      }
      record();
      const Eigen::VectorXd& x = traj.states.back();
      if (!dom.contains(x, slack)) {
        traj.stop = StopReason::left_domain;
        break;
      }
      if (x.norm() <= opts.origin_radius) {
        traj.stop = StopReason::reached_origin;
        break;
      }
    }
  }
  if (traj.stop != StopReason::left_domain) traj.tail_estimate = model.value(traj.states.back());
  return traj;
}

double max_value_increase(const SosValueModel& model, const Trajectory& traj) {
  double worst = -std::numeric_limits<double>::infinity();
  double prev = 0.0;
  for (std::size_t i = 0; i < traj.states.size(); ++i) {
    if (!model.riesz().raw.domain().contains(traj.states[i])) break;
    const double v = model.value(traj.states[i]);
    if (i > 0) worst = std::max(worst, v - prev);
    prev = v;
  }
  return std::isfinite(worst) ? worst : 0.0;
}

HjbStatistics hjb_residual(const ControlAffineSystem& sys, const SosValueModel& model,
                           const std::vector<Eigen::VectorXd>& points) {
  HjbStatistics st;
  std::vector<double> abs_res;
  for (const auto& z : points) {
    const auto vg = model.value_and_gradient(z);
    const double c2 = sys.c().value(z).squaredNorm();
    const double bg = sys.b().value(z).dot(vg.gradient);
    const double r = vg.gradient.dot(sys.f().value(z)) + c2 - 0.25 * bg * bg;
    st.residuals.push_back(r);
    st.normalized.push_back(std::abs(r) / (c2 + 1e-12));
    abs_res.push_back(std::abs(r));
  }
  if (!points.empty()) {
    st.max_abs = *std::max_element(abs_res.begin(), abs_res.end());
    st.median_abs = median(abs_res);
    st.max_normalized = *std::max_element(st.normalized.begin(), st.normalized.end());
    st.median_normalized = median(st.normalized);
  }
  return st;
}

std::vector<Eigen::VectorXd> box_sample_grid(const std::vector<double>& lower,
                                             const std::vector<double>& upper, int g) {
  if (lower.size() != upper.size() || lower.empty() || lower.size() > 2) {
    throw std::invalid_argument("box_sample_grid: bounds must have dimension 1 or 2");
  }
  if (g < 1) throw std::invalid_argument("box_sample_grid: need at least one point per axis");
  const int d = static_cast<int>(lower.size());
  auto coord = [&](int k, int i) {
    return lower[k] + (upper[k] - lower[k]) * (i + 0.5) / g;
  };
  std::vector<Eigen::VectorXd> pts;
  if (d == 1) {
    for (int i = 0; i < g; ++i) pts.push_back(Eigen::VectorXd::Constant(1, coord(0, i)));
    return pts;
  }
  for (int j = 0; j < g; ++j) {
    for (int i = 0; i < g; ++i) pts.push_back(Eigen::Vector2d(coord(0, i), coord(1, j)));
  }
  return pts;
}

HessianCheck hessian_check(const SosValueModel& model, const Eigen::MatrixXd& P_hat) {
  const BoxDomain& dom = model.riesz().raw.domain();
  const int d = dom.dim();
  if (P_hat.rows() != d || P_hat.cols() != d) throw std::invalid_argument("hessian_check: P̂ must be d x d");
  if (!dom.contains_origin()) throw std::domain_error("hessian_check: origin outside the domain");

  HessianCheck hc;
  hc.step = 1e-3 * 0.5 * domain_extent(dom);
  const double h = hc.step;
  const Eigen::VectorXd o = Eigen::VectorXd::Zero(d);
  auto e = [&](int k) { return Eigen::VectorXd::Unit(d, k); };
  const double v0 = model.value(o);
  hc.hessian.resize(d, d);
  for (int k = 0; k < d; ++k) {
    hc.hessian(k, k) = (model.value(o + h * e(k)) - 2.0 * v0 + model.value(o - h * e(k))) / (h * h);
    for (int l = k + 1; l < d; ++l) {
      const double hkl = (model.value(o + h * e(k) + h * e(l)) - model.value(o + h * e(k) - h * e(l)) -
                          model.value(o - h * e(k) + h * e(l)) + model.value(o - h * e(k) - h * e(l))) /
                         (4.0 * h * h);
      hc.hessian(k, l) = hkl;
      hc.hessian(l, k) = hkl;
    }
  }
  hc.reference = 2.0 * P_hat;
  hc.rel_gap = (hc.hessian - hc.reference).norm() / hc.reference.norm();
  return hc;
}

HessianCheck hessian_check(const ControlAffineSystem& sys, const SosValueModel& model) {
  return hessian_check(model, linearized_riccati(sys).P);
}

DecayReport decay_report(const std::vector<double>& sigmas) {
  const int m = static_cast<int>(sigmas.size());
  if (m < 5) throw std::invalid_argument("decay_report: too few modes");
  DecayReport r;
  r.sigmas = sigmas;
  r.tail_sums.assign(m, 0.0);
  double acc = 0.0;
  for (int i = m - 1; i >= 0; --i) {
    acc += sigmas[i];
    r.tail_sums[i] = acc;
  }
  r.noise_floor_index = m + 1;
  for (int i = 0; i < m; ++i) {
    if (sigmas[i] < 1e-12 * sigmas[0]) {
      r.noise_floor_index = i + 1;
      break;
    }
  }
  const int n_fit = r.noise_floor_index - 1;
  if (n_fit < 2) throw std::invalid_argument("decay_report: too few modes before the noise floor");
  Eigen::MatrixXd X(n_fit, 2);
  Eigen::VectorXd y(n_fit);
  for (int i = 0; i < n_fit; ++i) {
    X(i, 0) = 1.0;
    X(i, 1) = std::log(static_cast<double>(i + 1));
    y[i] = std::log(r.tail_sums[i]);
  }
  r.slope = X.colPivHouseholderQr().solve(y)[1];
  return r;
}

DecayReport decay_report(const SosValueModel& model) {
  const auto& s = model.sigmas();
  return decay_report(std::vector<double>(s.data(), s.data() + s.size()));
}

StabilityReport stability_report(const ControlAffineSystem& sys, const AssembledOperators& ops,
                                 const Eigen::MatrixXd& S) {
  StabilityReport r;
  const Linearization lin = linearize(sys);
  const RiccatiSolution are = solve_are({lin.A0, lin.b0, lin.Q});
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> peig(are.P);
  const Eigen::VectorXd lp = peig.eigenvalues();
  if (lp.minCoeff() > 1e-14 * std::max(1.0, lp.maxCoeff())) {
    const Eigen::MatrixXd P_inv_sqrt =
        peig.eigenvectors() * lp.cwiseSqrt().cwiseInverse().asDiagonal() * peig.eigenvectors().transpose();
    const Eigen::MatrixXd K = P_inv_sqrt * lin.Q * P_inv_sqrt;
    const double lam = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(0.5 * (K + K.transpose()),
                                                                      Eigen::EigenvaluesOnly)
                           .eigenvalues()
                           .minCoeff();
    r.omega_bound = lam > 0.0 ? -0.5 * lam : 0.0;
  }
  r.decay_guaranteed = r.omega_bound < 0.0;
  r.linearized_abscissa = are.closed_loop_abscissa;
  r.discrete_abscissa = spectral_abscissa(closed_loop(ops, 0.5 * (S + S.transpose())).A);
  r.discrete_hurwitz = r.discrete_abscissa < 0.0;
  return r;
}

std::vector<Eigen::VectorXd> select_initial_states(const SosValueModel& model, int n,
                                                   int candidate_grid) {
  if (n <= 0) return {};
  const BoxDomain& dom = model.riesz().raw.domain();
  const auto grid = box_sample_grid(dom.lower(), dom.upper(), candidate_grid);
  std::vector<double> values(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) values[i] = model.value(grid[i]);
  const double vmax = *std::max_element(values.begin(), values.end());
  std::vector<Eigen::VectorXd> candidates;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (values[i] >= 0.1 * vmax && values[i] > 0.0) candidates.push_back(grid[i]);
  }
  if (static_cast<int>(candidates.size()) <= n) return candidates;
  std::vector<Eigen::VectorXd> picks;
  for (int k = 0; k < n; ++k) {
    const auto idx = static_cast<std::size_t>((k + 0.5) * candidates.size() / n);
    picks.push_back(candidates[idx]);
  }
  return picks;
}

std::vector<Eigen::VectorXd> hjb_sample_points(const ValidationSettings& settings,
                                               const BoxDomain& dom) {
  if (settings.hjb_sample_grid <= 0) return {};
  std::vector<double> lo = settings.hjb_lower;
  std::vector<double> hi = settings.hjb_upper;
  if (lo.empty()) {
    for (int k = 0; k < dom.dim(); ++k) {
      lo.push_back(std::max(-1.0, dom.lower()[k]));
      hi.push_back(std::min(1.0, dom.upper()[k]));
    }
  }
  return box_sample_grid(lo, hi, settings.hjb_sample_grid);
}

double ValidationReport::max_cost_gap() const {
  double g = 0.0;
  for (const auto& c : cost_vs_value) g = std::max(g, c.rel_gap);
  return g;
}

bool ValidationReport::passes(const ValidationThresholds& t) const {
  for (const auto& c : cost_vs_value) {
    if (c.stop == StopReason::left_domain || !(c.rel_gap <= t.cost_gap)) return false;
  }
  if (!hjb.residuals.empty() && !(hjb.median_normalized <= t.hjb_median)) return false;
  if (hessian && !(hessian->rel_gap <= t.hessian_gap)) return false;
  if (stability && !stability->discrete_hurwitz) return false;
  return true;
}

ValidationReport validate_model(const ControlAffineSystem& sys, const SosValueModel& model,
                                const ValidationSettings& settings, const AssembledOperators* ops,
                                const Eigen::MatrixXd* S) {
  ValidationReport rep;
  const BoxDomain& dom = sys.domain();

  const auto starts = select_initial_states(model, settings.n_trajectories, settings.candidate_grid);
  rep.cost_vs_value.resize(starts.size());
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < static_cast<int>(starts.size()); ++i) {
    try {
      const Trajectory traj = simulate_closed_loop(sys, model, starts[i], settings.simulation);
      CostSample& cs = rep.cost_vs_value[i];
      cs.z0 = starts[i];
      cs.simulated_cost = traj.total_cost();
      cs.value = model.value(starts[i]);
      cs.rel_gap = std::abs(cs.simulated_cost - cs.value) / cs.value;
      cs.max_value_increase = max_value_increase(model, traj);
      cs.stop = traj.stop;
    } catch (...) {
#pragma omp critical
      failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  const auto hjb_points = hjb_sample_points(settings, dom);
  if (!hjb_points.empty()) rep.hjb = hjb_residual(sys, model, hjb_points);
  if (dom.contains_origin()) rep.hessian = hessian_check(sys, model);
  if (ops && S) rep.stability = stability_report(sys, *ops, *S);
  if (model.n_modes() >= 5) {
    try {
      rep.decay = decay_report(model);
    } catch (const std::invalid_argument&) {
      // Too few pre-floor modes: no decay record.
    }
  }
  return rep;
}

}  // namespace koopman_hjb
