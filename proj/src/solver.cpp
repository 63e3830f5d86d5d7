#include "koopman_hjb/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace koopman_hjb {

void SolverConfig::validate() const {
  if (!(tol > 0.0)) throw std::invalid_argument("solver: tol must be positive");
  if (max_iter < 1) throw std::invalid_argument("solver: max_iter must be >= 1");
  if (!(sigma_clip >= 0.0)) throw std::invalid_argument("solver: sigma_clip must be >= 0");
}

namespace {

Eigen::MatrixXd sym(const Eigen::MatrixXd& S) { return 0.5 * (S + S.transpose()); }

double equation_residual(const ClosedLoop& cl, const Eigen::MatrixXd& S,
                         const Eigen::MatrixXd& observable_term) {
  return (cl.A.transpose() * S + S * cl.A + cl.kappa * cl.kappa.transpose() + observable_term)
      .norm();
}

constexpr double kMinDamping = 1.0 / 1024.0;

}  // namespace

ClosedLoop closed_loop(const AssembledOperators& ops, const Eigen::MatrixXd& S) {
  ClosedLoop cl;
  cl.u_nodes = feedback_nodes(ops, S);
  cl.kappa = project_feedback(ops, cl.u_nodes);
  const Eigen::MatrixXd G = ops.F + contract_control(ops, cl.u_nodes);
  cl.A = ops.solve_M(G).transpose();
  return cl;
}

double equation_residual(const AssembledOperators& ops, const Eigen::MatrixXd& S) {
  const Eigen::MatrixXd Ss = sym(S);
  return equation_residual(closed_loop(ops, Ss), Ss, ops.observable_term);
}

RiccatiSolution linearized_riccati(const ControlAffineSystem& sys) {
  const Linearization lin = linearize(sys);
  return solve_are({lin.A0, lin.b0, lin.Q});
}

Eigen::MatrixXd lqr_lift(const AssembledOperators& ops, const Eigen::MatrixXd& P) {
  const Eigen::MatrixXd& L = ops.linear_coords;
  if (P.rows() != L.cols() || P.cols() != L.cols()) {
    throw std::invalid_argument("lqr_lift: P must be d x d");
  }
  return sym(L * P * L.transpose());
}

ValueSolution solve_value_equation(const AssembledOperators& ops, const SolverConfig& cfg) {
  const int N = ops.n();
  Eigen::MatrixXd S0 = Eigen::MatrixXd::Zero(N, N);
  if (cfg.init == InitKind::lqr_lift) S0 = lqr_lift(ops, linearized_riccati(ops.system).P);
  return solve_value_equation(ops, cfg, S0);
}

ValueSolution solve_value_equation(const AssembledOperators& ops, const SolverConfig& cfg,
                                   const Eigen::MatrixXd& S0) {
  cfg.validate();
  const int N = ops.n();
  if (S0.rows() != N || S0.cols() != N) {
    throw std::invalid_argument("solve_value_equation: S0 must be N x N");
  }
  ValueSolution out;
  out.S = sym(S0);
  ClosedLoop cl = closed_loop(ops, out.S);
  auto lyap = std::make_unique<LyapunovSolver>(cl.A);
  if (!lyap->is_hurwitz()) {
    std::ostringstream msg;
    msg << "solve_value_equation: initial closed loop is not Hurwitz (abscissa "
        << lyap->spectral_abscissa() << ")";
    throw UnstabilizableError(msg.str(), out.trace);
  }

  for (int it = 1; it <= cfg.max_iter; ++it) {
    const Eigen::MatrixXd target =
        lyap->solve(cl.kappa * cl.kappa.transpose() + ops.observable_term);
    const Eigen::MatrixXd step = target - out.S;

    double theta = 1.0;
    Eigen::MatrixXd S_next;
    ClosedLoop cl_next;
    std::unique_ptr<LyapunovSolver> lyap_next;
    while (true) {
      S_next = sym(out.S + theta * step);
      cl_next = closed_loop(ops, S_next);
      lyap_next = std::make_unique<LyapunovSolver>(cl_next.A);
      if (lyap_next->is_hurwitz()) break;
      if (cfg.damping == Damping::off || theta * 0.5 < kMinDamping) {
        std::ostringstream msg;
        msg << "solve_value_equation: closed loop not Hurwitz at iteration " << it
            << " (damping " << theta << ", abscissa " << lyap_next->spectral_abscissa()
            << "); unstabilizable at this discretization";
        throw UnstabilizableError(msg.str(), out.trace);
      }
      theta *= 0.5;
    }

    IterationRecord rec;
    rec.iteration = it;
    const double diff = (S_next - out.S).norm();
    const double scale = S_next.norm();
    rec.change = diff == 0.0 ? 0.0 : diff / std::max(scale, std::numeric_limits<double>::min());
    rec.residual = equation_residual(cl_next, S_next, ops.observable_term);
    rec.abscissa = lyap_next->spectral_abscissa();
    rec.damping = theta;
    out.trace.records.push_back(rec);
    if (cfg.on_iteration) cfg.on_iteration(rec);

    out.S = std::move(S_next);
    cl = std::move(cl_next);
    lyap = std::move(lyap_next);
    if (rec.change <= cfg.tol) {
      out.trace.converged = true;
      return out;
    }
  }
  std::ostringstream msg;
  msg << "solve_value_equation: no convergence in " << cfg.max_iter
      << " iterations (last relative change " << out.trace.records.back().change << ")";
  throw NonConvergenceError(msg.str(), out.trace);
}

// ---------------------------------------------------------------------------

SosValueModel::SosValueModel(RieszBasis riesz, PolyField b, Eigen::VectorXd sigmas,
                             Eigen::MatrixXd coeffs)
    : riesz_(std::move(riesz)), b_(std::move(b)), sigmas_(std::move(sigmas)),
      coeffs_(std::move(coeffs)) {
  if (coeffs_.cols() != sigmas_.size() || coeffs_.rows() != riesz_.n()) {
    throw std::invalid_argument("SosValueModel: coefficient shape mismatch");
  }
  if (b_.dim_in() != riesz_.raw.dim() || b_.dim_out() != riesz_.raw.dim()) {
    throw std::invalid_argument("SosValueModel: input field dimension mismatch");
  }
  for (Eigen::Index i = 0; i < sigmas_.size(); ++i) {
    if (!(sigmas_[i] > 0.0)) throw std::invalid_argument("SosValueModel: sigmas must be positive");
    if (i > 0 && sigmas_[i] > sigmas_[i - 1]) {
      throw std::invalid_argument("SosValueModel: sigmas must be descending");
    }
  }
  factors_ = riesz_.transform * coeffs_ * sigmas_.cwiseSqrt().asDiagonal();
}

void SosValueModel::check_point(const Eigen::VectorXd& z) const {
  const auto& dom = riesz_.raw.domain();
  if (z.size() != dom.dim()) throw std::invalid_argument("SosValueModel: point dimension mismatch");
  double extent = 0.0;
  for (int k = 0; k < dom.dim(); ++k) extent = std::max(extent, dom.upper()[k] - dom.lower()[k]);
  if (!dom.contains(z, 1e-12 * extent)) {
    throw std::domain_error("SosValueModel: point outside the domain");
  }
}

ValueAndGradientAt SosValueModel::value_and_gradient(const Eigen::VectorXd& z) const {
  check_point(z);
  const auto& raw = riesz_.raw;
  const int d = raw.dim();
  const int nl = raw.n_local();
  const int m = n_modes();
  std::vector<int> active;
  std::vector<double> phi(nl);
  std::vector<double> dphi(d * nl);
  Eigen::VectorXd zc = z;
  for (int k = 0; k < d; ++k) {
    zc[k] = std::clamp(zc[k], raw.domain().lower()[k], raw.domain().upper()[k]);
  }
  raw.eval_local(zc, active, phi.data(), dphi.data());

  Eigen::VectorXd p = Eigen::VectorXd::Zero(m);
  Eigen::MatrixXd dp = Eigen::MatrixXd::Zero(m, d);
  for (int a = 0; a < nl; ++a) {
    const auto row = factors_.row(active[a]);
    p += phi[a] * row.transpose();
    for (int k = 0; k < d; ++k) dp.col(k) += dphi[k * nl + a] * row.transpose();
  }
  ValueAndGradientAt out;
  out.value = p.squaredNorm();
  out.gradient = 2.0 * dp.transpose() * p;
  return out;
}

double SosValueModel::value(const Eigen::VectorXd& z) const { return value_and_gradient(z).value; }

double SosValueModel::feedback(const Eigen::VectorXd& z) const {
  const auto vg = value_and_gradient(z);
  return -0.5 * b_.value(z).dot(vg.gradient);
}

Eigen::VectorXd SosValueModel::modes(const Eigen::VectorXd& z) const {
  check_point(z);
  const auto& raw = riesz_.raw;
  std::vector<int> active;
  std::vector<double> phi(raw.n_local());
  std::vector<double> dphi(raw.dim() * raw.n_local());
  raw.eval_local(z, active, phi.data(), dphi.data());
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n_modes());
  for (int a = 0; a < raw.n_local(); ++a) out += phi[a] * factors_.row(active[a]).transpose();
  return out.cwiseQuotient(sigmas_.cwiseSqrt());
}

SosValueModel SosValueModel::truncated(int k) const {
  if (k < 0) throw std::invalid_argument("SosValueModel::truncated: negative mode count");
  k = std::min(k, n_modes());
  SosValueModel out(riesz_, b_, sigmas_.head(k), coeffs_.leftCols(k));
  out.min_eigenvalue = min_eigenvalue;
  out.negative_warning = negative_warning;
  return out;
}

SosValueModel SosValueModel::scaled(double factor) const {
  if (!(factor > 0.0)) throw std::invalid_argument("SosValueModel::scaled: factor must be positive");
  SosValueModel out(riesz_, b_, factor * sigmas_, coeffs_);
  out.min_eigenvalue = factor * min_eigenvalue;
  out.negative_warning = negative_warning;
  return out;
}

double evaluate_value(const SosValueModel& model, const Eigen::VectorXd& z) { return model.value(z); }

double evaluate_feedback(const SosValueModel& model, const Eigen::VectorXd& z) {
  return model.feedback(z);
}

SosValueModel sos_extract(const Eigen::MatrixXd& S, const SolverConfig& cfg,
                          const RieszBasis& riesz, const PolyField& b) {
  if (S.rows() != S.cols()) throw std::invalid_argument("sos_extract: S must be square");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym(S));
  if (eig.info() != Eigen::Success) throw std::runtime_error("sos_extract: eigensolver failed");
  const Eigen::VectorXd& lambda = eig.eigenvalues();  // ascending
  const Eigen::MatrixXd& V = eig.eigenvectors();
  const Eigen::Index n = lambda.size();

  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = n - 1; i >= 0; --i) {
    if (lambda[i] > cfg.sigma_clip) keep.push_back(i);
  }
  Eigen::VectorXd sigmas(keep.size());
  Eigen::MatrixXd coeffs(n, keep.size());
  for (std::size_t c = 0; c < keep.size(); ++c) {
    sigmas[c] = lambda[keep[c]];
    Eigen::VectorXd a = V.col(keep[c]);
    Eigen::Index pivot;
    a.cwiseAbs().maxCoeff(&pivot);
    if (a[pivot] < 0.0) a = -a;  // deterministic sign
    coeffs.col(c) = a;
  }
  SosValueModel model(riesz, b, sigmas, coeffs);
  if (n > 0) {
    const double sigma_max = std::max(lambda[n - 1], 0.0);
    model.min_eigenvalue = std::min(lambda[0], 0.0);
    model.negative_warning = lambda[0] < -1e-6 * sigma_max;
  }
  return model;
}

}  // namespace koopman_hjb
