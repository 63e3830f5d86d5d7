#include "koopman_hjb/system.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace koopman_hjb {

PolyField::PolyField(int dim_in, std::vector<std::vector<Monomial>> components)
    : dim_in_(dim_in), components_(std::move(components)) {
  if (dim_in_ < 1) throw std::invalid_argument("PolyField: dim_in must be positive");
  for (const auto& comp : components_) {
    for (const auto& m : comp) {
      if (static_cast<int>(m.exponents.size()) != dim_in_) {
        throw std::invalid_argument("PolyField: exponent vector length must equal dim_in");
      }
      for (int e : m.exponents) {
        if (e < 0) throw std::invalid_argument("PolyField: negative exponent");
      }
      if (!std::isfinite(m.coeff)) throw std::invalid_argument("PolyField: non-finite coefficient");
    }
  }
}

PolyField PolyField::constant(int dim_in, const Eigen::VectorXd& c) {
  std::vector<std::vector<Monomial>> comps(c.size());
  for (Eigen::Index i = 0; i < c.size(); ++i) {
    if (c[i] != 0.0) comps[i].push_back({std::vector<int>(dim_in, 0), c[i]});
  }
  return PolyField(dim_in, std::move(comps));
}

PolyField PolyField::linear(const Eigen::MatrixXd& A) {
  const int d = static_cast<int>(A.cols());
  std::vector<std::vector<Monomial>> comps(A.rows());
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    for (int j = 0; j < d; ++j) {
      if (A(i, j) == 0.0) continue;
      std::vector<int> e(d, 0);
      e[j] = 1;
      comps[i].push_back({e, A(i, j)});
    }
  }
  return PolyField(d, std::move(comps));
}

namespace {

double ipow(double x, int e) {
  double r = 1.0;
  for (int i = 0; i < e; ++i) r *= x;
  return r;
}

int total_degree(const Monomial& m) {
  int s = 0;
  for (int e : m.exponents) s += e;
  return s;
}

}  // namespace

Eigen::VectorXd PolyField::value(const Eigen::VectorXd& x) const {
  if (x.size() != dim_in_) throw std::invalid_argument("PolyField: point dimension mismatch");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(dim_out());
  for (int i = 0; i < dim_out(); ++i) {
    for (const auto& m : components_[i]) {
      double t = m.coeff;
      for (int k = 0; k < dim_in_; ++k) t *= ipow(x[k], m.exponents[k]);
      out[i] += t;
    }
  }
  return out;
}

int PolyField::max_degree() const {
  int deg = 0;
  for (const auto& comp : components_) {
    for (const auto& m : comp) deg = std::max(deg, total_degree(m));
  }
  return deg;
}

int PolyField::max_nonzero_degree() const {
  int deg = -1;
  for (const auto& comp : components_) {
    for (const auto& m : comp) {
      if (m.coeff != 0.0) deg = std::max(deg, total_degree(m));
    }
  }
  return deg;
}

bool PolyField::homogeneous_of_degree(int degree) const {
  for (const auto& comp : components_) {
    for (const auto& m : comp) {
      if (m.coeff != 0.0 && total_degree(m) != degree) return false;
    }
  }
  return true;
}

FieldEval eval_field(const PolyField& field, const Eigen::VectorXd& x) {
  const int d = field.dim_in();
  if (x.size() != d) throw std::invalid_argument("eval_field: point dimension mismatch");
  FieldEval out;
  out.value = Eigen::VectorXd::Zero(field.dim_out());
  out.jacobian = Eigen::MatrixXd::Zero(field.dim_out(), d);
  for (int i = 0; i < field.dim_out(); ++i) {
    for (const auto& m : field.components()[i]) {
      double t = m.coeff;
      for (int k = 0; k < d; ++k) t *= ipow(x[k], m.exponents[k]);
      out.value[i] += t;
      for (int j = 0; j < d; ++j) {
        const int e = m.exponents[j];
        if (e == 0) continue;
        double g = m.coeff * e;
        for (int k = 0; k < d; ++k) g *= ipow(x[k], k == j ? e - 1 : m.exponents[k]);
        out.jacobian(i, j) += g;
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

ControlAffineSystem::ControlAffineSystem(PolyField f, PolyField b, PolyField c,
                                         BoxDomain domain)
    : f_(std::move(f)), b_(std::move(b)), c_(std::move(c)), domain_(std::move(domain)) {
  const int d = domain_.dim();
  if (f_.dim_in() != d || f_.dim_out() != d) {
    throw std::invalid_argument("ControlAffineSystem: f must map R^d to R^d");
  }
  if (b_.dim_in() != d || b_.dim_out() != d) {
    throw std::invalid_argument("ControlAffineSystem: b must map R^d to R^d");
  }
  if (c_.dim_in() != d || c_.dim_out() < 1) {
    throw std::invalid_argument("ControlAffineSystem: c must map R^d to R^r with r >= 1");
  }
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(d);
  if (f_.value(zero).cwiseAbs().maxCoeff() != 0.0) {
    throw std::invalid_argument("ControlAffineSystem: f(0) must vanish");
  }
  if (c_.value(zero).cwiseAbs().maxCoeff() != 0.0) {
    throw std::invalid_argument("ControlAffineSystem: c(0) must vanish");
  }
}

bool ControlAffineSystem::is_linear() const {
  return f_.homogeneous_of_degree(1) && b_.homogeneous_of_degree(0) &&
         c_.homogeneous_of_degree(1);
}

ControlAffineSystem vanderpol_preset(const VanDerPolParameters& p) {
  // f1 = x2 - alpha x1^3
  // f2 = -mu x1^2 x2 + mu x2 - x1 - eta x2
  std::vector<std::vector<Monomial>> f(2);
  f[0] = {{{0, 1}, 1.0}, {{3, 0}, -p.alpha}};
  f[1] = {{{2, 1}, -p.mu}, {{0, 1}, p.mu}, {{1, 0}, -1.0}, {{0, 1}, -p.eta}};
  std::vector<std::vector<Monomial>> c(2);
  c[0] = {{{1, 0}, 1.0}};
  c[1] = {{{0, 1}, 1.0}};
  return ControlAffineSystem(PolyField(2, std::move(f)),
                             PolyField::constant(2, Eigen::Vector2d(0.0, p.gamma)),
                             PolyField(2, std::move(c)), BoxDomain({-3.0, -3.0}, {3.0, 3.0}));
}

ControlAffineSystem linear_preset(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                                  const Eigen::MatrixXd& C, const BoxDomain& domain) {
  const int d = domain.dim();
  if (A.rows() != d || A.cols() != d || b.size() != d || C.cols() != d || C.rows() < 1) {
    throw std::invalid_argument("linear_preset: dimension mismatch");
  }
  return ControlAffineSystem(PolyField::linear(A), PolyField::constant(d, b),
                             PolyField::linear(C), domain);
}

TangentReport check_tangent_condition(const ControlAffineSystem& sys, int samples_per_face) {
  if (samples_per_face < 2) {
    throw std::invalid_argument("check_tangent_condition: samples_per_face must be >= 2");
  }
  const auto& dom = sys.domain();
  const int d = sys.dim();
  TangentReport report;
  report.max_inner_product = -std::numeric_limits<double>::infinity();
  report.b_vanishes_on_boundary = true;

  auto visit = [&](const Eigen::VectorXd& x, const Eigen::VectorXd& normal) {
    const double s = normal.dot(sys.f().value(x));
    report.max_inner_product = std::max(report.max_inner_product, s);
    if (s >= 0.0) report.violating_points.push_back(x);
    if (sys.b().value(x).cwiseAbs().maxCoeff() != 0.0) report.b_vanishes_on_boundary = false;
    ++report.n_samples;
  };

  for (int k = 0; k < d; ++k) {
    for (int side = 0; side < 2; ++side) {
      Eigen::VectorXd normal = Eigen::VectorXd::Zero(d);
      normal[k] = side == 0 ? -1.0 : 1.0;
      const double face = side == 0 ? dom.lower()[k] : dom.upper()[k];
      if (d == 1) {
        visit(Eigen::VectorXd::Constant(1, face), normal);
        continue;
      }
      const int other = 1 - k;
      for (int i = 0; i < samples_per_face; ++i) {
        const double t = static_cast<double>(i) / (samples_per_face - 1);
        Eigen::VectorXd x(2);
        x[k] = face;
        x[other] = dom.lower()[other] * (1.0 - t) + dom.upper()[other] * t;
        visit(x, normal);
      }
    }
  }
  return report;
}

Linearization linearize(const ControlAffineSystem& sys) {
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(sys.dim());
  Linearization lin;
  lin.A0 = eval_field(sys.f(), zero).jacobian;
  lin.b0 = sys.b().value(zero);
  lin.C0 = eval_field(sys.c(), zero).jacobian;
  lin.Q = lin.C0.transpose() * lin.C0;
  return lin;
}

}  // namespace koopman_hjb
