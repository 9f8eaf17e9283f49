#include "sepfilter/conditional_moments.hpp"

#include <cmath>
#include <random>

#include "json.hpp"

namespace sepfilter {

VectorXd hat_linear(const VectorXd& a0, const MatrixXd& A, const VectorXd& m) {
  if (A.size() == 0) return a0;
  return a0 + A * m;
}

double hat_quadratic(double a, double b, double c, double m, double P) {
  return a * (m * m + P) + b * m + c;
}

double hat_quadratic_expansion(double a_at_m, const MatrixXd& hess_at_m,
                               const MatrixXd& P) {
  return a_at_m + 0.5 * (hess_at_m * P).trace();
}

double hat_exponential(double eta, double m, double P) {
  double arg = eta * m + 0.5 * eta * eta * P;
  if (arg > 700.0)
    throw NumericalError("hat_exponential overflow: exponent " +
                         std::to_string(arg));
  return std::exp(arg);
}

double hat_simplex(const VectorXd& f_values, const VectorXd& p) {
  return f_values.dot(p);
}

GaussHermiteRule gauss_hermite(int order) {
  if (order < 1) throw NumericalError("gauss_hermite: order must be >= 1");
  // Golub-Welsch on the Jacobi matrix of the (probabilists') Hermite
  // recurrence: diagonal 0, off-diagonal sqrt(i).
  MatrixXd jac = MatrixXd::Zero(order, order);
  for (int i = 1; i < order; ++i) {
    double b = std::sqrt(static_cast<double>(i));
    jac(i, i - 1) = b;
    jac(i - 1, i) = b;
  }
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(jac);
  GaussHermiteRule rule;
  rule.nodes = es.eigenvalues();
  rule.weights.resize(order);
  for (int i = 0; i < order; ++i) {
    double v0 = es.eigenvectors()(0, i);
    rule.weights[i] = v0 * v0;  // total weight of N(0,1) is 1
  }
  return rule;
}

QuadratureResult hat_quadrature(const std::function<double(const VectorXd&)>& f,
                                const VectorXd& m, const MatrixXd& P,
                                int order) {
  const int n = static_cast<int>(m.size());
  QuadratureResult out;

  // PSD factor P = L L' (eigendecomposition handles the degenerate P = 0).
  MatrixXd L;
  {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (P + P.transpose()));
    if (es.eigenvalues().minCoeff() < -1e-10 * std::max(1.0, P.norm()))
      throw NumericalError("hat_quadrature: covariance not PSD");
    L = es.eigenvectors() *
        es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  }

  if (n <= 3) {
    GaussHermiteRule rule = gauss_hermite(order);
    double acc = 0.0;
    VectorXd z(n), x(n);
    std::vector<int> idx(n, 0);
    while (true) {
      double w = 1.0;
      for (int i = 0; i < n; ++i) {
        z[i] = rule.nodes[idx[i]];
        w *= rule.weights[idx[i]];
      }
      x = m + L * z;
      acc += w * f(x);
      int axis = 0;
      while (axis < n && ++idx[axis] == order) idx[axis++] = 0;
      if (axis == n) break;
    }
    out.value = acc;
    return out;
  }

  // High-dimensional fallback: plain Monte Carlo over N(m, P) with a fixed
  // internal stream, stderr reported.
  const int draws = 1 << 14;
  std::mt19937_64 eng(0x9e3779b97f4a7c15ULL ^ static_cast<std::uint64_t>(n));
  std::normal_distribution<double> normal(0.0, 1.0);
  double acc = 0.0, acc2 = 0.0;
  VectorXd z(n);
  for (int i = 0; i < draws; ++i) {
    for (int j = 0; j < n; ++j) z[j] = normal(eng);
    double v = f(m + L * z);
    acc += v;
    acc2 += v * v;
  }
  out.value = acc / draws;
  double var = (acc2 / draws - out.value * out.value) / (draws - 1);
  out.stderr_ = std::sqrt(std::max(0.0, var));
  out.monte_carlo = true;
  return out;
}

VectorXd hat_coefficient(const Coefficient& coef, const ModelSpec& spec,
                         double t, const FilterState& state,
                         const VectorXd& y) {
  if (coef.rows() == 0) return VectorXd();

  if (state.simplex) {
    const VectorXd& p = state.simplex->p;
    VectorXd out = VectorXd::Zero(coef.rows());
    for (int i = 0; i < p.size(); ++i) {
      VectorXd xi = spec.x0.states.row(i).transpose();
      out += p[i] * VectorXd(coef.eval(t, xi, y));
    }
    return out;
  }

  const GaussianFilterState& g = *state.gauss;
  const int n = static_cast<int>(g.m.size());
  switch (coef.family()) {
    case CoeffFamily::Constant:
      return coef.c0().col(0);
    case CoeffFamily::Affine: {
      VectorXd out = coef.c0().col(0);
      if (coef.cx().size() > 0) out += coef.cx() * g.m;
      if (coef.cy().size() > 0) out += coef.cy() * y;
      return out;
    }
    case CoeffFamily::Quadratic:
      if (n == 1) {
        VectorXd out(coef.rows());
        for (int i = 0; i < coef.rows(); ++i)
          out[i] = hat_quadratic(coef.qa()[i], coef.qb()[i], coef.qc()[i],
                                 g.m[0], g.Pi(0, 0));
        return out;
      }
      break;
    case CoeffFamily::ExpAffine:
      if (n == 1) {
        VectorXd out(coef.rows());
        for (int i = 0; i < coef.rows(); ++i)
          out[i] = coef.scale()[i] *
                   hat_exponential(coef.eta()[i], g.m[0], g.Pi(0, 0));
        return out;
      }
      break;
    case CoeffFamily::Tabulated:
      break;
  }

  // Generic fallback: quadrature against the Gaussian filter law.
  VectorXd out(coef.rows());
  for (int i = 0; i < coef.rows(); ++i) {
    auto fi = [&](const VectorXd& x) { return coef.eval(t, x, y)(i, 0); };
    out[i] = hat_quadrature(fi, g.m, g.Pi).value;
  }
  return out;
}

VectorXd hat_observation_drift(const ModelSpec& spec, double t,
                               const FilterState& state, const VectorXd& y) {
  const Dimensions& dm = spec.dims;
  VectorXd out(dm.mY());
  int r = 0;
  if (dm.ell > 0) {
    out.segment(r, dm.ell) = hat_coefficient(spec.bf, spec, t, state, y);
    r += dm.ell;
  }
  out.segment(r, dm.m) =
      hat_coefficient(spec.a, spec, t, state, y) - 0.5 * d_sigma(spec, t, y);
  r += dm.m;
  VectorXd xirow = xi_row(spec, t, y);
  out[r] = hat_coefficient(spec.c, spec, t, state, y)(0) -
           0.5 * xirow.squaredNorm();
  r += 1;
  if (dm.k > 0) out.segment(r, dm.k) = hat_coefficient(spec.aE, spec, t, state, y);
  return out;
}

VectorXd hat_a_tradable(const ModelSpec& spec, double t,
                        const FilterState& state, const VectorXd& y) {
  VectorXd full = hat_coefficient(spec.a, spec, t, state, y);
  return full.head(spec.dims.m1);
}

double hat_c(const ModelSpec& spec, double t, const FilterState& state,
             const VectorXd& y) {
  return hat_coefficient(spec.c, spec, t, state, y)(0);
}

std::string to_string(SeparationCase c) {
  switch (c) {
    case SeparationCase::LinearStrict: return "linear/strict";
    case SeparationCase::QuadraticWider: return "quadratic/wider";
    case SeparationCase::QuadraticExpansionWider:
      return "quadratic-expansion/wider";
    case SeparationCase::ExponentialWider: return "exponential/wider";
    case SeparationCase::GeneralNone: return "general/none";
  }
  return "?";
}

namespace {

SeparationCase classify_coefficient(const Coefficient& coef, int n) {
  switch (coef.structure_tag()) {
    case StructureTag::Constant:
    case StructureTag::Linear:
      return SeparationCase::LinearStrict;
    case StructureTag::Quadratic:
      return n == 1 ? SeparationCase::QuadraticWider
                    : SeparationCase::QuadraticExpansionWider;
    case StructureTag::Exponential:
      return n == 1 ? SeparationCase::ExponentialWider
                    : SeparationCase::QuadraticExpansionWider;
    case StructureTag::General:
      return SeparationCase::GeneralNone;
  }
  return SeparationCase::GeneralNone;
}

}  // namespace

SeparabilityReport classify(const ModelSpec& spec) {
  SeparabilityReport rep;
  const int n = spec.dims.n;

  if (spec.is_chain()) {
    // A finite-state filter closes every conditional moment as a weighted
    // sum over the chain states: the separated state is p itself.
    rep.per_coefficient["a"] = SeparationCase::LinearStrict;
    rep.per_coefficient["c"] = SeparationCase::LinearStrict;
    if (spec.dims.ell > 0)
      rep.per_coefficient["bf"] = SeparationCase::LinearStrict;
    if (spec.dims.k > 0)
      rep.per_coefficient["aE"] = SeparationCase::LinearStrict;
    rep.verdict = "strict";
    rep.required_statistics = {"p"};
    return rep;
  }

  rep.per_coefficient["a"] = classify_coefficient(spec.a, n);
  rep.per_coefficient["c"] = classify_coefficient(spec.c, n);
  if (spec.dims.ell > 0)
    rep.per_coefficient["bf"] = classify_coefficient(spec.bf, n);
  if (spec.dims.k > 0)
    rep.per_coefficient["aE"] = classify_coefficient(spec.aE, n);

  bool all_strict = true, any_none = false;
  for (const auto& [name, c] : rep.per_coefficient) {
    all_strict = all_strict && c == SeparationCase::LinearStrict;
    any_none = any_none || c == SeparationCase::GeneralNone;
  }
  if (any_none) {
    rep.verdict = "none";
  } else if (all_strict) {
    rep.verdict = "strict";
    rep.required_statistics = {"m"};
  } else {
    rep.verdict = "wider";
    rep.required_statistics = {"m", "Pi"};
  }
  return rep;
}

std::string SeparabilityReport::to_json() const {
  nlohmann::json j;
  for (const auto& [name, c] : per_coefficient)
    j["per_coefficient"][name] = to_string(c);
  j["verdict"] = verdict;
  j["required_statistics"] = required_statistics;
  return j.dump(2);
}

}  // namespace sepfilter
