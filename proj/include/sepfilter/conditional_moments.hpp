#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "sepfilter/filters_state.hpp"
#include "sepfilter/model.hpp"

namespace sepfilter {

// --- closed-form conditional moments under a Gaussian or simplex filter law

/// Linear case: E[a0 + A x] = a0 + A m.
VectorXd hat_linear(const VectorXd& a0, const MatrixXd& A, const VectorXd& m);

/// Quadratic case, scalar x: E[a x^2 + b x + c] = a (m^2 + P) + b m + c.
double hat_quadratic(double a, double b, double c, double m, double P);

/// Quadratic expansion around the mean: a(m) + tr(a_xx(m) P) / 2.
double hat_quadratic_expansion(double a_at_m, const MatrixXd& hess_at_m,
                               const MatrixXd& P);

/// Exponential case, scalar x: E[exp(eta x)] = exp(eta m + eta^2 P / 2).
double hat_exponential(double eta, double m, double P);

/// Finite-state case: sum_i f(i) p_i.
double hat_simplex(const VectorXd& f_values, const VectorXd& p);

/// Gauss-Hermite nodes/weights for the standard normal weight (probabilists'
/// convention: integrates f against N(0,1) as sum w_i f(x_i)).
struct GaussHermiteRule {
  VectorXd nodes;
  VectorXd weights;
};
GaussHermiteRule gauss_hermite(int order);

/// Tensorized Gauss-Hermite approximation of E[f(X)], X ~ N(m, P).
/// Dimensions above 3 fall back to quasi Monte Carlo with reported stderr.
struct QuadratureResult {
  double value = 0.0;
  double stderr_ = 0.0;  // zero for deterministic quadrature
  bool monte_carlo = false;
};
QuadratureResult hat_quadrature(const std::function<double(const VectorXd&)>& f,
                                const VectorXd& m, const MatrixXd& P,
                                int order = 20);

// --- hatted model coefficients

/// E[a^Y(t, X, y) | filter state]: the exact conditional expectation of the
/// stacked observation drift under the filter law, dispatched per family.
VectorXd hat_observation_drift(const ModelSpec& spec, double t,
                               const FilterState& state, const VectorXd& y);

/// Conditional expectations of the tradable asset drift block and the
/// benchmark drift.
VectorXd hat_a_tradable(const ModelSpec& spec, double t,
                        const FilterState& state, const VectorXd& y);
double hat_c(const ModelSpec& spec, double t, const FilterState& state,
             const VectorXd& y);

/// E[coef(t, X, y)] for one vector coefficient under the filter law.
VectorXd hat_coefficient(const Coefficient& coef, const ModelSpec& spec,
                         double t, const FilterState& state, const VectorXd& y);

// --- separability classification (criteria for when the separated problem
// --- closes over finitely many filter statistics)

enum class SeparationCase {
  LinearStrict,
  QuadraticWider,
  QuadraticExpansionWider,
  ExponentialWider,
  GeneralNone,
};

std::string to_string(SeparationCase c);

struct SeparabilityReport {
  std::map<std::string, SeparationCase> per_coefficient;
  std::string verdict;  // "strict" | "wider" | "none"
  std::vector<std::string> required_statistics;
  std::string to_json() const;
};

SeparabilityReport classify(const ModelSpec& spec);

}  // namespace sepfilter
