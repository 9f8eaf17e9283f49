#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sepfilter/coefficients.hpp"
#include "sepfilter/linalg_util.hpp"

namespace sepfilter {

struct Dimensions {
  int ell = 0;  // observable factors
  int n = 1;    // hidden factors
  int m = 1;    // assets
  int m1 = 1;   // tradable assets
  int k = 0;    // expert signals

  int m2() const { return m - m1; }
  int d() const { return ell + n + m + k + 1; }    // driving-noise dimension
  int mY() const { return ell + m + k + 1; }       // observation dimension
};

/// Initial law of the hidden state: Gaussian for diffusion factors, or a
/// categorical law over chain states for regime models.
struct X0Law {
  bool gaussian = true;
  VectorXd mean;    // n
  MatrixXd cov;     // n x n
  MatrixXd states;  // num_states x n (chain values)
  VectorXd probs;   // num_states
};

struct ModelSpec {
  Dimensions dims;
  double horizon = 1.0;

  Coefficient b;        // hidden drift, n
  Coefficient lambda;   // hidden diffusion, n x d
  Coefficient bf;       // observable-factor drift, ell
  Coefficient lambdaf;  // observable-factor diffusion, ell x d
  Coefficient a;        // asset drift, m
  Coefficient sigma;    // asset diffusion, m x d
  Coefficient c;        // benchmark drift, 1
  Coefficient xi;       // benchmark diffusion, 1 x d
  Coefficient aE;       // expert drift, k
  Coefficient sigmaE;   // expert diffusion, k x d

  X0Law x0;
  VectorXd y0;  // mY

  // Markov-chain generator for finite-state hidden factors (categorical x0);
  // empty for diffusion models.
  MatrixXd chain_generator;

  // Bounding box probed by the validator. Defaults derived from x0/y0 when
  // left empty.
  VectorXd probe_x_lo, probe_x_hi;
  VectorXd probe_y_lo, probe_y_hi;

  bool is_chain() const { return !x0.gaussian; }
  /// True when every diffusion map is a constant matrix; enables cached
  /// observation geometry in the hot loops.
  bool constant_diffusions() const {
    return lambda.is_constant() && lambdaf.is_constant() &&
           sigma.is_constant() && xi.is_constant() && sigmaE.is_constant();
  }
};

struct Violation {
  std::string invariant;
  std::string detail;
};

struct ValidationReport {
  bool ok = true;
  std::vector<Violation> violations;
};

/// Probes the spec on a deterministic lattice (>= 27 points spanning the
/// declared bounds) and reports every invariant violation found. Violations
/// are data, not failures.
ValidationReport validate(const ModelSpec& spec);

/// Diagonal of Sigma Sigma' at (t, y): per-asset instantaneous variance.
VectorXd d_sigma(const ModelSpec& spec, double t, const VectorXd& y);

struct ObservationCoefficients {
  VectorXd aY;    // mY
  MatrixXd SigY;  // mY x d
};

/// Stacks the observation drift (b^f, a - d_sigma/2, c - XiXi'/2, a^E) and
/// diffusion (Lambda^f; Sigma; Xi; Sigma^E).
ObservationCoefficients assemble_observation(const ModelSpec& spec, double t,
                                             const VectorXd& x,
                                             const VectorXd& y);

/// Same stacking for the diffusion only (x-independent).
MatrixXd assemble_sigma_y(const ModelSpec& spec, double t, const VectorXd& y);

/// Tradable sub-blocks (Notation: first m1 asset rows).
MatrixXd sigma_tradable(const ModelSpec& spec, double t, const VectorXd& y);
VectorXd xi_row(const ModelSpec& spec, double t, const VectorXd& y);

}  // namespace sepfilter
