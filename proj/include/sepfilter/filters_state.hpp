#pragma once

#include "sepfilter/linalg_util.hpp"

namespace sepfilter {

/// Gaussian filter state: conditional mean and covariance of the hidden
/// factor given the observation filtration.
struct GaussianFilterState {
  VectorXd m;   // n
  MatrixXd Pi;  // n x n, symmetric PSD
};

/// Finite-state filter: conditional state probabilities on the simplex.
struct SimplexFilterState {
  VectorXd p;
};

/// Particle approximation of the conditional law (oracle use).
struct ParticleCloud {
  MatrixXd particles;     // N x n
  VectorXd log_weights;   // N
  double ess = 0.0;

  VectorXd mean() const {
    VectorXd w = normalized_weights();
    return particles.transpose() * w;
  }
  VectorXd normalized_weights() const {
    double shift = log_weights.maxCoeff();
    VectorXd w = (log_weights.array() - shift).exp();
    return w / w.sum();
  }
};

/// Non-owning view of whichever filter is running along a path.
struct FilterState {
  const GaussianFilterState* gauss = nullptr;
  const SimplexFilterState* simplex = nullptr;

  static FilterState of(const GaussianFilterState& g) {
    FilterState s;
    s.gauss = &g;
    return s;
  }
  static FilterState of(const SimplexFilterState& w) {
    FilterState s;
    s.simplex = &w;
    return s;
  }
};

}  // namespace sepfilter
