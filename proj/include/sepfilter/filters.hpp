#pragma once

#include <optional>

#include "sepfilter/filters_state.hpp"
#include "sepfilter/model.hpp"
#include "sepfilter/rng.hpp"

namespace sepfilter {

/// Precomputed observation geometry at one (t, y): the stacked diffusion, its
/// Gram matrix and the inverses the filter formulas need. Constant-diffusion
/// models compute this once.
struct ObservationGeometry {
  MatrixXd SigY;          // mY x d
  MatrixXd gram;          // SigY SigY'
  MatrixXd gram_inv;
  MatrixXd gram_inv_sqrt;
  MatrixXd gram_sqrt;
  MatrixXd SigYT_gram_inv;  // SigY' gram^-1, d x mY

  static ObservationGeometry from(const MatrixXd& sig_y);
};

/// Linearization of a drift map around the filter mean:
/// f(t,x,y) ~ fbar + F x with F = df/dx at (t,m,y), fbar = f(t,m,y) - F m.
struct Linearization {
  VectorXd bbar;  // n
  MatrixXd B;     // n x n
  VectorXd abar;  // mY
  MatrixXd AY;    // mY x n
};

Linearization ekf_linearize(const ModelSpec& spec, double t,
                            const GaussianFilterState& state,
                            const VectorXd& y);

/// Jacobian of the stacked observation drift with respect to x.
MatrixXd observation_jacobian(const ModelSpec& spec, double t,
                              const VectorXd& x, const VectorXd& y);

/// One Euler step of the extended Kalman filter driven by the realized
/// observation increment dy. The covariance is re-symmetrized and
/// eigenvalue-floored at zero after the step.
GaussianFilterState ekf_step(const ModelSpec& spec, double t,
                             const GaussianFilterState& state,
                             const VectorXd& y, const VectorXd& dy, double dt,
                             const ObservationGeometry& geom);

/// Kalman-Bucy step: the same update formulas specialized to affine
/// coefficients, reading the family parameters directly instead of
/// re-linearizing. Exact on linear models.
GaussianFilterState kalman_bucy_step(const ModelSpec& spec, double t,
                                     const GaussianFilterState& state,
                                     const VectorXd& y, const VectorXd& dy,
                                     double dt,
                                     const ObservationGeometry& geom);

/// One Euler step of the Wonham filter for a finite-state chain observed in
/// additive Gaussian noise: dp = pQ dt - f_hat p F dt / s^2 + p F dy / s^2,
/// clipped at zero and renormalized.
SimplexFilterState wonham_step(const MatrixXd& Q, const VectorXd& f_values,
                               double sigma, const SimplexFilterState& state,
                               double dy, double dt);

/// Bootstrap particle step: Euler propagation through the hidden dynamics,
/// Gaussian observation-increment weighting, systematic resampling when the
/// effective sample size drops below N/2.
ParticleCloud particle_step(const ModelSpec& spec, const ParticleCloud& cloud,
                            const VectorXd& y, const VectorXd& dy, double dt,
                            double t, PathRng& rng,
                            const ObservationGeometry& geom);

ParticleCloud particle_init(const ModelSpec& spec, int n_particles,
                            PathRng& rng);

/// Innovations increments on the observation filtration:
///   dU      = gram^{-1/2} (dy - hat_aY dt)          (mY-dimensional)
///   dW_tilde = SigY' gram^{-1} (dy - hat_aY dt)     (minimum-norm d-vector)
/// Only SigY dW_tilde is contractually used downstream; the minimum-norm
/// representative is fixed as canonical.
struct InnovationsIncrement {
  VectorXd dU;
  VectorXd dW_tilde;
};
InnovationsIncrement innovations_increment(const ObservationGeometry& geom,
                                           const VectorXd& dy,
                                           const VectorXd& hat_aY, double dt);

enum class FilterKind { KalmanBucy, Ekf, Wonham, Particle };

/// Filter dynamics in the canonical form d zeta = G dt + H dY.
struct FilterDriftDiffusion {
  VectorXd G;      // q
  MatrixXd H;      // q x mY
  VectorXd G_hat;  // G + H hat_aY
};

/// Reads the (G, H) pair off the configured filter at one state. For
/// Gaussian filters zeta = (m, vech Pi); for Wonham zeta = p.
FilterDriftDiffusion filter_as_zeta(const ModelSpec& spec, FilterKind kind,
                                    double t, const FilterState& state,
                                    const VectorXd& y,
                                    const ObservationGeometry& geom);

/// Scalar-observation reduction of a chain model: identifies the single
/// x-dependent observation component, checks its noise row is orthogonal to
/// every other row, and returns the Wonham inputs.
struct WonhamReduction {
  int obs_index = 0;       // driving component of Y
  double sigma = 0.0;      // its noise magnitude
  VectorXd f_values;       // observation drift at each chain state
};
WonhamReduction wonham_reduction(const ModelSpec& spec, double t,
                                 const VectorXd& y);

}  // namespace sepfilter
