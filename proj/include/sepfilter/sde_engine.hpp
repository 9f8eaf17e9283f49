#pragma once

#include <string>
#include <vector>

#include "sepfilter/filters.hpp"
#include "sepfilter/model.hpp"
#include "sepfilter/rng.hpp"
#include "sepfilter/strategy.hpp"

namespace sepfilter {

struct TimeGrid {
  double t0 = 0.0;
  double T = 1.0;
  double dt = 1.0 / 512.0;

  std::size_t steps() const {
    return static_cast<std::size_t>(std::llround((T - t0) / dt));
  }
  double time_at(std::size_t k) const { return t0 + static_cast<double>(k) * dt; }
};

enum class Measure { P, Ph, Pbar };

std::string to_string(Measure m);

/// One simulated trajectory: time grid plus aligned paths of the hidden
/// state, the observation, the excess return and the driving increments.
struct PathBundle {
  TimeGrid grid;
  MatrixXd X_path;  // (steps+1) x n
  MatrixXd Y_path;  // (steps+1) x mY
  VectorXd R_path;  // steps+1
  MatrixXd dW;      // steps x d
  std::uint64_t seed = 0;
  std::uint64_t path_index = 0;
  Measure measure_tag = Measure::P;
  bool diverged = false;
};

/// Girsanov shift integrand theta * (Sigma^(1)' h - Xi'), the drift moved
/// from W to W^h under the control measure.
VectorXd drift_shift_h(const ModelSpec& spec, double theta, const VectorXd& h,
                       double t, const VectorXd& y);

/// Euler-Maruyama paths of (X, Y) on one shared d-dimensional Wiener stream
/// per path. Under Measure::Ph the drifts carry the -theta shift; the
/// strategy must then be constant (feedback would need the filter running).
std::vector<PathBundle> simulate_joint(const ModelSpec& spec,
                                       const TimeGrid& grid,
                                       std::uint64_t seed, std::size_t n_paths,
                                       Measure measure = Measure::P,
                                       double theta = 0.0,
                                       const Strategy* strategy = nullptr);

/// Filter states along one observation path (index 0 holds the prior).
struct FilterTrajectory {
  FilterKind kind = FilterKind::KalmanBucy;
  std::vector<GaussianFilterState> gauss;
  std::vector<SimplexFilterState> simplex;

  std::size_t size() const {
    return kind == FilterKind::Wonham ? simplex.size() : gauss.size();
  }
  FilterState at(std::size_t k) const {
    return kind == FilterKind::Wonham ? FilterState::of(simplex[k])
                                      : FilterState::of(gauss[k]);
  }
};

FilterTrajectory run_filter(const ModelSpec& spec, FilterKind kind,
                            const PathBundle& bundle);

/// Excess-return accumulation in the full filtration (drift uses the hidden
/// state, diffusion the recorded dW).
VectorXd simulate_R_original(const ModelSpec& spec, const Strategy& strategy,
                             double theta, double r0, PathBundle& bundle,
                             const FilterTrajectory* filter = nullptr);

/// Excess-return accumulation on the observation filtration: hat drifts and
/// innovations increments replace the hidden-state quantities.
VectorXd simulate_R_separated(const ModelSpec& spec, const Strategy& strategy,
                              double theta, double r0,
                              const FilterTrajectory& filter,
                              PathBundle& bundle);

/// Draw from the initial hidden-state law.
VectorXd draw_x0(const ModelSpec& spec, PathRng& rng, int* chain_index);

/// One chain transition over dt (Euler thinning of the generator).
int chain_transition(const MatrixXd& Q, int state, double dt, PathRng& rng);

void write_paths_csv(const std::vector<PathBundle>& bundles,
                     const ModelSpec& spec, const std::string& path);

}  // namespace sepfilter
