#pragma once

#include <functional>
#include <string>
#include <vector>

#include "sepfilter/measure_criteria.hpp"

namespace sepfilter {

/// Uniform cell-centered grid over the filter-parameter space (q <= 2 axes).
struct DensityAxis {
  double lo = 0.0;
  double hi = 1.0;
  int cells = 100;

  double delta() const { return (hi - lo) / cells; }
  double center(int i) const { return lo + (i + 0.5) * delta(); }
  double face(int f) const { return lo + f * delta(); }
};

struct DensityGrid {
  std::vector<DensityAxis> axes;  // 1 or 2
  VectorXd values;                // cell-centered, row-major
  double t = 0.0;

  int cell_count() const {
    int n = 1;
    for (const auto& a : axes) n *= a.cells;
    return n;
  }
  double cell_volume() const {
    double v = 1.0;
    for (const auto& a : axes) v *= a.delta();
    return v;
  }
  double mass() const { return values.sum() * cell_volume(); }
};

/// Autonomous dynamics of the filter parameter under the control measure:
/// drift already carries the -theta H SigY (S1'h - Xi') shift, diffusion is
/// the Gram matrix H SigY SigY' H'. No dependence on the observation level.
struct AutonomousZetaDynamics {
  int q = 1;
  std::function<VectorXd(double, const VectorXd&)> drift;
  std::function<MatrixXd(double, const VectorXd&)> diffusion_gram;
  std::function<double(double, const VectorXd&)> g_hat;
};

/// Assembles the shifted generator coefficients for the supported autonomous
/// cases (scalar-mean Kalman filter with the covariance precomputed offline,
/// or a two-state Wonham filter reduced to its first coordinate). Throws an
/// unsupported-model error naming the offending coefficient when anything
/// depends on the observation level.
AutonomousZetaDynamics build_generator(const ModelSpec& spec,
                                       const Strategy& strategy,
                                       const RiskSensitiveParams& params,
                                       FilterKind filter_kind);

enum class TimeIntegrator { Explicit, CrankNicolson };

/// One time step of dq/dt = L* q + theta g_hat q by operator splitting:
/// a conservative Fokker-Planck flux step (central diffusion, upwind
/// advection, zero-flux boundaries) followed by exact pointwise
/// multiplication with exp(theta g_hat dt).
void step_density(DensityGrid& grid, const AutonomousZetaDynamics& dyn,
                  double dt, double theta, bool source_on = true,
                  TimeIntegrator integrator = TimeIntegrator::Explicit,
                  RunMode mode = RunMode::Parallel);

struct MzeConfig {
  int cells = 400;
  double dt = 1.0 / 1024.0;
  TimeIntegrator integrator = TimeIntegrator::Explicit;
  double domain_sd_multiple = 8.0;
  int pilot_paths = 512;
  RunMode mode = RunMode::Parallel;
};

struct MzeSummary {
  double qT1 = 0.0;
  double I_bar = 0.0;
  double J_bar = 0.0;
  double mass_control_error = 0.0;
  int cells = 0;
  double dt = 0.0;
  double domain_lo = 0.0, domain_hi = 0.0;
  std::string to_json() const;
};

struct MzeSolution {
  DensityGrid grid_at_T;
  MzeSummary summary;
};

/// Time-march from a mollified point mass at zeta_0 to T. Runs a
/// source-off control march first; mass leakage above 1% raises a
/// boundary-domain error.
MzeSolution solve_q(const ModelSpec& spec, const Strategy& strategy,
                    const RiskSensitiveParams& params, FilterKind filter_kind,
                    const MzeConfig& config);

void write_density_csv(const DensityGrid& grid, const std::string& path);

}  // namespace sepfilter
