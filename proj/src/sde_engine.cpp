#include "sepfilter/sde_engine.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "sepfilter/conditional_moments.hpp"
#include "sepfilter/parallel.hpp"

namespace sepfilter {

std::string to_string(Measure m) {
  switch (m) {
    case Measure::P: return "P";
    case Measure::Ph: return "Ph";
    case Measure::Pbar: return "Pbar";
  }
  return "?";
}

VectorXd drift_shift_h(const ModelSpec& spec, double theta, const VectorXd& h,
                       double t, const VectorXd& y) {
  MatrixXd sig1 = sigma_tradable(spec, t, y);
  VectorXd xi = xi_row(spec, t, y);
  return theta * (sig1.transpose() * h - xi);
}

VectorXd draw_x0(const ModelSpec& spec, PathRng& rng, int* chain_index) {
  if (spec.x0.gaussian) {
    const int n = spec.dims.n;
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(spec.x0.cov);
    MatrixXd L = es.eigenvectors() *
                 es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
    VectorXd z(n);
    for (int i = 0; i < n; ++i) z[i] = rng.normal();
    if (chain_index) *chain_index = -1;
    return spec.x0.mean + L * z;
  }
  double u = rng.uniform();
  double cum = 0.0;
  int idx = 0;
  for (int i = 0; i < spec.x0.probs.size(); ++i) {
    cum += spec.x0.probs[i];
    if (u <= cum) {
      idx = i;
      break;
    }
    idx = i;
  }
  if (chain_index) *chain_index = idx;
  return spec.x0.states.row(idx).transpose();
}

int chain_transition(const MatrixXd& Q, int state, double dt, PathRng& rng) {
  double u = rng.uniform();
  double cum = 0.0;
  for (int j = 0; j < Q.cols(); ++j) {
    if (j == state) continue;
    cum += Q(state, j) * dt;
    if (u < cum) return j;
  }
  return state;
}

std::vector<PathBundle> simulate_joint(const ModelSpec& spec,
                                       const TimeGrid& grid,
                                       std::uint64_t seed, std::size_t n_paths,
                                       Measure measure, double theta,
                                       const Strategy* strategy) {
  if (grid.dt <= 0.0) throw NumericalError("simulate_joint: dt must be > 0");
  if (measure == Measure::Pbar)
    throw NumericalError("simulate_joint: use the criterion kernels for Pbar");
  const Dimensions& dm = spec.dims;
  const std::size_t steps = grid.steps();
  const double sqdt = std::sqrt(grid.dt);

  std::vector<PathBundle> out(n_paths);
  const bool const_diff = spec.constant_diffusions();
  MatrixXd sig_y0;
  if (const_diff) sig_y0 = assemble_sigma_y(spec, 0.0, spec.y0);

  parallel_for_paths(n_paths, [&](std::size_t p) {
    PathRng rng(seed, p);
    PathBundle& b = out[p];
    b.grid = grid;
    b.seed = seed;
    b.path_index = p;
    b.measure_tag = measure;
    b.X_path.resize(steps + 1, dm.n);
    b.Y_path.resize(steps + 1, dm.mY());
    b.R_path = VectorXd::Zero(steps + 1);
    b.dW.resize(steps, dm.d());

    int chain_idx = -1;
    VectorXd x = draw_x0(spec, rng, &chain_idx);
    VectorXd y = spec.y0;
    b.X_path.row(0) = x.transpose();
    b.Y_path.row(0) = y.transpose();

    VectorXd dw(dm.d());
    for (std::size_t k = 0; k < steps; ++k) {
      const double t = grid.time_at(k);
      for (int i = 0; i < dm.d(); ++i) dw[i] = rng.normal() * sqdt;
      b.dW.row(k) = dw.transpose();

      ObservationCoefficients obs = assemble_observation(spec, t, x, y);
      const MatrixXd& sig_y = const_diff ? sig_y0 : obs.SigY;

      VectorXd y_drift = obs.aY;
      VectorXd x_drift = spec.is_chain() ? VectorXd::Zero(dm.n)
                                         : VectorXd(spec.b.eval(t, x, y));
      MatrixXd lam;
      if (!spec.is_chain()) lam = spec.lambda.eval(t, x, y);
      if (measure == Measure::Ph) {
        if (!strategy)
          throw NumericalError("simulate_joint: Ph needs a strategy");
        VectorXd h = strategy->eval_constant();
        VectorXd shift = drift_shift_h(spec, theta, h, t, y);
        y_drift -= sig_y * shift;
        if (!spec.is_chain()) x_drift -= lam * shift;
      }

      y += y_drift * grid.dt + sig_y * dw;
      if (spec.is_chain()) {
        chain_idx = chain_transition(spec.chain_generator, chain_idx, grid.dt,
                                     rng);
        x = spec.x0.states.row(chain_idx).transpose();
      } else {
        x += x_drift * grid.dt + lam * dw;
      }

      if (!x.allFinite() || !y.allFinite()) {
        b.diverged = true;
        for (std::size_t r = k + 1; r <= steps; ++r) {
          b.X_path.row(r) = b.X_path.row(k);
          b.Y_path.row(r) = b.Y_path.row(k);
        }
        break;
      }
      b.X_path.row(k + 1) = x.transpose();
      b.Y_path.row(k + 1) = y.transpose();
    }
  });
  return out;
}

FilterTrajectory run_filter(const ModelSpec& spec, FilterKind kind,
                            const PathBundle& bundle) {
  const std::size_t steps = bundle.grid.steps();
  FilterTrajectory traj;
  traj.kind = kind;

  const bool const_diff = spec.constant_diffusions();
  ObservationGeometry geom;
  if (const_diff)
    geom = ObservationGeometry::from(assemble_sigma_y(spec, 0.0, spec.y0));

  if (kind == FilterKind::Wonham) {
    if (!spec.is_chain())
      throw NumericalError("run_filter: Wonham needs a chain model");
    SimplexFilterState st{spec.x0.probs};
    traj.simplex.reserve(steps + 1);
    traj.simplex.push_back(st);
    for (std::size_t k = 0; k < steps; ++k) {
      const double t = bundle.grid.time_at(k);
      VectorXd y = bundle.Y_path.row(k).transpose();
      VectorXd dy = (bundle.Y_path.row(k + 1) - bundle.Y_path.row(k)).transpose();
      WonhamReduction red = wonham_reduction(spec, t, y);
      st = wonham_step(spec.chain_generator, red.f_values, red.sigma, st,
                       dy[red.obs_index], bundle.grid.dt);
      traj.simplex.push_back(st);
    }
    return traj;
  }

  GaussianFilterState st{spec.x0.mean, spec.x0.cov};
  traj.gauss.reserve(steps + 1);
  traj.gauss.push_back(st);
  for (std::size_t k = 0; k < steps; ++k) {
    const double t = bundle.grid.time_at(k);
    VectorXd y = bundle.Y_path.row(k).transpose();
    VectorXd dy = (bundle.Y_path.row(k + 1) - bundle.Y_path.row(k)).transpose();
    const ObservationGeometry& g =
        const_diff ? geom
                   : ObservationGeometry::from(assemble_sigma_y(spec, t, y));
    st = (kind == FilterKind::KalmanBucy)
             ? kalman_bucy_step(spec, t, st, y, dy, bundle.grid.dt, g)
             : ekf_step(spec, t, st, y, dy, bundle.grid.dt, g);
    traj.gauss.push_back(st);
  }
  return traj;
}

VectorXd simulate_R_original(const ModelSpec& spec, const Strategy& strategy,
                             double theta, double r0, PathBundle& bundle,
                             const FilterTrajectory* filter) {
  (void)theta;
  const std::size_t steps = bundle.grid.steps();
  const Dimensions& dm = spec.dims;
  if (!std::isfinite(r0))
    throw NumericalError("simulate_R_original: r0 must be finite");
  if (strategy.needs_filter() && (!filter || filter->size() != steps + 1))
    throw NumericalError("simulate_R_original: feedback strategy needs an "
                         "aligned filter trajectory");

  VectorXd R(steps + 1);
  R[0] = r0;
  GaussianFilterState dummy{VectorXd::Zero(dm.n), MatrixXd::Zero(dm.n, dm.n)};
  for (std::size_t k = 0; k < steps; ++k) {
    const double t = bundle.grid.time_at(k);
    VectorXd x = bundle.X_path.row(k).transpose();
    VectorXd y = bundle.Y_path.row(k).transpose();
    FilterState fs = filter ? filter->at(k) : FilterState::of(dummy);
    VectorXd h = strategy.eval(t, fs, y);

    MatrixXd sig1 = sigma_tradable(spec, t, y);
    VectorXd xi = xi_row(spec, t, y);
    VectorXd a1 = VectorXd(spec.a.eval(t, x, y)).head(dm.m1);
    double cval = spec.c.eval(t, x, y)(0, 0);
    VectorXd spread = sig1.transpose() * h - xi;  // Sigma^(1)' h - Xi'

    double drift = -0.5 * (sig1.transpose() * h).squaredNorm() + h.dot(a1) +
                   0.5 * xi.squaredNorm() - cval;
    double diffusion = spread.dot(bundle.dW.row(k).transpose());
    R[k + 1] = R[k] + drift * bundle.grid.dt + diffusion;
  }
  bundle.R_path = R;
  return R;
}

VectorXd simulate_R_separated(const ModelSpec& spec, const Strategy& strategy,
                              double theta, double r0,
                              const FilterTrajectory& filter,
                              PathBundle& bundle) {
  (void)theta;
  const std::size_t steps = bundle.grid.steps();
  if (filter.size() != steps + 1)
    throw NumericalError(
        "simulate_R_separated: filter trajectory is not aligned to the grid");

  const bool const_diff = spec.constant_diffusions();
  ObservationGeometry geom;
  if (const_diff)
    geom = ObservationGeometry::from(assemble_sigma_y(spec, 0.0, spec.y0));

  VectorXd R(steps + 1);
  R[0] = r0;
  for (std::size_t k = 0; k < steps; ++k) {
    const double t = bundle.grid.time_at(k);
    VectorXd y = bundle.Y_path.row(k).transpose();
    VectorXd dy = (bundle.Y_path.row(k + 1) - bundle.Y_path.row(k)).transpose();
    FilterState fs = filter.at(k);
    VectorXd h = strategy.eval(t, fs, y);

    MatrixXd sig1 = sigma_tradable(spec, t, y);
    VectorXd xi = xi_row(spec, t, y);
    VectorXd a1_hat = hat_a_tradable(spec, t, fs, y);
    double c_hat = hat_c(spec, t, fs, y);
    VectorXd spread = sig1.transpose() * h - xi;

    const ObservationGeometry& g =
        const_diff ? geom
                   : ObservationGeometry::from(assemble_sigma_y(spec, t, y));
    VectorXd hat_ay = hat_observation_drift(spec, t, fs, y);
    InnovationsIncrement inn = innovations_increment(g, dy, hat_ay, bundle.grid.dt);

    double drift = -0.5 * (sig1.transpose() * h).squaredNorm() + h.dot(a1_hat) +
                   0.5 * xi.squaredNorm() - c_hat;
    R[k + 1] = R[k] + drift * bundle.grid.dt + spread.dot(inn.dW_tilde);
  }
  return R;
}

void write_paths_csv(const std::vector<PathBundle>& bundles,
                     const ModelSpec& spec, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw NumericalError("cannot open " + path);
  os << "path_id,step,t";
  for (int i = 0; i < spec.dims.n; ++i) os << ",x_" << i;
  for (int i = 0; i < spec.dims.mY(); ++i) os << ",y_" << i;
  os << ",R,diverged\n";
  char buf[32];
  for (const PathBundle& b : bundles) {
    const std::size_t steps = b.grid.steps();
    for (std::size_t k = 0; k <= steps; ++k) {
      os << b.path_index << ',' << k;
      auto put = [&](double v) {
        std::snprintf(buf, sizeof buf, ",%.17g", v);
        os << buf;
      };
      put(b.grid.time_at(k));
      for (int i = 0; i < spec.dims.n; ++i) put(b.X_path(k, i));
      for (int i = 0; i < spec.dims.mY(); ++i) put(b.Y_path(k, i));
      put(b.R_path.size() > static_cast<Eigen::Index>(k) ? b.R_path[k] : 0.0);
      os << ',' << (b.diverged ? 1 : 0) << '\n';
    }
  }
}

}  // namespace sepfilter
