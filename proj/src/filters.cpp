#include "sepfilter/filters.hpp"

#include <cmath>

#include "sepfilter/conditional_moments.hpp"

namespace sepfilter {

ObservationGeometry ObservationGeometry::from(const MatrixXd& sig_y) {
  ObservationGeometry g;
  g.SigY = sig_y;
  g.gram = sig_y * sig_y.transpose();
  g.gram_inv = sym_inverse(g.gram, "SigmaY SigmaY'");
  g.gram_inv_sqrt = sym_inv_sqrt(g.gram, "SigmaY SigmaY'");
  g.gram_sqrt = sym_sqrt(g.gram);
  g.SigYT_gram_inv = sig_y.transpose() * g.gram_inv;
  return g;
}

MatrixXd observation_jacobian(const ModelSpec& spec, double t,
                              const VectorXd& x, const VectorXd& y) {
  const Dimensions& dm = spec.dims;
  MatrixXd jac = MatrixXd::Zero(dm.mY(), dm.n);
  int r = 0;
  if (dm.ell > 0) {
    jac.middleRows(r, dm.ell) = spec.bf.jacobian_x(t, x, y, dm.n);
    r += dm.ell;
  }
  jac.middleRows(r, dm.m) = spec.a.jacobian_x(t, x, y, dm.n);
  r += dm.m;
  jac.middleRows(r, 1) = spec.c.jacobian_x(t, x, y, dm.n);
  r += 1;
  if (dm.k > 0) jac.middleRows(r, dm.k) = spec.aE.jacobian_x(t, x, y, dm.n);
  return jac;
}

Linearization ekf_linearize(const ModelSpec& spec, double t,
                            const GaussianFilterState& state,
                            const VectorXd& y) {
  Linearization lin;
  lin.B = spec.b.jacobian_x(t, state.m, y, spec.dims.n);
  lin.bbar = VectorXd(spec.b.eval(t, state.m, y)) - lin.B * state.m;
  lin.AY = observation_jacobian(spec, t, state.m, y);
  lin.abar =
      assemble_observation(spec, t, state.m, y).aY - lin.AY * state.m;
  return lin;
}

namespace {

GaussianFilterState gaussian_step(const VectorXd& drift_at_mean,
                                  const MatrixXd& B,
                                  const VectorXd& predicted_obs_drift,
                                  const MatrixXd& AY, const MatrixXd& Lambda,
                                  const GaussianFilterState& state,
                                  const VectorXd& dy, double dt,
                                  const ObservationGeometry& geom) {
  // Gain = [Pi AY' + Lambda SigY'] gram^-1
  MatrixXd cross = state.Pi * AY.transpose() +
                   Lambda * geom.SigY.transpose();
  MatrixXd gain = cross * geom.gram_inv;

  GaussianFilterState next;
  next.m = state.m + drift_at_mean * dt + gain * (dy - predicted_obs_drift * dt);

  // Riccati right-hand side: Lambda Lambda' + B Pi + Pi B' - gain gram gain'.
  MatrixXd riccati = Lambda * Lambda.transpose() + B * state.Pi +
                     state.Pi * B.transpose() -
                     cross * geom.gram_inv * cross.transpose();
  next.Pi = psd_floor(state.Pi + riccati * dt);
  return next;
}

}  // namespace

GaussianFilterState ekf_step(const ModelSpec& spec, double t,
                             const GaussianFilterState& state,
                             const VectorXd& y, const VectorXd& dy, double dt,
                             const ObservationGeometry& geom) {
  Linearization lin = ekf_linearize(spec, t, state, y);
  MatrixXd Lambda = spec.lambda.eval(t, state.m, y);
  VectorXd drift = lin.bbar + lin.B * state.m;
  VectorXd obs_drift = lin.abar + lin.AY * state.m;
  return gaussian_step(drift, lin.B, obs_drift, lin.AY, Lambda, state, dy, dt,
                       geom);
}

GaussianFilterState kalman_bucy_step(const ModelSpec& spec, double t,
                                     const GaussianFilterState& state,
                                     const VectorXd& y, const VectorXd& dy,
                                     double dt,
                                     const ObservationGeometry& geom) {
  if (spec.b.structure_tag() > StructureTag::Linear)
    throw NumericalError("kalman_bucy_step: hidden drift is not affine");
  const Dimensions& dm = spec.dims;
  MatrixXd B = spec.b.family() == CoeffFamily::Affine && spec.b.cx().size() > 0
                   ? MatrixXd(spec.b.cx())
                   : MatrixXd::Zero(dm.n, dm.n);
  VectorXd drift = spec.b.eval(t, state.m, y);

  // Stacked affine observation drift read directly off the families.
  MatrixXd AY(dm.mY(), dm.n);
  int r = 0;
  auto affine_jac = [&](const Coefficient& coef) {
    if (coef.structure_tag() > StructureTag::Linear)
      throw NumericalError("kalman_bucy_step: observation drift not affine");
    return coef.family() == CoeffFamily::Affine && coef.cx().size() > 0
               ? MatrixXd(coef.cx())
               : MatrixXd::Zero(coef.rows(), dm.n);
  };
  if (dm.ell > 0) {
    AY.middleRows(r, dm.ell) = affine_jac(spec.bf);
    r += dm.ell;
  }
  AY.middleRows(r, dm.m) = affine_jac(spec.a);
  r += dm.m;
  AY.middleRows(r, 1) = affine_jac(spec.c);
  r += 1;
  if (dm.k > 0) AY.middleRows(r, dm.k) = affine_jac(spec.aE);

  VectorXd obs_drift = assemble_observation(spec, t, state.m, y).aY;
  MatrixXd Lambda = spec.lambda.eval(t, state.m, y);
  return gaussian_step(drift, B, obs_drift, AY, Lambda, state, dy, dt, geom);
}

SimplexFilterState wonham_step(const MatrixXd& Q, const VectorXd& f_values,
                               double sigma, const SimplexFilterState& state,
                               double dy, double dt) {
  const int k = static_cast<int>(state.p.size());
  if (Q.rows() != k || Q.cols() != k)
    throw NumericalError("wonham_step: generator shape mismatch");
  for (int i = 0; i < k; ++i) {
    double row_sum = Q.row(i).sum();
    if (std::abs(row_sum) > 1e-10)
      throw NumericalError("wonham_step: generator rows must sum to zero");
    for (int j = 0; j < k; ++j)
      if (j != i && Q(i, j) < 0.0)
        throw NumericalError("wonham_step: negative off-diagonal rate");
  }
  if (sigma <= 0.0) throw NumericalError("wonham_step: sigma must be positive");

  const Eigen::RowVectorXd p = state.p.transpose();
  double f_hat = f_values.dot(state.p);
  // F = diag(f) - f_hat I
  Eigen::RowVectorXd pF =
      (p.array() * (f_values.transpose().array() - f_hat)).matrix();
  double inv_s2 = 1.0 / (sigma * sigma);
  Eigen::RowVectorXd dp =
      p * Q * dt - inv_s2 * f_hat * pF * dt + inv_s2 * pF * dy;

  SimplexFilterState next;
  next.p = (p + dp).transpose().cwiseMax(0.0);
  double total = next.p.sum();
  if (total <= 0.0)
    throw NumericalError("wonham_step: probability mass vanished");
  next.p /= total;
  return next;
}

ParticleCloud particle_init(const ModelSpec& spec, int n_particles,
                            PathRng& rng) {
  if (n_particles < 100)
    throw NumericalError("particle_init: need at least 100 particles");
  const int n = spec.dims.n;
  ParticleCloud cloud;
  cloud.particles.resize(n_particles, n);
  cloud.log_weights = VectorXd::Zero(n_particles);
  cloud.ess = static_cast<double>(n_particles);

  MatrixXd L;
  {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(spec.x0.cov);
    L = es.eigenvectors() *
        es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  }
  VectorXd z(n);
  for (int i = 0; i < n_particles; ++i) {
    for (int j = 0; j < n; ++j) z[j] = rng.normal();
    cloud.particles.row(i) = (spec.x0.mean + L * z).transpose();
  }
  return cloud;
}

ParticleCloud particle_step(const ModelSpec& spec, const ParticleCloud& cloud,
                            const VectorXd& y, const VectorXd& dy, double dt,
                            double t, PathRng& rng,
                            const ObservationGeometry& geom) {
  const int n_particles = static_cast<int>(cloud.particles.rows());
  const int n = spec.dims.n;
  const int d = spec.dims.d();
  const double sqdt = std::sqrt(dt);

  ParticleCloud next = cloud;
  VectorXd dw(d), x(n);
  double log_norm_const = -0.5 * static_cast<double>(dy.size()) *
                              std::log(2.0 * M_PI * dt) -
                          0.5 * std::log(std::max(geom.gram.determinant(),
                                                  1e-300));
  for (int i = 0; i < n_particles; ++i) {
    x = cloud.particles.row(i).transpose();
    // Observation-increment likelihood at the pre-move position.
    VectorXd resid = dy - assemble_observation(spec, t, x, y).aY * dt;
    double quad = resid.dot(geom.gram_inv * resid) / dt;
    next.log_weights[i] = cloud.log_weights[i] + log_norm_const - 0.5 * quad;

    for (int j = 0; j < d; ++j) dw[j] = rng.normal() * sqdt;
    VectorXd bx = spec.b.eval(t, x, y);
    MatrixXd lx = spec.lambda.eval(t, x, y);
    next.particles.row(i) = (x + bx * dt + lx * dw).transpose();
  }

  double shift = next.log_weights.maxCoeff();
  if (!std::isfinite(shift))
    throw NumericalError("particle_step: all weights underflowed");
  VectorXd w = (next.log_weights.array() - shift).exp();
  double wsum = w.sum();
  w /= wsum;
  next.ess = 1.0 / w.squaredNorm();

  if (next.ess < 0.5 * n_particles) {
    // Systematic resampling.
    MatrixXd resampled(n_particles, n);
    double u0 = rng.uniform() / n_particles;
    double cum = w[0];
    int j = 0;
    for (int i = 0; i < n_particles; ++i) {
      double u = u0 + static_cast<double>(i) / n_particles;
      while (cum < u && j + 1 < n_particles) cum += w[++j];
      resampled.row(i) = next.particles.row(j);
    }
    next.particles = resampled;
    next.log_weights.setZero();
    next.ess = static_cast<double>(n_particles);
  }
  return next;
}

InnovationsIncrement innovations_increment(const ObservationGeometry& geom,
                                           const VectorXd& dy,
                                           const VectorXd& hat_aY, double dt) {
  InnovationsIncrement out;
  VectorXd resid = dy - hat_aY * dt;
  out.dU = geom.gram_inv_sqrt * resid;
  out.dW_tilde = geom.SigYT_gram_inv * resid;
  return out;
}

FilterDriftDiffusion filter_as_zeta(const ModelSpec& spec, FilterKind kind,
                                    double t, const FilterState& state,
                                    const VectorXd& y,
                                    const ObservationGeometry& geom) {
  FilterDriftDiffusion out;
  if (kind == FilterKind::Wonham) {
    if (!state.simplex)
      throw NumericalError("filter_as_zeta: Wonham needs a simplex state");
    WonhamReduction red = wonham_reduction(spec, t, y);
    const VectorXd& p = state.simplex->p;
    const int k = static_cast<int>(p.size());
    double f_hat = red.f_values.dot(p);
    VectorXd pF = (p.array() * (red.f_values.array() - f_hat)).matrix();
    double inv_s2 = 1.0 / (red.sigma * red.sigma);
    out.G = (spec.chain_generator.transpose() * p) - inv_s2 * f_hat * pF;
    out.H = MatrixXd::Zero(k, spec.dims.mY());
    out.H.col(red.obs_index) = inv_s2 * pF;
    FilterState fs;
    fs.simplex = state.simplex;
    out.G_hat = out.G + out.H * hat_observation_drift(spec, t, fs, y);
    return out;
  }

  if (!state.gauss)
    throw NumericalError("filter_as_zeta: Gaussian filter needs (m, Pi)");
  if (kind != FilterKind::KalmanBucy && kind != FilterKind::Ekf)
    throw NumericalError("filter_as_zeta: unsupported filter kind");

  const GaussianFilterState& g = *state.gauss;
  const int n = spec.dims.n;
  const int q = n + n * (n + 1) / 2;
  Linearization lin = ekf_linearize(spec, t, g, y);
  MatrixXd Lambda = spec.lambda.eval(t, g.m, y);
  MatrixXd cross = g.Pi * lin.AY.transpose() + Lambda * geom.SigY.transpose();
  MatrixXd gain = cross * geom.gram_inv;
  VectorXd obs_drift = lin.abar + lin.AY * g.m;

  out.G = VectorXd::Zero(q);
  out.H = MatrixXd::Zero(q, spec.dims.mY());
  out.G.head(n) =
      lin.bbar + lin.B * g.m - gain * obs_drift;
  out.H.topRows(n) = gain;
  MatrixXd riccati = Lambda * Lambda.transpose() + lin.B * g.Pi +
                     g.Pi * lin.B.transpose() -
                     cross * geom.gram_inv * cross.transpose();
  out.G.tail(q - n) = vech(riccati);
  // Pi rows of H stay zero: the covariance is driven by time only.
  out.G_hat = out.G + out.H * obs_drift;
  return out;
}

WonhamReduction wonham_reduction(const ModelSpec& spec, double t,
                                 const VectorXd& y) {
  if (!spec.is_chain())
    throw NumericalError("wonham_reduction: model has no chain state");
  const int num_states = static_cast<int>(spec.x0.states.rows());
  const int my = spec.dims.mY();

  // Observation drift at every chain state; exactly one component may vary.
  MatrixXd drift_by_state(my, num_states);
  for (int i = 0; i < num_states; ++i) {
    VectorXd xi = spec.x0.states.row(i).transpose();
    drift_by_state.col(i) = assemble_observation(spec, t, xi, y).aY;
  }
  int informative = -1;
  for (int r = 0; r < my; ++r) {
    double spread = drift_by_state.row(r).maxCoeff() -
                    drift_by_state.row(r).minCoeff();
    if (spread > 1e-12) {
      if (informative >= 0)
        throw NumericalError(
            "wonham_reduction: more than one observation component depends "
            "on the chain state");
      informative = r;
    }
  }
  if (informative < 0)
    throw NumericalError(
        "wonham_reduction: no observation component depends on the chain");

  MatrixXd sig_y = assemble_sigma_y(spec, t, y);
  VectorXd row = sig_y.row(informative).transpose();
  for (int r = 0; r < my; ++r) {
    if (r == informative) continue;
    if (std::abs(row.dot(VectorXd(sig_y.row(r).transpose()))) > 1e-12)
      throw NumericalError(
          "wonham_reduction: informative component noise is correlated with "
          "another observation row");
  }

  WonhamReduction red;
  red.obs_index = informative;
  red.sigma = row.norm();
  red.f_values = drift_by_state.row(informative).transpose();
  if (red.sigma <= 0.0)
    throw NumericalError("wonham_reduction: informative row has no noise");
  return red;
}

}  // namespace sepfilter
