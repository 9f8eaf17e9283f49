#include "sepfilter/measure_criteria.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"

namespace sepfilter {

namespace {

struct TradableBlocks {
  MatrixXd sig1;    // m1 x d
  VectorXd xi;      // d
  double xixi = 0.0;
};

TradableBlocks tradable_blocks(const ModelSpec& spec, double t,
                               const VectorXd& y) {
  TradableBlocks b;
  b.sig1 = sigma_tradable(spec, t, y);
  b.xi = xi_row(spec, t, y);
  b.xixi = b.xi.squaredNorm();
  return b;
}

double g_formula(double theta, const VectorXd& h, const TradableBlocks& blk,
                 const VectorXd& a1, double c) {
  double h_sig_sq = (blk.sig1.transpose() * h).squaredNorm();
  double h_sig_xi = h.dot(blk.sig1 * blk.xi);
  return 0.5 * (theta + 1.0) * h_sig_sq - h.dot(a1) - theta * h_sig_xi + c +
         0.5 * (theta - 1.0) * blk.xixi;
}

void doleans_increment(double& slot, double theta, const VectorXd& spread,
                       const VectorXd& dW, double dt) {
  slot += -theta * spread.dot(dW) - 0.5 * theta * theta *
                                        spread.squaredNorm() * dt;
}

void psi_z_increment(double& slot, const VectorXd& a_check,
                     const ObservationGeometry& geom,
                     const VectorXd& sigY_dW_tilde_h, double dt) {
  VectorXd gia = geom.gram_inv * a_check;
  slot += gia.dot(sigY_dW_tilde_h) + 0.5 * gia.dot(a_check) * dt;
}

}  // namespace

double g_integrand(const ModelSpec& spec, const RiskSensitiveParams& params,
                   double t, const VectorXd& x, const VectorXd& y,
                   const VectorXd& h) {
  TradableBlocks blk = tradable_blocks(spec, t, y);
  VectorXd a1 = VectorXd(spec.a.eval(t, x, y)).head(spec.dims.m1);
  double c = spec.c.eval(t, x, y)(0, 0);
  return g_formula(params.theta, h, blk, a1, c);
}

double g_hat_integrand(const ModelSpec& spec, const RiskSensitiveParams& params,
                       double t, const FilterState& state, const VectorXd& y,
                       const VectorXd& h) {
  TradableBlocks blk = tradable_blocks(spec, t, y);
  VectorXd a1 = hat_a_tradable(spec, t, state, y);
  double c = hat_c(spec, t, state, y);
  return g_formula(params.theta, h, blk, a1, c);
}

void accumulate_doleans(LogWeightLedger& ledger, bool hat,
                        const ModelSpec& spec, double t, const VectorXd& y,
                        const VectorXd& h, const VectorXd& dW, double dt,
                        double theta) {
  TradableBlocks blk = tradable_blocks(spec, t, y);
  VectorXd spread = blk.sig1.transpose() * h - blk.xi;
  doleans_increment(hat ? ledger.log_chi_hat : ledger.log_chi, theta, spread,
                    dW, dt);
}

void accumulate_psiZ(LogWeightLedger& ledger, const ModelSpec& spec, double t,
                     const FilterState& state, const VectorXd& y,
                     const VectorXd& h, const VectorXd& dW_tilde_h, double dt,
                     double theta, const ObservationGeometry& geom) {
  TradableBlocks blk = tradable_blocks(spec, t, y);
  VectorXd spread = blk.sig1.transpose() * h - blk.xi;
  VectorXd a_check =
      hat_observation_drift(spec, t, state, y) - theta * (geom.SigY * spread);
  psi_z_increment(ledger.log_psi_Z, a_check, geom,
                  geom.SigY * dW_tilde_h, dt);
}

std::vector<PathOutcome> run_experiment(const ExperimentSpec& ex,
                                        const MonteCarloConfig& mc) {
  const ModelSpec& spec = *ex.model;
  const Strategy& strategy = *ex.strategy;
  const RiskSensitiveParams& params = ex.params;
  params.check();
  const double theta = params.theta;
  const Dimensions& dm = spec.dims;
  const std::size_t steps = ex.grid.steps();
  const double dt = ex.grid.dt;
  const double sqdt = std::sqrt(dt);
  const bool has_x = ex.measure != Measure::Pbar;
  const bool use_filter = ex.filter.has_value();

  if (ex.measure == Measure::Pbar && !use_filter)
    throw NumericalError("run_experiment: Pbar simulation needs a filter");
  if (strategy.needs_filter() && !use_filter)
    throw NumericalError("run_experiment: feedback strategy needs a filter");
  if (use_filter && *ex.filter == FilterKind::Particle)
    throw NumericalError(
        "run_experiment: the particle filter is an oracle, not a criterion "
        "filter");
  if (use_filter && *ex.filter == FilterKind::Wonham && !spec.is_chain())
    throw NumericalError("run_experiment: Wonham filter needs a chain model");

  const bool const_diff = spec.constant_diffusions();
  ObservationGeometry geom0;
  if (const_diff)
    geom0 = ObservationGeometry::from(assemble_sigma_y(spec, 0.0, spec.y0));

  std::vector<PathOutcome> out(mc.n_paths);
  GaussianFilterState dummy{VectorXd::Zero(dm.n), MatrixXd::Zero(dm.n, dm.n)};

  parallel_for_paths(
      mc.n_paths,
      [&](std::size_t p) {
        PathRng rng(mc.seed, p);
        PathOutcome o;
        if (use_filter) o.qv_U = VectorXd::Zero(dm.mY());

        int chain_idx = -1;
        VectorXd x;
        if (has_x) x = draw_x0(spec, rng, &chain_idx);
        VectorXd y = spec.y0;

        GaussianFilterState gst;
        SimplexFilterState sst;
        const bool wonham = use_filter && *ex.filter == FilterKind::Wonham;
        if (use_filter) {
          if (wonham)
            sst.p = spec.x0.probs;
          else
            gst = GaussianFilterState{spec.x0.mean, spec.x0.cov};
        }

        double r_orig = params.r0, r_sep = params.r0;
        LogWeightLedger ledger;
        VectorXd dw(dm.d());
        bool diverged = false;

        for (std::size_t k = 0; k < steps && !diverged; ++k) {
          const double t = ex.grid.time_at(k);
          const ObservationGeometry& geom =
              const_diff
                  ? geom0
                  : ObservationGeometry::from(assemble_sigma_y(spec, t, y));

          FilterState fs = use_filter
                               ? (wonham ? FilterState::of(sst)
                                         : FilterState::of(gst))
                               : FilterState::of(dummy);
          VectorXd h = strategy.eval(t, fs, y);
          TradableBlocks blk = tradable_blocks(spec, t, y);
          VectorXd spread = blk.sig1.transpose() * h - blk.xi;
          double h_sig_sq = (blk.sig1.transpose() * h).squaredNorm();

          VectorXd hat_ay, hat_a1;
          double hat_c_v = 0.0;
          if (use_filter) {
            hat_ay = hat_observation_drift(spec, t, fs, y);
            // Recover the hatted asset/benchmark drifts from the stack; the
            // -1/2 corrections are x-free.
            VectorXd dsig = d_sigma(spec, t, y);
            hat_a1 = hat_ay.segment(dm.ell, dm.m1) + 0.5 * dsig.head(dm.m1);
            hat_c_v = hat_ay[dm.ell + dm.m] + 0.5 * blk.xixi;
          }

          for (int i = 0; i < dm.d(); ++i) dw[i] = rng.normal() * sqdt;

          VectorXd y_drift = VectorXd::Zero(dm.mY());
          VectorXd a1;
          double cval = 0.0;
          if (has_x) {
            ObservationCoefficients obs = assemble_observation(spec, t, x, y);
            a1 = VectorXd(spec.a.eval(t, x, y)).head(dm.m1);
            cval = spec.c.eval(t, x, y)(0, 0);
            y_drift = obs.aY;
            if (ex.measure == Measure::Ph)
              y_drift -= theta * (geom.SigY * spread);

            if (ex.measure == Measure::Ph) {
              VectorXd a_dag = obs.aY - theta * (geom.SigY * spread);
              o.kaza2_X +=
                  -0.5 * a_dag.dot(geom.gram_inv * (geom.SigY * dw));
            }
          }
          VectorXd dy = y_drift * dt + geom.SigY * dw;

          if (has_x) {
            double drift_R = -0.5 * h_sig_sq + h.dot(a1) + 0.5 * blk.xixi -
                             cval;
            r_orig += drift_R * dt + spread.dot(dw);
            ledger.int_g += g_formula(theta, h, blk, a1, cval) * dt;
          }
          if (ex.measure == Measure::P) {
            doleans_increment(ledger.log_chi, theta, spread, dw, dt);
            o.kaza1_X += -0.5 * theta * spread.dot(dw);
          }

          if (use_filter) {
            InnovationsIncrement inn =
                innovations_increment(geom, dy, hat_ay, dt);
            if (ex.measure == Measure::P) {
              doleans_increment(ledger.log_chi_hat, theta, spread,
                                inn.dW_tilde, dt);
              o.kaza1_Z += -0.5 * theta * spread.dot(inn.dW_tilde);
              o.qv_U += inn.dU.cwiseAbs2();
            }
            double drift_Rs = -0.5 * h_sig_sq + h.dot(hat_a1) +
                              0.5 * blk.xixi - hat_c_v;
            r_sep += drift_Rs * dt + spread.dot(inn.dW_tilde);
            ledger.int_ghat += g_formula(theta, h, blk, hat_a1, hat_c_v) * dt;

            if (ex.measure != Measure::P) {
              VectorXd a_check = hat_ay - theta * (geom.SigY * spread);
              VectorXd resid_h = dy - a_check * dt;
              psi_z_increment(ledger.log_psi_Z, a_check, geom, resid_h, dt);
              if (ex.measure == Measure::Ph)
                o.kaza2_Z += -0.5 * a_check.dot(geom.gram_inv * resid_h);
            }

            if (wonham) {
              WonhamReduction red = wonham_reduction(spec, t, y);
              sst = wonham_step(spec.chain_generator, red.f_values, red.sigma,
                                sst, dy[red.obs_index], dt);
            } else if (*ex.filter == FilterKind::KalmanBucy) {
              gst = kalman_bucy_step(spec, t, gst, y, dy, dt, geom);
            } else {
              gst = ekf_step(spec, t, gst, y, dy, dt, geom);
            }
          }

          if (has_x) {
            if (spec.is_chain()) {
              chain_idx =
                  chain_transition(spec.chain_generator, chain_idx, dt, rng);
              x = spec.x0.states.row(chain_idx).transpose();
            } else {
              VectorXd x_drift = spec.b.eval(t, x, y);
              MatrixXd lam = spec.lambda.eval(t, x, y);
              if (ex.measure == Measure::Ph) x_drift -= theta * (lam * spread);
              x += x_drift * dt + lam * dw;
            }
          }
          y += dy;

          bool finite = y.allFinite() && std::isfinite(r_orig) &&
                        std::isfinite(r_sep) && std::isfinite(ledger.int_g) &&
                        std::isfinite(ledger.int_ghat) &&
                        std::isfinite(ledger.log_psi_Z);
          if (has_x) finite = finite && x.allFinite();
          if (use_filter)
            finite = finite && (wonham ? sst.p.allFinite()
                                       : (gst.m.allFinite() &&
                                          gst.Pi.allFinite()));
          if (!finite) diverged = true;
        }

        o.r_orig = r_orig;
        o.r_sep = r_sep;
        o.int_g = ledger.int_g;
        o.int_ghat = ledger.int_ghat;
        o.log_chi = ledger.log_chi;
        o.log_chi_hat = ledger.log_chi_hat;
        o.log_psi_Z = ledger.log_psi_Z;
        o.diverged = diverged;
        if (use_filter) {
          if (wonham) {
            o.terminal_filter_mean = sst.p;
          } else {
            o.terminal_filter_mean = gst.m;
            o.terminal_trace_Pi = gst.Pi.trace();
          }
        }
        out[p] = std::move(o);
      },
      mc.mode);
  return out;
}

namespace {

CriterionEstimate make_estimate(const std::vector<PathOutcome>& outcomes,
                                const std::function<double(const PathOutcome&)>&
                                    log_weight,
                                const RiskSensitiveParams& params,
                                Measure measure,
                                const std::string& filtration_tag) {
  std::vector<double> w;
  w.reserve(outcomes.size());
  std::size_t diverged = 0;
  for (const PathOutcome& o : outcomes) {
    if (o.diverged) {
      ++diverged;
      continue;
    }
    w.push_back(log_weight(o));
  }
  if (w.empty()) throw NumericalError("criterion estimate: all paths diverged");

  LogMeanExp lse = log_mean_exp(w);
  CriterionEstimate est;
  double log_I = -params.theta * std::log(params.r0) + lse.log_mean;
  est.I_value = std::exp(log_I);
  est.J_value = -log_I / params.theta;
  est.stderr_I = est.I_value * lse.stderr_log;
  est.stderr_J = lse.stderr_log / std::abs(params.theta);
  est.n_paths = w.size();
  est.n_diverged = diverged;
  est.measure_tag = to_string(measure);
  est.filtration_tag = filtration_tag;
  return est;
}

}  // namespace

CriterionEstimate estimate_J_original(const ModelSpec& spec,
                                      const Strategy& strategy,
                                      const RiskSensitiveParams& params,
                                      const TimeGrid& grid,
                                      const MonteCarloConfig& mc) {
  ExperimentSpec ex{&spec, &strategy, params, grid, Measure::P, std::nullopt};
  if (strategy.needs_filter())
    ex.filter = spec.is_chain() ? FilterKind::Wonham : FilterKind::KalmanBucy;
  auto outcomes = run_experiment(ex, mc);
  return make_estimate(
      outcomes,
      [&](const PathOutcome& o) { return -params.theta * o.r_orig; }, params,
      Measure::P, "original");
}

CriterionEstimate estimate_J_separated(const ModelSpec& spec,
                                       const Strategy& strategy,
                                       const RiskSensitiveParams& params,
                                       FilterKind filter_kind,
                                       const TimeGrid& grid,
                                       const MonteCarloConfig& mc) {
  ExperimentSpec ex{&spec, &strategy, params, grid, Measure::P, filter_kind};
  auto outcomes = run_experiment(ex, mc);
  return make_estimate(
      outcomes, [&](const PathOutcome& o) { return -params.theta * o.r_sep; },
      params, Measure::P, "separated");
}

CriterionEstimate estimate_J_h(const ModelSpec& spec, const Strategy& strategy,
                               const RiskSensitiveParams& params,
                               const TimeGrid& grid,
                               const MonteCarloConfig& mc) {
  ExperimentSpec ex{&spec, &strategy, params, grid, Measure::Ph, std::nullopt};
  if (strategy.needs_filter())
    ex.filter = spec.is_chain() ? FilterKind::Wonham : FilterKind::KalmanBucy;
  auto outcomes = run_experiment(ex, mc);
  return make_estimate(
      outcomes, [&](const PathOutcome& o) { return params.theta * o.int_g; },
      params, Measure::Ph, "original");
}

CriterionEstimate estimate_J_h_separated(const ModelSpec& spec,
                                         const Strategy& strategy,
                                         const RiskSensitiveParams& params,
                                         FilterKind filter_kind,
                                         const TimeGrid& grid,
                                         const MonteCarloConfig& mc) {
  ExperimentSpec ex{&spec, &strategy, params, grid, Measure::Ph, filter_kind};
  auto outcomes = run_experiment(ex, mc);
  return make_estimate(
      outcomes,
      [&](const PathOutcome& o) { return params.theta * o.int_ghat; }, params,
      Measure::Ph, "separated");
}

CriterionEstimate estimate_I_bar(const ModelSpec& spec,
                                 const Strategy& strategy,
                                 const RiskSensitiveParams& params,
                                 FilterKind filter_kind, const TimeGrid& grid,
                                 const MonteCarloConfig& mc) {
  ExperimentSpec ex{&spec, &strategy, params, grid, Measure::Pbar, filter_kind};
  auto outcomes = run_experiment(ex, mc);
  return make_estimate(
      outcomes,
      [&](const PathOutcome& o) {
        return params.theta * o.int_ghat + o.log_psi_Z;
      },
      params, Measure::Pbar, "separated");
}

EquivalenceReport run_equivalence(const ModelSpec& spec,
                                  const Strategy& strategy,
                                  const RiskSensitiveParams& params,
                                  FilterKind filter_kind, const TimeGrid& grid,
                                  const MonteCarloConfig& mc) {
  EquivalenceReport rep;

  ExperimentSpec exP{&spec, &strategy, params, grid, Measure::P, filter_kind};
  auto outP = run_experiment(exP, mc);
  rep.J = make_estimate(
      outP, [&](const PathOutcome& o) { return -params.theta * o.r_orig; },
      params, Measure::P, "original");
  rep.J_hat = make_estimate(
      outP, [&](const PathOutcome& o) { return -params.theta * o.r_sep; },
      params, Measure::P, "separated");

  ExperimentSpec exH{&spec, &strategy, params, grid, Measure::Ph, filter_kind};
  auto outH = run_experiment(exH, mc);
  rep.Jh = make_estimate(
      outH, [&](const PathOutcome& o) { return params.theta * o.int_g; },
      params, Measure::Ph, "original");
  rep.Jh_hat = make_estimate(
      outH, [&](const PathOutcome& o) { return params.theta * o.int_ghat; },
      params, Measure::Ph, "separated");

  rep.gap = std::abs(rep.J.J_value - rep.J_hat.J_value);
  rep.se_combined = std::sqrt(rep.J.stderr_J * rep.J.stderr_J +
                              rep.J_hat.stderr_J * rep.J_hat.stderr_J);
  rep.gap_h = std::abs(rep.Jh.J_value - rep.Jh_hat.J_value);
  rep.se_h_combined = std::sqrt(rep.Jh.stderr_J * rep.Jh.stderr_J +
                                rep.Jh_hat.stderr_J * rep.Jh_hat.stderr_J);
  rep.pass = rep.gap <= 3.0 * rep.se_combined &&
             rep.gap_h <= 3.0 * rep.se_h_combined;
  return rep;
}

MartingaleReport martingale_battery(const ModelSpec& spec,
                                    const Strategy& strategy,
                                    const RiskSensitiveParams& params,
                                    FilterKind filter_kind,
                                    const TimeGrid& grid,
                                    const MonteCarloConfig& mc) {
  MartingaleReport rep;

  ExperimentSpec exP{&spec, &strategy, params, grid, Measure::P, filter_kind};
  auto outP = run_experiment(exP, mc);
  std::vector<double> chi, chi_hat;
  for (const PathOutcome& o : outP) {
    if (o.diverged) continue;
    chi.push_back(std::exp(o.log_chi));
    chi_hat.push_back(std::exp(o.log_chi_hat));
  }
  rep.chi = mean_stderr(chi);
  rep.chi_hat = mean_stderr(chi_hat);

  // chi-bar^Z = 1/Psi^Z is the exponential martingale on (P^h, F^Y).
  ExperimentSpec exH{&spec, &strategy, params, grid, Measure::Ph, filter_kind};
  auto outH = run_experiment(exH, mc);
  std::vector<double> inv_psi;
  for (const PathOutcome& o : outH)
    if (!o.diverged) inv_psi.push_back(std::exp(-o.log_psi_Z));
  rep.inv_psi_Z = mean_stderr(inv_psi);

  // Psi^Z itself is the martingale under P-bar.
  ExperimentSpec exB{&spec, &strategy, params, grid, Measure::Pbar,
                     filter_kind};
  auto outB = run_experiment(exB, mc);
  std::vector<double> psi;
  for (const PathOutcome& o : outB)
    if (!o.diverged) psi.push_back(std::exp(o.log_psi_Z));
  rep.psi_Z_pbar = mean_stderr(psi);

  auto within = [](const MeanStderr& m) {
    return std::abs(m.mean - 1.0) <= 3.0 * m.stderr_;
  };
  rep.all_within_3se = within(rep.chi) && within(rep.chi_hat) &&
                       within(rep.inv_psi_Z) && within(rep.psi_Z_pbar);
  return rep;
}

double log_weight_tail_index(std::vector<double> log_weights) {
  if (log_weights.size() < 40) return 1e9;
  std::sort(log_weights.begin(), log_weights.end());
  const std::size_t n = log_weights.size();
  const std::size_t k = std::max<std::size_t>(20, n / 20);
  double threshold = log_weights[n - k - 1];
  double excess = 0.0;
  for (std::size_t i = n - k; i < n; ++i)
    excess += log_weights[i] - threshold;
  excess /= static_cast<double>(k);
  if (excess <= 1e-12) return 1e9;
  return 1.0 / excess;
}

KazamakiReport kazamaki_statistics(const ModelSpec& spec,
                                   const Strategy& strategy,
                                   const RiskSensitiveParams& params,
                                   FilterKind filter_kind,
                                   const TimeGrid& grid,
                                   const MonteCarloConfig& mc) {
  KazamakiReport rep;

  ExperimentSpec exP{&spec, &strategy, params, grid, Measure::P, filter_kind};
  auto outP = run_experiment(exP, mc);
  std::vector<double> w1x, w1z;
  for (const PathOutcome& o : outP) {
    if (o.diverged) continue;
    w1x.push_back(o.kaza1_X);
    w1z.push_back(o.kaza1_Z);
  }
  LogMeanExp e1x = log_mean_exp(w1x), e1z = log_mean_exp(w1z);
  rep.kaza1_X = e1x.mean;
  rep.se1_X = e1x.stderr_mean;
  rep.kaza1_Z = e1z.mean;
  rep.se1_Z = e1z.stderr_mean;
  rep.tail_index_1X = log_weight_tail_index(w1x);
  rep.tail_index_1Z = log_weight_tail_index(w1z);

  ExperimentSpec exH{&spec, &strategy, params, grid, Measure::Ph, filter_kind};
  auto outH = run_experiment(exH, mc);
  std::vector<double> w2x, w2z;
  for (const PathOutcome& o : outH) {
    if (o.diverged) continue;
    w2x.push_back(o.kaza2_X);
    w2z.push_back(o.kaza2_Z);
  }
  LogMeanExp e2x = log_mean_exp(w2x), e2z = log_mean_exp(w2z);
  rep.kaza2_X = e2x.mean;
  rep.se2_X = e2x.stderr_mean;
  rep.kaza2_Z = e2z.mean;
  rep.se2_Z = e2z.stderr_mean;
  rep.tail_index_2X = log_weight_tail_index(w2x);
  rep.tail_index_2Z = log_weight_tail_index(w2z);

  rep.heavy_tail = rep.tail_index_1X < 2.0 || rep.tail_index_1Z < 2.0 ||
                   rep.tail_index_2X < 2.0 || rep.tail_index_2Z < 2.0;
  return rep;
}

// ---------------------------------------------------------------------------
// Kallianpur-Striebel check
// ---------------------------------------------------------------------------

namespace {

/// Exact conditional sampler of the hidden path given one observation path
/// for affine scalar-state models: forward Gaussian filter on the
/// discretized dynamics under P^h, then backward sampling. Handles the
/// state/observation noise correlation by conditioning the state increment
/// on the realized observation increment.
class ConditionalPathSampler {
 public:
  ConditionalPathSampler(const ModelSpec& spec, const RiskSensitiveParams& p,
                         const VectorXd& h, const TimeGrid& grid)
      : spec_(spec), params_(p), h_(h), grid_(grid) {
    if (spec.dims.n != 1 || spec.is_chain() || !spec.constant_diffusions())
      throw NumericalError(
          "conditional sampler supports scalar-state constant-diffusion "
          "models");
    for (const Coefficient* c : {&spec.b, &spec.a, &spec.c, &spec.bf, &spec.aE})
      if (c->rows() > 0 && c->structure_tag() > StructureTag::Linear)
        throw NumericalError("conditional sampler needs affine drifts");

    lambda_ = spec.lambda.eval(0.0, spec.x0.mean, spec.y0).row(0).transpose();
    MatrixXd sig_y = assemble_sigma_y(spec, 0.0, spec.y0);
    geom_ = ObservationGeometry::from(sig_y);
    k_tilde_ = (lambda_.transpose() * geom_.SigYT_gram_inv).transpose();  // mY
    q_perp_ = lambda_.squaredNorm() -
              k_tilde_.dot(geom_.SigY * lambda_);
    if (q_perp_ < -1e-12)
      throw NumericalError("conditional sampler: negative complement variance");
    q_perp_ = std::max(q_perp_, 0.0);
    if (q_perp_ <= 1e-14)
      throw NumericalError(
          "conditional sampler: state noise lies in the observation span");
  }

  /// Forward pass along one observation path (rows: steps+1).
  void forward(const MatrixXd& y_path) {
    const std::size_t steps = grid_.steps();
    const double dt = grid_.dt;
    m_u_.resize(steps);
    p_u_.resize(steps);
    gamma_.resize(steps);
    c_.resize(steps);

    double m = spec_.x0.mean[0];
    double P = spec_.x0.cov(0, 0);
    VectorXd x0 = VectorXd::Zero(1);
    for (std::size_t k = 0; k < steps; ++k) {
      const double t = grid_.time_at(k);
      VectorXd y = y_path.row(k).transpose();
      VectorXd dy = (y_path.row(k + 1) - y_path.row(k)).transpose();

      MatrixXd sig1 = sigma_tradable(spec_, t, y);
      VectorXd xi = xi_row(spec_, t, y);
      VectorXd spread = sig1.transpose() * h_ - xi;

      VectorXd alpha = assemble_observation(spec_, t, x0, y).aY -
                       params_.theta * (geom_.SigY * spread);
      VectorXd A = observation_jacobian(spec_, t, x0, y).col(0);
      double b0 = spec_.b.eval(t, x0, y)(0, 0) -
                  params_.theta * lambda_.dot(spread);
      double b1 = spec_.b.jacobian_x(t, x0, y, 1)(0, 0);

      // Measurement update with the observation increment.
      VectorXd innov = dy - (alpha + A * m) * dt;
      MatrixXd s_cov = A * A.transpose() * (P * dt * dt) + geom_.gram * dt;
      VectorXd gain = s_cov.ldlt().solve(A * (P * dt));  // mY
      double m_upd = m + gain.dot(innov);
      double p_upd = P - gain.dot(A) * P * dt;
      p_upd = std::max(p_upd, 0.0);

      // Transition conditioned on the same increment.
      double gamma = 1.0 + b1 * dt - k_tilde_.dot(A) * dt;
      double c_k = b0 * dt + k_tilde_.dot(dy - alpha * dt);

      m_u_[k] = m_upd;
      p_u_[k] = p_upd;
      gamma_[k] = gamma;
      c_[k] = c_k;

      m = c_k + gamma * m_upd;
      P = gamma * gamma * p_upd + q_perp_ * dt;
    }
    m_T_ = m;
    p_T_ = P;
  }

  double terminal_mean() const { return m_T_; }
  double terminal_var() const { return p_T_; }

  /// One backward draw of the full hidden path (size steps+1).
  void sample(PathRng& rng, std::vector<double>& x_path) const {
    const std::size_t steps = grid_.steps();
    const double dt = grid_.dt;
    x_path.resize(steps + 1);
    x_path[steps] = m_T_ + std::sqrt(std::max(p_T_, 0.0)) * rng.normal();
    for (std::size_t kk = steps; kk-- > 0;) {
      double pu = p_u_[kk];
      if (pu <= 1e-300) {
        x_path[kk] = m_u_[kk];
        continue;
      }
      double prec = 1.0 / pu + gamma_[kk] * gamma_[kk] / (q_perp_ * dt);
      double var = 1.0 / prec;
      double mean = var * (m_u_[kk] / pu +
                           gamma_[kk] * (x_path[kk + 1] - c_[kk]) /
                               (q_perp_ * dt));
      x_path[kk] = mean + std::sqrt(var) * rng.normal();
    }
  }

 private:
  const ModelSpec& spec_;
  RiskSensitiveParams params_;
  VectorXd h_;
  TimeGrid grid_;
  VectorXd lambda_;
  ObservationGeometry geom_;
  VectorXd k_tilde_;
  double q_perp_ = 0.0;
  std::vector<double> m_u_, p_u_, gamma_, c_;
  double m_T_ = 0.0, p_T_ = 0.0;
};

}  // namespace

KSReport kallianpur_striebel_check(
    const ModelSpec& spec, const Strategy& strategy,
    const RiskSensitiveParams& params,
    const std::function<double(const VectorXd&)>& phi, const TimeGrid& grid,
    std::uint64_t seed, const KSCheckConfig& cfg) {
  params.check();
  VectorXd h = strategy.eval_constant();
  const Dimensions& dm = spec.dims;
  const std::size_t steps = grid.steps();
  const double dt = grid.dt;
  const double sqdt = std::sqrt(dt);
  const double theta = params.theta;

  if (!spec.constant_diffusions())
    throw NumericalError(
        "kallianpur_striebel_check needs constant diffusions");
  ObservationGeometry geom =
      ObservationGeometry::from(assemble_sigma_y(spec, 0.0, spec.y0));
  MatrixXd lam = spec.lambda.eval(0.0, spec.x0.mean, spec.y0);
  // Complement projector: the part of the driving noise invisible to Y.
  MatrixXd proj_perp =
      MatrixXd::Identity(dm.d(), dm.d()) - geom.SigYT_gram_inv * geom.SigY;
  MatrixXd lam_perp = lam * proj_perp;
  MatrixXd lam_obs = lam * geom.SigYT_gram_inv;  // maps r -> state kick

  ConditionalPathSampler sampler(spec, params, h, grid);

  std::vector<double> gaps;
  double max_rel = 0.0;
  int skipped = 0;

  std::vector<double> lhs_draw_x;
  for (int cidx = 0; cidx < cfg.n_clusters; ++cidx) {
    // Shared observation-noise substream: identical for every path in the
    // cluster, so cluster averages are genuine conditional expectations.
    PathRng cluster_rng(seed, 0xC1000000ULL + static_cast<std::uint64_t>(cidx));
    MatrixXd y_path(steps + 1, dm.mY());
    MatrixXd r_path(steps, dm.mY());
    y_path.row(0) = spec.y0.transpose();
    VectorXd xi_noise(dm.mY());
    for (std::size_t k = 0; k < steps; ++k) {
      for (int i = 0; i < dm.mY(); ++i) xi_noise[i] = cluster_rng.normal();
      VectorXd r = geom.gram_sqrt * xi_noise * sqdt;  // SigY dW-bar increment
      r_path.row(k) = r.transpose();
      y_path.row(k + 1) = y_path.row(k) + r.transpose();
    }

    // RHS: Psi^X-weighted averages over P-bar hidden paths sharing y_path.
    std::vector<double> log_w(cfg.paths_per_cluster);
    std::vector<double> log_psi(cfg.paths_per_cluster);
    std::vector<double> phi_vals(cfg.paths_per_cluster);
    for (int ip = 0; ip < cfg.paths_per_cluster; ++ip) {
      PathRng rng(seed, 0xD2000000ULL +
                            static_cast<std::uint64_t>(cidx) * 1000003ULL +
                            static_cast<std::uint64_t>(ip));
      int chain_idx = -1;
      VectorXd x = draw_x0(spec, rng, &chain_idx);
      double log_psi_x = 0.0, int_g = 0.0;
      VectorXd v(dm.d());
      for (std::size_t k = 0; k < steps; ++k) {
        const double t = grid.time_at(k);
        VectorXd y = y_path.row(k).transpose();
        VectorXd r = r_path.row(k).transpose();

        MatrixXd sig1 = sigma_tradable(spec, t, y);
        VectorXd xiv = xi_row(spec, t, y);
        VectorXd spread = sig1.transpose() * h - xiv;
        VectorXd a_dag = assemble_observation(spec, t, x, y).aY -
                         theta * (geom.SigY * spread);
        VectorXd gia = geom.gram_inv * a_dag;
        log_psi_x += gia.dot(r) - 0.5 * gia.dot(a_dag) * dt;
        int_g += g_integrand(spec, params, t, x, y, h) * dt;

        for (int i = 0; i < dm.d(); ++i) v[i] = rng.normal();
        VectorXd b_eff = spec.b.eval(t, x, y) - theta * (lam * spread) -
                         lam_obs * a_dag;
        x += b_eff * dt + lam_obs * r + lam_perp * v * sqdt;
      }
      log_w[ip] = theta * int_g + log_psi_x;
      log_psi[ip] = log_psi_x;
      phi_vals[ip] = phi(x);
    }
    // RHS = mean(phi e^{theta int g} Psi^X) / mean(Psi^X), both over the
    // cluster, with separate max shifts for stability.
    double shift_w = *std::max_element(log_w.begin(), log_w.end());
    double shift_psi = *std::max_element(log_psi.begin(), log_psi.end());
    double numer = 0.0, numer_w = 0.0, numer_w2 = 0.0, denom = 0.0;
    for (int ip = 0; ip < cfg.paths_per_cluster; ++ip) {
      double w = std::exp(log_w[ip] - shift_w);
      numer += phi_vals[ip] * w;
      numer_w += w;
      numer_w2 += w * w;
      denom += std::exp(log_psi[ip] - shift_psi);
    }
    double ess = numer_w * numer_w / numer_w2;
    if (ess < 10.0) {
      ++skipped;
      continue;
    }
    double rhs = std::exp(shift_w - shift_psi) * numer / denom;

    // LHS: exact conditional sampling under P^h given the same observation
    // path.
    sampler.forward(y_path);
    PathRng oracle_rng(seed,
                       0xE3000000ULL + static_cast<std::uint64_t>(cidx));
    double lhs_acc = 0.0;
    VectorXd x1(1);
    for (int id = 0; id < cfg.oracle_draws; ++id) {
      sampler.sample(oracle_rng, lhs_draw_x);
      double int_g = 0.0;
      for (std::size_t k = 0; k < steps; ++k) {
        x1[0] = lhs_draw_x[k];
        int_g += g_integrand(spec, params, grid.time_at(k), x1,
                             VectorXd(y_path.row(k).transpose()), h) *
                 dt;
      }
      x1[0] = lhs_draw_x[steps];
      lhs_acc += phi(x1) * std::exp(theta * int_g);
    }
    double lhs = lhs_acc / cfg.oracle_draws;

    double gap = lhs - rhs;
    gaps.push_back(gap);
    double scale = std::max({std::abs(lhs), std::abs(rhs), 1e-12});
    max_rel = std::max(max_rel, std::abs(gap) / scale);
  }

  KSReport rep;
  rep.n_clusters_used = static_cast<int>(gaps.size());
  rep.n_skipped = skipped;
  if (!gaps.empty()) {
    MeanStderr ms = mean_stderr(gaps);
    rep.mean_gap = ms.mean;
    rep.stderr_gap = ms.stderr_;
    rep.z = ms.stderr_ > 0.0 ? ms.mean / ms.stderr_ : 0.0;
  }
  rep.max_rel_discrepancy = max_rel;
  return rep;
}

// ---------------------------------------------------------------------------
// JSON serialization
// ---------------------------------------------------------------------------

std::string CriterionEstimate::to_json() const {
  nlohmann::json j;
  j["J_value"] = J_value;
  j["I_value"] = I_value;
  j["stderr_I"] = stderr_I;
  j["stderr_J"] = stderr_J;
  j["n_paths"] = n_paths;
  j["n_diverged"] = n_diverged;
  j["measure_tag"] = measure_tag;
  j["filtration_tag"] = filtration_tag;
  return j.dump(2);
}

std::string EquivalenceReport::to_json() const {
  nlohmann::json j;
  j["J"] = nlohmann::json::parse(J.to_json());
  j["J_hat"] = nlohmann::json::parse(J_hat.to_json());
  j["Jh"] = nlohmann::json::parse(Jh.to_json());
  j["Jh_hat"] = nlohmann::json::parse(Jh_hat.to_json());
  j["gap"] = gap;
  j["se_combined"] = se_combined;
  j["gap_h"] = gap_h;
  j["se_h_combined"] = se_h_combined;
  j["status"] = pass ? "PASS" : "FAIL";
  return j.dump(2);
}

std::string MartingaleReport::to_json() const {
  nlohmann::json j;
  auto put = [&](const char* name, const MeanStderr& m) {
    j[name] = {{"mean", m.mean}, {"stderr", m.stderr_}, {"n", m.n}};
  };
  put("chi", chi);
  put("chi_hat", chi_hat);
  put("inv_psi_Z", inv_psi_Z);
  put("psi_Z_pbar", psi_Z_pbar);
  j["status"] = all_within_3se ? "PASS" : "FAIL";
  return j.dump(2);
}

std::string KazamakiReport::to_json() const {
  nlohmann::json j;
  j["kaza1_X"] = {{"mean", kaza1_X}, {"stderr", se1_X}, {"tail_index", tail_index_1X}};
  j["kaza1_Z"] = {{"mean", kaza1_Z}, {"stderr", se1_Z}, {"tail_index", tail_index_1Z}};
  j["kaza2_X"] = {{"mean", kaza2_X}, {"stderr", se2_X}, {"tail_index", tail_index_2X}};
  j["kaza2_Z"] = {{"mean", kaza2_Z}, {"stderr", se2_Z}, {"tail_index", tail_index_2Z}};
  j["heavy_tail"] = heavy_tail;
  return j.dump(2);
}

std::string KSReport::to_json() const {
  nlohmann::json j;
  j["n_clusters_used"] = n_clusters_used;
  j["n_skipped"] = n_skipped;
  j["mean_gap"] = mean_gap;
  j["stderr_gap"] = stderr_gap;
  j["z"] = z;
  j["max_rel_discrepancy"] = max_rel_discrepancy;
  return j.dump(2);
}

}  // namespace sepfilter
