#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sepfilter/conditional_moments.hpp"
#include "sepfilter/parallel.hpp"
#include "sepfilter/sde_engine.hpp"

namespace sepfilter {

struct RiskSensitiveParams {
  double theta = 0.5;  // in (-1,0) U (0, inf)
  double T = 1.0;
  double r0 = 1.0;  // initial log excess return, > 0 (enters as r0^{-theta})

  void check() const {
    if (theta == 0.0 || theta <= -1.0)
      throw NumericalError("theta must lie in (-1,0) U (0,inf)");
    if (!(r0 > 0.0)) throw NumericalError("r0 must be positive");
  }
  bool overbetting() const { return theta < 0.0; }
};

struct MonteCarloConfig {
  std::size_t n_paths = 10000;
  std::uint64_t seed = 1;
  RunMode mode = RunMode::Parallel;
};

/// Exponential-criterion integrand g (full-filtration form):
///   (theta+1)/2 h'S1 S1' h - h'a1 - theta h'S1 Xi' + c + (theta-1)/2 Xi Xi'.
double g_integrand(const ModelSpec& spec, const RiskSensitiveParams& params,
                   double t, const VectorXd& x, const VectorXd& y,
                   const VectorXd& h);

/// Same with the asset and benchmark drifts replaced by their conditional
/// expectations under the filter law.
double g_hat_integrand(const ModelSpec& spec, const RiskSensitiveParams& params,
                       double t, const FilterState& state, const VectorXd& y,
                       const VectorXd& h);

/// Per-path running log weights.
struct LogWeightLedger {
  double log_chi = 0.0;
  double log_chi_hat = 0.0;
  double log_psi_Z = 0.0;
  double int_g = 0.0;
  double int_ghat = 0.0;
};

/// log chi += -theta (h'S1 - Xi) dW - theta^2/2 |S1'h - Xi'|^2 dt.
/// `hat` selects the chi-hat slot (same form, innovations increments).
void accumulate_doleans(LogWeightLedger& ledger, bool hat,
                        const ModelSpec& spec, double t, const VectorXd& y,
                        const VectorXd& h, const VectorXd& dW, double dt,
                        double theta);

/// log Psi^Z += a_check' gram^-1 SigY dW_tilde_h + a_check' gram^-1 a_check dt / 2,
/// with a_check = hat_aY - theta SigY (S1'h - Xi').
void accumulate_psiZ(LogWeightLedger& ledger, const ModelSpec& spec, double t,
                     const FilterState& state, const VectorXd& y,
                     const VectorXd& h, const VectorXd& dW_tilde_h, double dt,
                     double theta, const ObservationGeometry& geom);

/// Terminal functionals of one simulated path. Everything downstream
/// (criteria, martingale batteries, Kazamaki statistics) reduces these.
struct PathOutcome {
  double r_orig = 0.0;
  double r_sep = 0.0;
  double int_g = 0.0;
  double int_ghat = 0.0;
  double log_chi = 0.0;
  double log_chi_hat = 0.0;
  double log_psi_Z = 0.0;
  double kaza1_X = 0.0;
  double kaza1_Z = 0.0;
  double kaza2_X = 0.0;
  double kaza2_Z = 0.0;
  VectorXd qv_U;  // per-component quadratic variation of the Kalman innovation
  VectorXd terminal_filter_mean;
  double terminal_trace_Pi = 0.0;
  bool diverged = false;
};

struct ExperimentSpec {
  const ModelSpec* model = nullptr;
  const Strategy* strategy = nullptr;
  RiskSensitiveParams params;
  TimeGrid grid;
  Measure measure = Measure::P;
  std::optional<FilterKind> filter;
};

/// Runs the coupled (X, Y, filter, ledgers) kernel path by path. All
/// functionals for one path come from one shared Wiener stream, which is what
/// makes criterion comparisons common-random-number comparisons.
std::vector<PathOutcome> run_experiment(const ExperimentSpec& ex,
                                        const MonteCarloConfig& mc);

struct CriterionEstimate {
  double J_value = 0.0;
  double I_value = 0.0;
  double stderr_I = 0.0;
  double stderr_J = 0.0;  // delta method on ln I
  std::size_t n_paths = 0;
  std::size_t n_diverged = 0;
  std::string measure_tag;
  std::string filtration_tag;  // "original" | "separated"
  std::string to_json() const;
};

CriterionEstimate estimate_J_original(const ModelSpec& spec,
                                      const Strategy& strategy,
                                      const RiskSensitiveParams& params,
                                      const TimeGrid& grid,
                                      const MonteCarloConfig& mc);

CriterionEstimate estimate_J_separated(const ModelSpec& spec,
                                       const Strategy& strategy,
                                       const RiskSensitiveParams& params,
                                       FilterKind filter_kind,
                                       const TimeGrid& grid,
                                       const MonteCarloConfig& mc);

/// J^h = -(1/theta) ln E^h[r0^{-theta} exp(theta int g dt)].
CriterionEstimate estimate_J_h(const ModelSpec& spec, const Strategy& strategy,
                               const RiskSensitiveParams& params,
                               const TimeGrid& grid,
                               const MonteCarloConfig& mc);

/// Separated twin of J^h: the g-hat functional under the same measure.
CriterionEstimate estimate_J_h_separated(const ModelSpec& spec,
                                         const Strategy& strategy,
                                         const RiskSensitiveParams& params,
                                         FilterKind filter_kind,
                                         const TimeGrid& grid,
                                         const MonteCarloConfig& mc);

/// I-bar = r0^{-theta} E-bar[exp(theta int ghat dt) Psi^Z_T], estimated by
/// simulating the observation as a driftless diffusion (no hidden state).
CriterionEstimate estimate_I_bar(const ModelSpec& spec,
                                 const Strategy& strategy,
                                 const RiskSensitiveParams& params,
                                 FilterKind filter_kind, const TimeGrid& grid,
                                 const MonteCarloConfig& mc);

/// Criterion-equivalence experiment: J vs J-hat under P and J^h vs J-hat^h
/// under P^h, all on common random numbers.
struct EquivalenceReport {
  CriterionEstimate J, J_hat, Jh, Jh_hat;
  double gap = 0.0, se_combined = 0.0;
  double gap_h = 0.0, se_h_combined = 0.0;
  bool pass = false;
  std::string to_json() const;
};
EquivalenceReport run_equivalence(const ModelSpec& spec,
                                  const Strategy& strategy,
                                  const RiskSensitiveParams& params,
                                  FilterKind filter_kind, const TimeGrid& grid,
                                  const MonteCarloConfig& mc);

/// Exponential-martingale battery: E[chi_T] and E[chi_hat_T] under P,
/// E[1/Psi^Z_T] under P^h, E[Psi^Z_T] under P-bar, all expected to be 1.
struct MartingaleReport {
  MeanStderr chi, chi_hat, inv_psi_Z, psi_Z_pbar;
  bool all_within_3se = false;
  std::string to_json() const;
};
MartingaleReport martingale_battery(const ModelSpec& spec,
                                    const Strategy& strategy,
                                    const RiskSensitiveParams& params,
                                    FilterKind filter_kind,
                                    const TimeGrid& grid,
                                    const MonteCarloConfig& mc);

/// Monte-Carlo estimates of the four Kazamaki expectations plus tail
/// diagnostics of the log-weights. Diagnostic only: nothing is gated.
struct KazamakiReport {
  double kaza1_X = 0.0, se1_X = 0.0;
  double kaza1_Z = 0.0, se1_Z = 0.0;
  double kaza2_X = 0.0, se2_X = 0.0;
  double kaza2_Z = 0.0, se2_Z = 0.0;
  double tail_index_1X = 0.0, tail_index_1Z = 0.0;
  double tail_index_2X = 0.0, tail_index_2Z = 0.0;
  bool heavy_tail = false;
  std::string to_json() const;
};
KazamakiReport kazamaki_statistics(const ModelSpec& spec,
                                   const Strategy& strategy,
                                   const RiskSensitiveParams& params,
                                   FilterKind filter_kind,
                                   const TimeGrid& grid,
                                   const MonteCarloConfig& mc);

/// Kallianpur-Striebel check: conditional expectations realized exactly as
/// cluster averages over paths sharing one observation-noise substream.
/// The left side is estimated by exact conditional sampling of the hidden
/// path given the cluster observation (forward filter, backward sampler);
/// the right side by Psi^X-weighted cluster averages under P-bar.
struct KSCheckConfig {
  int n_clusters = 100;
  int paths_per_cluster = 1000;
  int oracle_draws = 1000;
};
struct KSReport {
  int n_clusters_used = 0;
  int n_skipped = 0;
  double mean_gap = 0.0;
  double stderr_gap = 0.0;
  double z = 0.0;
  double max_rel_discrepancy = 0.0;
  std::string to_json() const;
};
KSReport kallianpur_striebel_check(
    const ModelSpec& spec, const Strategy& strategy,
    const RiskSensitiveParams& params,
    const std::function<double(const VectorXd&)>& phi, const TimeGrid& grid,
    std::uint64_t seed, const KSCheckConfig& cfg);

/// Hill-type tail index of a sample of log-weights (exponential-tail
/// reading: E[w^2] finite iff index > 2).
double log_weight_tail_index(std::vector<double> log_weights);

}  // namespace sepfilter
