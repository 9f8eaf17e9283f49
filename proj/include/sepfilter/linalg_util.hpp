#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace sepfilter {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Thrown when a matrix that must be invertible/PD degenerates numerically.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

/// Symmetric PSD square root via eigendecomposition. Negative eigenvalues
/// (roundoff) are clamped to zero.
inline MatrixXd sym_sqrt(const MatrixXd& a) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (a + a.transpose()));
  VectorXd ev = es.eigenvalues().cwiseMax(0.0);
  return es.eigenvectors() * ev.cwiseSqrt().asDiagonal() *
         es.eigenvectors().transpose();
}

inline MatrixXd sym_inv_sqrt(const MatrixXd& a, const std::string& name) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (a + a.transpose()));
  const VectorXd& ev = es.eigenvalues();
  double emax = ev.maxCoeff();
  if (emax <= 0.0 || ev.minCoeff() <= 1e-14 * emax)
    throw NumericalError(name + " is numerically singular");
  return es.eigenvectors() * ev.cwiseSqrt().cwiseInverse().asDiagonal() *
         es.eigenvectors().transpose();
}

inline MatrixXd sym_inverse(const MatrixXd& a, const std::string& name) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (a + a.transpose()));
  const VectorXd& ev = es.eigenvalues();
  double emax = ev.maxCoeff();
  if (emax <= 0.0 || ev.minCoeff() <= 1e-14 * emax)
    throw NumericalError(name + " is numerically singular");
  return es.eigenvectors() * ev.cwiseInverse().asDiagonal() *
         es.eigenvectors().transpose();
}

/// Symmetrize and clamp eigenvalues at zero. Keeps filter covariances PSD
/// after an Euler step.
inline MatrixXd psd_floor(const MatrixXd& a) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (a + a.transpose()));
  if (es.eigenvalues().minCoeff() >= 0.0) return 0.5 * (a + a.transpose());
  VectorXd ev = es.eigenvalues().cwiseMax(0.0);
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

inline bool is_positive_definite(const MatrixXd& a, double rel_tol = 1e-10) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (a + a.transpose()));
  const VectorXd& ev = es.eigenvalues();
  double emax = ev.maxCoeff();
  return emax > 0.0 && ev.minCoeff() > rel_tol * emax;
}

struct MeanStderr {
  double mean = 0.0;
  double stderr_ = 0.0;
  std::size_t n = 0;
};

inline MeanStderr mean_stderr(const std::vector<double>& xs) {
  MeanStderr out;
  out.n = xs.size();
  if (out.n == 0) return out;
  double s = 0.0;
  for (double x : xs) s += x;
  out.mean = s / static_cast<double>(out.n);
  if (out.n < 2) return out;
  double ss = 0.0;
  for (double x : xs) ss += (x - out.mean) * (x - out.mean);
  out.stderr_ = std::sqrt(ss / static_cast<double>(out.n - 1) /
                          static_cast<double>(out.n));
  return out;
}

/// Mean and stderr of exp(w) computed stably via a max shift:
/// mean = exp(shift) * mean(exp(w - shift)).
struct LogMeanExp {
  double log_mean = 0.0;     // ln E[e^w]
  double stderr_log = 0.0;   // delta-method stderr of ln mean
  double mean = 0.0;         // E[e^w]
  double stderr_mean = 0.0;  // stderr of the mean itself
  std::size_t n = 0;
};

inline LogMeanExp log_mean_exp(const std::vector<double>& w) {
  LogMeanExp out;
  out.n = w.size();
  if (out.n == 0) throw NumericalError("log_mean_exp: empty sample");
  double shift = w[0];
  for (double x : w) shift = std::max(shift, x);
  double s = 0.0;
  for (double x : w) s += std::exp(x - shift);
  double mean_shifted = s / static_cast<double>(out.n);
  double ss = 0.0;
  for (double x : w) {
    double d = std::exp(x - shift) - mean_shifted;
    ss += d * d;
  }
  double sd_shifted =
      out.n > 1 ? std::sqrt(ss / static_cast<double>(out.n - 1)) : 0.0;
  double se_shifted = sd_shifted / std::sqrt(static_cast<double>(out.n));
  out.log_mean = shift + std::log(mean_shifted);
  out.stderr_log = se_shifted / mean_shifted;
  out.mean = std::exp(shift) * mean_shifted;
  out.stderr_mean = std::exp(shift) * se_shifted;
  return out;
}

/// Least-squares slope of y against x (used for convergence-order fits).
inline double fit_slope(const std::vector<double>& x,
                        const std::vector<double>& y) {
  const std::size_t n = x.size();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxy / sxx;
}

/// Half-vectorization of a symmetric matrix (column-major lower triangle).
inline VectorXd vech(const MatrixXd& a) {
  const int n = static_cast<int>(a.rows());
  VectorXd out(n * (n + 1) / 2);
  int k = 0;
  for (int j = 0; j < n; ++j)
    for (int i = j; i < n; ++i) out[k++] = a(i, j);
  return out;
}

inline MatrixXd unvech(const VectorXd& v, int n) {
  MatrixXd out(n, n);
  int k = 0;
  for (int j = 0; j < n; ++j)
    for (int i = j; i < n; ++i) {
      out(i, j) = v[k];
      out(j, i) = v[k];
      ++k;
    }
  return out;
}

}  // namespace sepfilter
