#include "sepfilter/model.hpp"

#include <cmath>
#include <sstream>

namespace sepfilter {

namespace {

std::string point_str(double t, const VectorXd& x, const VectorXd& y) {
  std::ostringstream os;
  os << "t=" << t << " x=[";
  for (int i = 0; i < x.size(); ++i) os << (i ? "," : "") << x[i];
  os << "] y=[";
  for (int i = 0; i < y.size(); ++i) os << (i ? "," : "") << y[i];
  os << "]";
  return os.str();
}

struct ProbeBox {
  VectorXd x_lo, x_hi, y_lo, y_hi;
  double t_lo = 0.0, t_hi = 1.0;
};

ProbeBox make_probe_box(const ModelSpec& spec) {
  ProbeBox box;
  box.t_lo = 0.0;
  box.t_hi = spec.horizon;
  const int n = spec.dims.n;
  const int my = spec.dims.mY();
  if (spec.probe_x_lo.size() == n && spec.probe_x_hi.size() == n) {
    box.x_lo = spec.probe_x_lo;
    box.x_hi = spec.probe_x_hi;
  } else if (spec.x0.gaussian) {
    VectorXd sd = spec.x0.cov.diagonal().cwiseMax(0.0).cwiseSqrt();
    box.x_lo = spec.x0.mean - 3.0 * sd - VectorXd::Constant(n, 0.5);
    box.x_hi = spec.x0.mean + 3.0 * sd + VectorXd::Constant(n, 0.5);
  } else {
    box.x_lo = spec.x0.states.colwise().minCoeff().transpose() -
               VectorXd::Constant(n, 0.5);
    box.x_hi = spec.x0.states.colwise().maxCoeff().transpose() +
               VectorXd::Constant(n, 0.5);
  }
  if (spec.probe_y_lo.size() == my && spec.probe_y_hi.size() == my) {
    box.y_lo = spec.probe_y_lo;
    box.y_hi = spec.probe_y_hi;
  } else {
    box.y_lo = spec.y0 - VectorXd::Constant(my, 1.0);
    box.y_hi = spec.y0 + VectorXd::Constant(my, 1.0);
  }
  return box;
}

void check_shape(const Coefficient& coef, int rows, int cols,
                 const std::string& name, ValidationReport& rep) {
  if (coef.rows() != rows || coef.cols() != cols) {
    rep.ok = false;
    rep.violations.push_back(
        {"shape", name + " declared " + std::to_string(coef.rows()) + "x" +
                      std::to_string(coef.cols()) + ", expected " +
                      std::to_string(rows) + "x" + std::to_string(cols)});
  }
}

}  // namespace

VectorXd d_sigma(const ModelSpec& spec, double t, const VectorXd& y) {
  VectorXd xref = spec.x0.gaussian
                      ? spec.x0.mean
                      : VectorXd(spec.x0.states.row(0).transpose());
  MatrixXd s = spec.sigma.eval(t, xref, y);
  if (s.rows() != spec.dims.m || s.cols() != spec.dims.d())
    throw NumericalError("d_sigma: sigma shape mismatch");
  return (s * s.transpose()).diagonal();
}

MatrixXd assemble_sigma_y(const ModelSpec& spec, double t, const VectorXd& y) {
  const Dimensions& dm = spec.dims;
  VectorXd xref = spec.x0.gaussian
                      ? spec.x0.mean
                      : VectorXd(spec.x0.states.row(0).transpose());
  MatrixXd out(dm.mY(), dm.d());
  int r = 0;
  if (dm.ell > 0) {
    out.middleRows(r, dm.ell) = spec.lambdaf.eval(t, xref, y);
    r += dm.ell;
  }
  out.middleRows(r, dm.m) = spec.sigma.eval(t, xref, y);
  r += dm.m;
  out.middleRows(r, 1) = spec.xi.eval(t, xref, y);
  r += 1;
  if (dm.k > 0) out.middleRows(r, dm.k) = spec.sigmaE.eval(t, xref, y);
  return out;
}

ObservationCoefficients assemble_observation(const ModelSpec& spec, double t,
                                             const VectorXd& x,
                                             const VectorXd& y) {
  const Dimensions& dm = spec.dims;
  ObservationCoefficients out;
  out.aY.resize(dm.mY());
  int r = 0;
  if (dm.ell > 0) {
    out.aY.segment(r, dm.ell) = spec.bf.eval(t, x, y);
    r += dm.ell;
  }
  out.aY.segment(r, dm.m) =
      VectorXd(spec.a.eval(t, x, y)) - 0.5 * d_sigma(spec, t, y);
  r += dm.m;
  MatrixXd xirow = spec.xi.eval(t, x, y);
  double xixi = (xirow * xirow.transpose())(0, 0);
  out.aY[r] = spec.c.eval(t, x, y)(0, 0) - 0.5 * xixi;
  r += 1;
  if (dm.k > 0) out.aY.segment(r, dm.k) = spec.aE.eval(t, x, y);
  out.SigY = assemble_sigma_y(spec, t, y);
  return out;
}

MatrixXd sigma_tradable(const ModelSpec& spec, double t, const VectorXd& y) {
  VectorXd xref = spec.x0.gaussian
                      ? spec.x0.mean
                      : VectorXd(spec.x0.states.row(0).transpose());
  MatrixXd s = spec.sigma.eval(t, xref, y);
  return s.topRows(spec.dims.m1);
}

VectorXd xi_row(const ModelSpec& spec, double t, const VectorXd& y) {
  VectorXd xref = spec.x0.gaussian
                      ? spec.x0.mean
                      : VectorXd(spec.x0.states.row(0).transpose());
  return spec.xi.eval(t, xref, y).row(0).transpose();
}

ValidationReport validate(const ModelSpec& spec) {
  ValidationReport rep;
  const Dimensions& dm = spec.dims;

  if (dm.n < 1 || dm.m < 1 || dm.m1 < 1 || dm.m1 > dm.m || dm.ell < 0 ||
      dm.k < 0) {
    rep.ok = false;
    rep.violations.push_back({"dimensions", "counts out of range"});
    return rep;
  }

  check_shape(spec.b, dm.n, 1, "b", rep);
  check_shape(spec.lambda, dm.n, dm.d(), "lambda", rep);
  if (dm.ell > 0) {
    check_shape(spec.bf, dm.ell, 1, "bf", rep);
    check_shape(spec.lambdaf, dm.ell, dm.d(), "lambdaf", rep);
  }
  check_shape(spec.a, dm.m, 1, "a", rep);
  check_shape(spec.sigma, dm.m, dm.d(), "sigma", rep);
  check_shape(spec.c, 1, 1, "c", rep);
  check_shape(spec.xi, 1, dm.d(), "xi", rep);
  if (dm.k > 0) {
    check_shape(spec.aE, dm.k, 1, "aE", rep);
    check_shape(spec.sigmaE, dm.k, dm.d(), "sigmaE", rep);
  }
  if (spec.y0.size() != dm.mY()) {
    rep.ok = false;
    rep.violations.push_back(
        {"shape", "y0 has " + std::to_string(spec.y0.size()) +
                      " entries, expected " + std::to_string(dm.mY())});
  }
  if (spec.x0.gaussian) {
    if (spec.x0.mean.size() != dm.n || spec.x0.cov.rows() != dm.n ||
        spec.x0.cov.cols() != dm.n) {
      rep.ok = false;
      rep.violations.push_back({"shape", "x0 Gaussian law shape mismatch"});
    } else {
      Eigen::SelfAdjointEigenSolver<MatrixXd> es(spec.x0.cov);
      if (es.eigenvalues().minCoeff() < -1e-12) {
        rep.ok = false;
        rep.violations.push_back({"x0_law", "initial covariance not PSD"});
      }
    }
  } else {
    if (spec.x0.states.cols() != dm.n ||
        spec.x0.states.rows() != spec.x0.probs.size() ||
        spec.x0.states.rows() < 1) {
      rep.ok = false;
      rep.violations.push_back({"shape", "x0 categorical law shape mismatch"});
    } else if (std::abs(spec.x0.probs.sum() - 1.0) > 1e-10 ||
               spec.x0.probs.minCoeff() < 0.0) {
      rep.ok = false;
      rep.violations.push_back({"x0_law", "probabilities must be a simplex"});
    }
    const int ns = static_cast<int>(spec.x0.states.rows());
    if (spec.chain_generator.rows() != ns || spec.chain_generator.cols() != ns) {
      rep.ok = false;
      rep.violations.push_back(
          {"chain_generator", "generator must be num_states x num_states"});
    } else {
      for (int i = 0; i < ns; ++i) {
        double row_sum = spec.chain_generator.row(i).sum();
        bool offdiag_ok = true;
        for (int j = 0; j < ns; ++j)
          if (j != i && spec.chain_generator(i, j) < 0.0) offdiag_ok = false;
        if (std::abs(row_sum) > 1e-10 || !offdiag_ok) {
          rep.ok = false;
          rep.violations.push_back(
              {"chain_generator", "rows must sum to 0 with nonnegative "
                                  "off-diagonal entries"});
          break;
        }
      }
    }
  }
  if (!rep.ok) return rep;  // probing needs consistent shapes

  ProbeBox box = make_probe_box(spec);
  const double levels[3] = {0.0, 0.5, 1.0};

  auto lerp = [](const VectorXd& lo, const VectorXd& hi, double w) {
    return VectorXd(lo + w * (hi - lo));
  };

  struct NamedCoef {
    const Coefficient* coef;
    std::string name;
  };
  const NamedCoef observed_diffusions[] = {
      {&spec.lambdaf, "lambdaf"},
      {&spec.sigma, "sigma"},
      {&spec.xi, "xi"},
      {&spec.sigmaE, "sigmaE"},
  };

  for (double wt : levels) {
    double t = box.t_lo + wt * (box.t_hi - box.t_lo);
    for (double wx : levels) {
      VectorXd x = lerp(box.x_lo, box.x_hi, wx);
      for (double wy : levels) {
        VectorXd y = lerp(box.y_lo, box.y_hi, wy);

        MatrixXd s = spec.sigma.eval(t, x, y);
        if (!is_positive_definite(s * s.transpose())) {
          rep.ok = false;
          rep.violations.push_back(
              {"sigma_gram_singular",
               "SigmaSigma' not positive definite at " + point_str(t, x, y)});
        }
        MatrixXd sy = assemble_sigma_y(spec, t, y);
        if (!is_positive_definite(sy * sy.transpose())) {
          rep.ok = false;
          rep.violations.push_back(
              {"sigmaY_gram_singular",
               "SigmaY SigmaY' not positive definite at " + point_str(t, x, y)});
        }

        // Diffusions of observed processes must not depend on x.
        for (const auto& nc : observed_diffusions) {
          if (nc.coef->rows() == 0) continue;
          MatrixXd base = nc.coef->eval(t, x, y);
          for (int i = 0; i < x.size(); ++i) {
            VectorXd xp = x;
            xp[i] += 0.5 * (box.x_hi[i] - box.x_lo[i]) + 1e-3;
            if (!nc.coef->eval(t, xp, y).isApprox(base, 1e-12)) {
              rep.ok = false;
              rep.violations.push_back(
                  {"observed_diffusion_depends_on_x",
                   nc.name + " varies with x at " + point_str(t, x, y)});
              break;
            }
          }
        }

        // Linear structure tags must actually be affine in x: second
        // differences along each x-coordinate vanish.
        const NamedCoef drifts[] = {{&spec.b, "b"},   {&spec.bf, "bf"},
                                    {&spec.a, "a"},   {&spec.c, "c"},
                                    {&spec.aE, "aE"}};
        for (const auto& nc : drifts) {
          if (nc.coef->rows() == 0) continue;
          if (nc.coef->structure_tag() != StructureTag::Linear) continue;
          for (int i = 0; i < x.size(); ++i) {
            double step = 0.25 * (box.x_hi[i] - box.x_lo[i]) + 1e-3;
            VectorXd xp = x, xm = x;
            xp[i] += step;
            xm[i] -= step;
            MatrixXd second = nc.coef->eval(t, xp, y) + nc.coef->eval(t, xm, y) -
                              2.0 * nc.coef->eval(t, x, y);
            if (second.cwiseAbs().maxCoeff() > 1e-9) {
              rep.ok = false;
              rep.violations.push_back(
                  {"structure_tag_mismatch",
                   nc.name + " tagged linear but curved at " +
                       point_str(t, x, y)});
              break;
            }
          }
        }
      }
    }
  }
  return rep;
}

}  // namespace sepfilter
