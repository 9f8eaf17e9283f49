#include "sepfilter/coefficients.hpp"

#include <cmath>

namespace sepfilter {

std::string to_string(CoeffFamily f) {
  switch (f) {
    case CoeffFamily::Constant: return "constant";
    case CoeffFamily::Affine: return "affine";
    case CoeffFamily::Quadratic: return "quadratic";
    case CoeffFamily::ExpAffine: return "exp_affine";
    case CoeffFamily::Tabulated: return "tabulated";
  }
  return "?";
}

std::string to_string(StructureTag t) {
  switch (t) {
    case StructureTag::Constant: return "constant";
    case StructureTag::Linear: return "linear";
    case StructureTag::Quadratic: return "quadratic";
    case StructureTag::Exponential: return "exponential";
    case StructureTag::General: return "general";
  }
  return "?";
}

Coefficient Coefficient::constant(const MatrixXd& value) {
  Coefficient c;
  c.family_ = CoeffFamily::Constant;
  c.rows_ = static_cast<int>(value.rows());
  c.cols_ = static_cast<int>(value.cols());
  c.c0_ = value;
  return c;
}

Coefficient Coefficient::affine(const VectorXd& c0, const MatrixXd& cx,
                                const MatrixXd& cy) {
  Coefficient c;
  c.family_ = CoeffFamily::Affine;
  c.rows_ = static_cast<int>(c0.size());
  c.cols_ = 1;
  c.c0_ = c0;
  c.cx_ = cx;
  c.cy_ = cy;
  if (cx.rows() != c0.size())
    throw NumericalError("affine coefficient: cx row count mismatch");
  if (cy.size() > 0 && cy.rows() != c0.size())
    throw NumericalError("affine coefficient: cy row count mismatch");
  return c;
}

Coefficient Coefficient::affine_matrix(const MatrixXd& c0, const MatrixXd& cx) {
  Coefficient c;
  c.family_ = CoeffFamily::Affine;
  c.rows_ = static_cast<int>(c0.rows());
  c.cols_ = static_cast<int>(c0.cols());
  c.c0_ = c0;
  c.cx_ = cx;
  if (cx.rows() != c0.rows() || cx.cols() != c0.cols())
    throw NumericalError("affine matrix coefficient: shape mismatch");
  return c;
}

Coefficient Coefficient::quadratic(const VectorXd& qa, const VectorXd& qb,
                                   const VectorXd& qc) {
  Coefficient c;
  c.family_ = CoeffFamily::Quadratic;
  c.rows_ = static_cast<int>(qa.size());
  c.cols_ = 1;
  c.qa_ = qa;
  c.qb_ = qb;
  c.qc_ = qc;
  return c;
}

Coefficient Coefficient::exp_affine(const VectorXd& eta,
                                    const VectorXd& scale) {
  Coefficient c;
  c.family_ = CoeffFamily::ExpAffine;
  c.rows_ = static_cast<int>(eta.size());
  c.cols_ = 1;
  c.eta_ = eta;
  c.scale_ = scale;
  return c;
}

Coefficient Coefficient::tabulated(const VectorXd& knots,
                                   const MatrixXd& values) {
  Coefficient c;
  c.family_ = CoeffFamily::Tabulated;
  c.rows_ = static_cast<int>(values.rows());
  c.cols_ = 1;
  c.knots_ = knots;
  c.table_ = values;
  if (values.cols() != knots.size())
    throw NumericalError("tabulated coefficient: knot/value count mismatch");
  for (int i = 1; i < knots.size(); ++i)
    if (knots[i] <= knots[i - 1])
      throw NumericalError("tabulated coefficient: knots must increase");
  return c;
}

StructureTag Coefficient::structure_tag() const {
  switch (family_) {
    case CoeffFamily::Constant:
      return StructureTag::Constant;
    case CoeffFamily::Affine:
      return (cols_ > 1 || cx_.size() == 0 || cx_.isZero(0.0))
                 ? (x_free() ? StructureTag::Constant : StructureTag::Linear)
                 : StructureTag::Linear;
    case CoeffFamily::Quadratic:
      return StructureTag::Quadratic;
    case CoeffFamily::ExpAffine:
      return StructureTag::Exponential;
    case CoeffFamily::Tabulated:
      return StructureTag::General;
  }
  return StructureTag::General;
}

bool Coefficient::x_free() const {
  switch (family_) {
    case CoeffFamily::Constant:
      return true;
    case CoeffFamily::Affine:
      return cx_.size() == 0 || cx_.isZero(0.0);
    default:
      return false;
  }
}

bool Coefficient::y_free() const {
  if (family_ == CoeffFamily::Affine)
    return cy_.size() == 0 || cy_.isZero(0.0);
  return true;
}

MatrixXd Coefficient::eval(double t, const VectorXd& x,
                           const VectorXd& y) const {
  (void)t;
  switch (family_) {
    case CoeffFamily::Constant:
      return c0_;
    case CoeffFamily::Affine: {
      if (cols_ == 1) {
        VectorXd v = c0_.col(0);
        if (cx_.size() > 0 && x.size() > 0) v += cx_ * x;
        if (cy_.size() > 0 && y.size() > 0) v += cy_ * y;
        return v;
      }
      MatrixXd m = c0_;
      if (cx_.size() > 0 && x.size() > 0) m += x[0] * cx_;
      return m;
    }
    case CoeffFamily::Quadratic: {
      double xv = x[0];
      VectorXd v = qa_ * (xv * xv) + qb_ * xv + qc_;
      return v;
    }
    case CoeffFamily::ExpAffine: {
      double xv = x[0];
      VectorXd v(rows_);
      for (int i = 0; i < rows_; ++i) v[i] = scale_[i] * std::exp(eta_[i] * xv);
      return v;
    }
    case CoeffFamily::Tabulated: {
      double xv = x[0];
      const int nk = static_cast<int>(knots_.size());
      if (xv <= knots_[0]) return table_.col(0);
      if (xv >= knots_[nk - 1]) return table_.col(nk - 1);
      int j = 1;
      while (knots_[j] < xv) ++j;
      double w = (xv - knots_[j - 1]) / (knots_[j] - knots_[j - 1]);
      VectorXd v = (1.0 - w) * table_.col(j - 1) + w * table_.col(j);
      return v;
    }
  }
  return c0_;
}

MatrixXd Coefficient::jacobian_x(double t, const VectorXd& x, const VectorXd& y,
                                 int n) const {
  (void)t;
  (void)y;
  switch (family_) {
    case CoeffFamily::Constant:
      return MatrixXd::Zero(rows_, n);
    case CoeffFamily::Affine:
      if (cols_ > 1)
        throw NumericalError("jacobian_x: matrix-valued coefficient");
      return cx_.size() > 0 ? MatrixXd(cx_) : MatrixXd::Zero(rows_, n);
    case CoeffFamily::Quadratic: {
      MatrixXd j(rows_, 1);
      j.col(0) = 2.0 * qa_ * x[0] + qb_;
      return j;
    }
    case CoeffFamily::ExpAffine: {
      MatrixXd j(rows_, 1);
      for (int i = 0; i < rows_; ++i)
        j(i, 0) = scale_[i] * eta_[i] * std::exp(eta_[i] * x[0]);
      return j;
    }
    case CoeffFamily::Tabulated: {
      // Central finite difference on the table scale.
      double hstep = (knots_[knots_.size() - 1] - knots_[0]) /
                     (200.0 * static_cast<double>(knots_.size()));
      VectorXd xp = x, xm = x;
      xp[0] += hstep;
      xm[0] -= hstep;
      MatrixXd j(rows_, 1);
      j.col(0) = (eval(t, xp, y) - eval(t, xm, y)) / (2.0 * hstep);
      return j;
    }
  }
  return MatrixXd::Zero(rows_, n);
}

MatrixXd Coefficient::hessian_x(double t, const VectorXd& x, const VectorXd& y,
                                int n, int row) const {
  (void)t;
  (void)y;
  switch (family_) {
    case CoeffFamily::Constant:
    case CoeffFamily::Affine:
      return MatrixXd::Zero(n, n);
    case CoeffFamily::Quadratic: {
      MatrixXd h = MatrixXd::Zero(n, n);
      h(0, 0) = 2.0 * qa_[row];
      return h;
    }
    case CoeffFamily::ExpAffine: {
      MatrixXd h = MatrixXd::Zero(n, n);
      h(0, 0) = scale_[row] * eta_[row] * eta_[row] * std::exp(eta_[row] * x[0]);
      return h;
    }
    case CoeffFamily::Tabulated: {
      double hstep = (knots_[knots_.size() - 1] - knots_[0]) /
                     (100.0 * static_cast<double>(knots_.size()));
      VectorXd xp = x, xm = x;
      xp[0] += hstep;
      xm[0] -= hstep;
      double f0 = eval(t, x, y)(row, 0);
      double fp = eval(t, xp, y)(row, 0);
      double fm = eval(t, xm, y)(row, 0);
      MatrixXd h = MatrixXd::Zero(n, n);
      h(0, 0) = (fp - 2.0 * f0 + fm) / (hstep * hstep);
      return h;
    }
  }
  return MatrixXd::Zero(n, n);
}

}  // namespace sepfilter
