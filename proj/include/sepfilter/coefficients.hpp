#pragma once

#include <string>

#include "sepfilter/linalg_util.hpp"

namespace sepfilter {

/// Closed registry of coefficient families. Keeping the families parametric
/// (instead of accepting arbitrary callables) is what makes structural
/// classification of a model decidable.
enum class CoeffFamily {
  Constant,    // f(t,x,y) = c0
  Affine,      // vectors: c0 + cx*x + cy*y;  matrices: c0 + x[0]*cx
  Quadratic,   // scalar x: f_i = qa_i x^2 + qb_i x + qc_i
  ExpAffine,   // scalar x: f_i = scale_i * exp(eta_i x)
  Tabulated,   // scalar x: per-row linear interpolation on a knot table
};

enum class StructureTag { Constant, Linear, Quadratic, Exponential, General };

std::string to_string(CoeffFamily f);
std::string to_string(StructureTag t);

/// One drift or diffusion coefficient map (t, x, y) -> rows x cols.
/// Vector-valued maps have cols == 1.
class Coefficient {
 public:
  Coefficient() = default;

  static Coefficient constant(const MatrixXd& value);
  // Vector affine: value = c0 + cx*x + cy*y (cy may be empty).
  static Coefficient affine(const VectorXd& c0, const MatrixXd& cx,
                            const MatrixXd& cy = MatrixXd());
  // Matrix affine in the first hidden coordinate: value = c0 + x[0]*cx.
  static Coefficient affine_matrix(const MatrixXd& c0, const MatrixXd& cx);
  static Coefficient quadratic(const VectorXd& qa, const VectorXd& qb,
                               const VectorXd& qc);
  static Coefficient exp_affine(const VectorXd& eta, const VectorXd& scale);
  static Coefficient tabulated(const VectorXd& knots, const MatrixXd& values);

  CoeffFamily family() const { return family_; }
  StructureTag structure_tag() const;
  int rows() const { return rows_; }
  int cols() const { return cols_; }
  bool is_constant() const { return family_ == CoeffFamily::Constant; }

  /// True when the map cannot depend on x by construction.
  bool x_free() const;

  /// True when the map cannot depend on the observation level.
  bool y_free() const;

  MatrixXd eval(double t, const VectorXd& x, const VectorXd& y) const;

  /// d(value)/dx at (t,x,y); defined for vector-valued maps, rows x n.
  MatrixXd jacobian_x(double t, const VectorXd& x, const VectorXd& y,
                      int n) const;

  /// Hessian in x of component `row` (scalar-x families only), n x n.
  MatrixXd hessian_x(double t, const VectorXd& x, const VectorXd& y, int n,
                     int row) const;

  // Family parameters (read-only access for classification and hat formulas).
  const MatrixXd& c0() const { return c0_; }
  const MatrixXd& cx() const { return cx_; }
  const MatrixXd& cy() const { return cy_; }
  const VectorXd& qa() const { return qa_; }
  const VectorXd& qb() const { return qb_; }
  const VectorXd& qc() const { return qc_; }
  const VectorXd& eta() const { return eta_; }
  const VectorXd& scale() const { return scale_; }
  const VectorXd& knots() const { return knots_; }
  const MatrixXd& table() const { return table_; }

 private:
  CoeffFamily family_ = CoeffFamily::Constant;
  int rows_ = 0;
  int cols_ = 1;
  MatrixXd c0_, cx_, cy_;
  VectorXd qa_, qb_, qc_;
  VectorXd eta_, scale_;
  VectorXd knots_;
  MatrixXd table_;
};

}  // namespace sepfilter
