#pragma once

#include <functional>

#include "sepfilter/filters_state.hpp"

namespace sepfilter {

/// Investment strategy: fraction of wealth per tradable asset. Feedback
/// strategies see only (t, filter state, y), which keeps them adapted to the
/// observation filtration by construction.
class Strategy {
 public:
  using Feedback =
      std::function<VectorXd(double, const FilterState&, const VectorXd&)>;

  static Strategy constant(const VectorXd& h) {
    Strategy s;
    s.constant_ = h;
    return s;
  }

  /// h = h0 + Hm * m (Gaussian filters only).
  static Strategy linear_in_mean(const VectorXd& h0, const MatrixXd& Hm) {
    Strategy s;
    s.h0_ = h0;
    s.Hm_ = Hm;
    s.kind_ = Kind::LinearInMean;
    return s;
  }

  static Strategy feedback(Feedback fn, int m1) {
    Strategy s;
    s.feedback_ = std::move(fn);
    s.m1_ = m1;
    s.kind_ = Kind::Custom;
    return s;
  }

  bool needs_filter() const { return kind_ != Kind::Constant; }

  VectorXd eval(double t, const FilterState& state, const VectorXd& y) const {
    switch (kind_) {
      case Kind::Constant:
        return constant_;
      case Kind::LinearInMean: {
        if (!state.gauss)
          throw NumericalError("linear_in_mean strategy needs a Gaussian filter");
        return h0_ + Hm_ * state.gauss->m;
      }
      case Kind::Custom:
        return feedback_(t, state, y);
    }
    return constant_;
  }

  VectorXd eval_constant() const {
    if (kind_ != Kind::Constant)
      throw NumericalError("strategy is not constant");
    return constant_;
  }

 private:
  enum class Kind { Constant, LinearInMean, Custom };
  Kind kind_ = Kind::Constant;
  VectorXd constant_;
  VectorXd h0_;
  MatrixXd Hm_;
  Feedback feedback_;
  int m1_ = 0;
};

}  // namespace sepfilter
