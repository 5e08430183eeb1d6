#pragma once

#include <Eigen/Dense>
#include <string>

#include "tendonforge/types.hpp"

namespace tendonforge {

// Cost norms applied per residual component and summed.
enum class NormKind { quadratic, cosh_norm, smooth_abs };

NormKind norm_from_name(const std::string& name);  // quadratic|cosh|smooth_abs
const char* norm_name(NormKind kind);

struct NormEval {
  double value = 0.0;
  double d1 = 0.0;  // d value / d r
  double d2 = 0.0;  // d^2 value / d r^2
};

// Scalar evaluation with derivatives. p is ignored for quadratic and must be
// positive for the others.
NormEval norm_eval(NormKind kind, double r, double p);

// Sum of per-component values.
double norm_value(NormKind kind, const Eigen::VectorXd& r, double p);

inline double norm_quadratic(const Eigen::VectorXd& r) {
  return norm_value(NormKind::quadratic, r, 0.0);
}
inline double norm_cosh(const Eigen::VectorXd& r, double p) {
  return norm_value(NormKind::cosh_norm, r, p);
}
inline double norm_smooth_abs(const Eigen::VectorXd& r, double p) {
  return norm_value(NormKind::smooth_abs, r, p);
}

}  // namespace tendonforge
