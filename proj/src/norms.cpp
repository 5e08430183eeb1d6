#include "tendonforge/norms.hpp"

#include <cmath>

namespace tendonforge {

NormKind norm_from_name(const std::string& name) {
  if (name == "quadratic") return NormKind::quadratic;
  if (name == "cosh") return NormKind::cosh_norm;
  if (name == "smooth_abs") return NormKind::smooth_abs;
  throw InputError("unknown norm: " + name);
}

const char* norm_name(NormKind kind) {
  switch (kind) {
    case NormKind::quadratic: return "quadratic";
    case NormKind::cosh_norm: return "cosh";
    default: return "smooth_abs";
  }
}

NormEval norm_eval(NormKind kind, double r, double p) {
  NormEval e;
  switch (kind) {
    case NormKind::quadratic:
      e.value = 0.5 * r * r;
      e.d1 = r;
      e.d2 = 1.0;
      return e;
    case NormKind::cosh_norm: {
      if (!(p > 0.0)) throw InputError("cosh norm requires p > 0");
      e.value = p * p * (std::cosh(r / p) - 1.0);
      e.d1 = p * std::sinh(r / p);
      e.d2 = std::cosh(r / p);
      return e;
    }
    default: {
      if (!(p > 0.0)) throw InputError("smooth_abs norm requires p > 0");
      double s = std::sqrt(r * r + p * p);
      e.value = s - p;
      e.d1 = r / s;
      e.d2 = p * p / (s * s * s);
      return e;
    }
  }
}

double norm_value(NormKind kind, const Eigen::VectorXd& r, double p) {
  double total = 0.0;
  for (int i = 0; i < r.size(); ++i) total += norm_eval(kind, r[i], p).value;
  return total;
}

}  // namespace tendonforge
