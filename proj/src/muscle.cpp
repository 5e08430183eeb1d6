#include "tendonforge/muscle.hpp"

#include <algorithm>
#include <cmath>

namespace tendonforge {

namespace {
// Hill-curve shape constants. kHillK sets the shortening-side curvature.
// kLengthenC makes the lengthening branch meet the shortening branch at w=0
// with matching value (1) and slope (kFvSlope0), keeping the curve C1.
constexpr double kHillK = 0.25;
constexpr double kFvSlope0 = 2.0 * (1.0 + 1.0 / kHillK);  // dFV/dw at w = 0
constexpr double kFvMax = 1.35;
constexpr double kLengthenC = (kFvMax - 1.0) / kFvSlope0;
constexpr double kPassiveStiffness = 1.0;
}  // namespace

ActivationMode mode_from_name(const std::string& name) {
  if (name == "switched") return ActivationMode::switched;
  if (name == "smoothed") return ActivationMode::smoothed;
  throw InputError("unknown activation mode: " + name);
}

const char* mode_name(ActivationMode mode) {
  return mode == ActivationMode::switched ? "switched" : "smoothed";
}

void validate(const MuscleParams& p) {
  if (!(p.f0 > 0.0)) throw InputError("muscle f0 must be positive");
  if (!(p.v_max > 0.0)) throw InputError("muscle v_max must be positive");
  if (!(p.tau_a > 0.0)) throw InputError("muscle tau_a must be positive");
  if (!(p.tau_d > 0.0)) throw InputError("muscle tau_d must be positive");
  if (!(p.tau_smooth >= 0.0)) throw InputError("muscle tau_smooth must be >= 0");
  if (!(p.l_opt > 0.0)) throw InputError("muscle l_opt must be positive");
}

double fl_curve(double L) {
  double b = std::max(0.0, 1.0 - 4.0 * (L - 1.0) * (L - 1.0));
  return b * b;
}

double fl_curve_dL(double L) {
  double b = std::max(0.0, 1.0 - 4.0 * (L - 1.0) * (L - 1.0));
  return 2.0 * b * (-8.0 * (L - 1.0));
}

double fv_curve(double w) {
  if (w <= -1.0) return 0.0;
  if (w <= 0.0) {
    double g = (1.0 + w) / (1.0 - w / kHillK);
    return g * g;
  }
  return (kFvMax * w + kLengthenC) / (w + kLengthenC);
}

double fv_curve_dw(double w) {
  if (w <= -1.0) return 0.0;
  if (w <= 0.0) {
    double denom = 1.0 - w / kHillK;
    double g = (1.0 + w) / denom;
    double dg = (1.0 + 1.0 / kHillK) / (denom * denom);
    return 2.0 * g * dg;
  }
  double denom = w + kLengthenC;
  return (kFvMax - 1.0) * kLengthenC / (denom * denom);
}

double fp_curve(double L) {
  double s = std::max(0.0, L - 1.0);
  return 0.5 * kPassiveStiffness * s * s;
}

double fp_curve_dL(double L) {
  return kPassiveStiffness * std::max(0.0, L - 1.0);
}

double flv(const MuscleParams& p, double L, double V, double a) {
  return fl_curve(L) * fv_curve(V / p.v_max) * a + fp_curve(L);
}

FlvGrad flv_with_grad(const MuscleParams& p, double L, double V, double a) {
  double fl = fl_curve(L), fv = fv_curve(V / p.v_max);
  FlvGrad g;
  g.value = fl * fv * a + fp_curve(L);
  g.dL = fl_curve_dL(L) * fv * a + fp_curve_dL(L);
  g.dV = fl * fv_curve_dw(V / p.v_max) / p.v_max * a;
  g.da = fl * fv;
  return g;
}

double actuator_force(const MuscleParams& p, const MuscleState& s) {
  return -flv(p, s.L, s.V, s.a) * p.f0;
}

double estimate_f0(double scale, double actuator_acc0) {
  if (!(actuator_acc0 > 0.0))
    throw InputError("non-positive unit-force acceleration");
  return scale / actuator_acc0;
}

double tau_switched(double u, double a, const MuscleParams& p) {
  double m = 0.5 + 1.5 * a;
  return u > a ? p.tau_a * m : p.tau_d / m;
}

double logistic(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  double e = std::exp(z);
  return e / (1.0 + e);
}

double tau_smoothed(double u, double a, const MuscleParams& p) {
  double x = u - a;
  if (p.tau_smooth <= 0.0) return x > 0.0 ? p.tau_a : p.tau_d;
  double s = logistic(x / p.tau_smooth + 0.5);
  return p.tau_d + (p.tau_a - p.tau_d) * s;
}

double tau_smoothed_dx(double u, double a, const MuscleParams& p) {
  if (!(p.tau_smooth > 0.0))
    throw InputError("tau_smoothed derivative needs tau_smooth > 0");
  double s = logistic((u - a) / p.tau_smooth + 0.5);
  return (p.tau_a - p.tau_d) * s * (1.0 - s) / p.tau_smooth;
}

double step_activation(double u, double a, double dt, const MuscleParams& p,
                       ActivationMode mode) {
  double tau = mode == ActivationMode::smoothed ? tau_smoothed(u, a, p)
                                                : tau_switched(u, a, p);
  return std::clamp(a + dt * (u - a) / tau, 0.0, 1.0);
}

ActivationStep step_activation_with_grad(double u, double a, double dt,
                                         const MuscleParams& p,
                                         ActivationMode mode) {
  double tau, dtau_du, dtau_da;
  if (mode == ActivationMode::smoothed) {
    tau = tau_smoothed(u, a, p);
    double dx = tau_smoothed_dx(u, a, p);
    dtau_du = dx;
    dtau_da = -dx;
  } else {
    double m = 0.5 + 1.5 * a;
    if (u > a) {
      tau = p.tau_a * m;
      dtau_du = 0.0;
      dtau_da = 1.5 * p.tau_a;
    } else {
      tau = p.tau_d / m;
      dtau_du = 0.0;
      dtau_da = -1.5 * p.tau_d / (m * m);
    }
  }
  double raw = a + dt * (u - a) / tau;
  ActivationStep out;
  out.a_next = std::clamp(raw, 0.0, 1.0);
  if (raw < 0.0 || raw > 1.0) return out;  // clamp active: flat
  double inv = 1.0 / tau, r = (u - a) * inv * inv;
  out.da_da = 1.0 + dt * (-inv - r * dtau_da);
  out.da_du = dt * (inv - r * dtau_du);
  return out;
}

}  // namespace tendonforge
