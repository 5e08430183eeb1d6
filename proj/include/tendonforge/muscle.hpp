#pragma once

#include <string>

#include "tendonforge/types.hpp"

namespace tendonforge {

enum class ActivationMode { switched, smoothed };

ActivationMode mode_from_name(const std::string& name);  // switched|smoothed
const char* mode_name(ActivationMode mode);

struct MuscleParams {
  std::string name;
  double f0 = 1.0;          // peak active force (N)
  double l_opt = 1.0;       // normalized-length anchor of the FL peak
  double v_max = 10.0;      // max shortening speed (lengths/s)
  double tau_a = 0.01;      // activation time constant (s)
  double tau_d = 0.04;      // deactivation time constant (s)
  double tau_smooth = 0.01; // sigmoid width for the smoothed time constant (s)
};

// Throws InputError unless f0 > 0, v_max > 0, tau_a > 0, tau_d > 0,
// tau_smooth >= 0.
void validate(const MuscleParams& params);

struct MuscleState {
  double a = 0.0;  // activation, kept in [0,1]
  double L = 1.0;  // normalized length
  double V = 0.0;  // normalized velocity (lengths/s)
};

// Force-length curve: smooth bump, peak 1 at L = 1, zero outside [0.5, 1.5].
double fl_curve(double L);
double fl_curve_dL(double L);

// Force-velocity curve over w = V / v_max: 0 at w = -1, 1 at w = 0,
// saturates at 1.35 for large lengthening; C1 everywhere.
double fv_curve(double w);
double fv_curve_dw(double w);

// Passive force: 0 for L <= 1, quadratic 0.5*(L-1)^2 above.
double fp_curve(double L);
double fp_curve_dL(double L);

// Scaled muscle force FL(L)*FV(V/v_max)*a + FP(L). Nonnegative.
double flv(const MuscleParams& params, double L, double V, double a);

struct FlvGrad {
  double value = 0.0;
  double dL = 0.0, dV = 0.0, da = 0.0;
};
FlvGrad flv_with_grad(const MuscleParams& params, double L, double V, double a);

// Actuator force in newtons: -flv * f0. Negative values pull.
double actuator_force(const MuscleParams& params, const MuscleState& state);

// Peak-force calibration: f0 = scale / actuator_acc0. Throws InputError on
// actuator_acc0 <= 0 ("non-positive unit-force acceleration").
double estimate_f0(double scale, double actuator_acc0);

// Hard-switched activation time constant:
// tau_a*(0.5 + 1.5a) when u > a, else tau_d/(0.5 + 1.5a).
double tau_switched(double u, double a, const MuscleParams& params);

// Sigmoid-blended time constant over x = u - a:
// tau_d + (tau_a - tau_d) * logistic(x/tau_smooth + 0.5).
// tau_smooth = 0 degrades to the hard limit (tau_a if x > 0 else tau_d).
double tau_smoothed(double u, double a, const MuscleParams& params);

// d(tau_smoothed)/dx at x = u - a. Requires tau_smooth > 0.
double tau_smoothed_dx(double u, double a, const MuscleParams& params);

// One Euler step of da/dt = (u - a)/tau(u, a), clamped to [0,1].
double step_activation(double u, double a, double dt, const MuscleParams& params,
                       ActivationMode mode);

struct ActivationStep {
  double a_next = 0.0;
  double da_da = 0.0;  // d a_next / d a, zero when the clamp is active
  double da_du = 0.0;  // d a_next / d u, zero when the clamp is active
};

// step_activation plus its branchwise partial derivatives. In switched mode
// the derivatives jump at u = a; the smoothed mode is differentiable.
ActivationStep step_activation_with_grad(double u, double a, double dt,
                                         const MuscleParams& params,
                                         ActivationMode mode);

// Numerically stable logistic function 1/(1 + exp(-z)).
double logistic(double z);

}  // namespace tendonforge
