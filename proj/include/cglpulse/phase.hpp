#pragma once

#include <limits>

#include "cglpulse/grid.hpp"
#include "cglpulse/params.hpp"

namespace cgl {

// Imaginary part at first order in α: B q = f with
//   f = −θr − μ₁r + μ₂r³ − μ₃r⁵ + μ₀r'',   (q, r) = 0,   φ = q/r.
// All profile quantities are taken at params.nu.
struct PhaseSolution {
  ModelParams params;
  Mu mu;
  double theta = 0.0;         // θ after absorbing the bordered multiplier
  double theta_defect = 0.0;  // multiplier of r; the discrete compatibility gap
  Vec q;
  double residual = 0.0;      // ‖Bq − f(θ)‖∞
  // φ, φ', φ'' are reported where |x| ≤ L + 10 and R ≥ e^{−20}R(0); NaN elsewhere.
  double mask_halfwidth = 0.0;
  Vec phi, phi_prime, phi_second;
  double theta1 = std::numeric_limits<double>::quiet_NaN();
  Vec q1;
};

// θ making f orthogonal to r (grid quadrature).
double solve_theta(const ModelParams& p, const Grid& g, const Mu& mu);

// f(θ) on the grid.
Vec phase_rhs(const ModelParams& p, const Grid& g, double theta, const Mu& mu);

// Bordered even-sector solve. Throws consistency error when θ is incompatible
// (the multiplier of r exceeds 1e−6 relative to |θ| + 1).
PhaseSolution solve_q(const ModelParams& p, const Grid& g, double theta, const Mu& mu);

// m φ'(x) = (1/R(x)) ∫_x^∞ r f dy, integrated over the decaying tail.
double phi_prime_quadrature(const ModelParams& p, double theta, const Mu& mu, double x);
// m φ'' = −r f / R − (R'/R) m φ'.
double phi_second_quadrature(const ModelParams& p, double theta, const Mu& mu, double x);

struct Theta1Q1 {
  double theta1;
  Vec q1;
  double defect;  // bordered multiplier beyond the solvability value of θ₁
};
// Differentiates B q = f along L at fixed x. Constraint (q₁, r) = −(q, σ).
Theta1Q1 solve_theta1_q1(const Grid& g, PhaseSolution& phase);

// θ, q, the masked φ fields, and θ₁, q₁ in one call.
PhaseSolution solve_phase(const ModelParams& p, const Grid& g, const Mu& mu);

// Limits of φ' far from the pulse: −2μ₂ + 3μ₃/2.
inline double phi_prime_limit(const Mu& mu) { return -2.0 * mu.m2 + 1.5 * mu.m3; }

// Closed-form log integrals used by the L-expansion of the stability indicator.
struct LogIntegrals {
  double dilog;        // ∫₀¹ ln(1−y)/y dy = −π²/6
  double log_squared;  // 2∫ e^{2x} ln²(1+e^{−2x}) dx = π²/3
  double log_ratio;    // 2∫ e^{2x} ln(1+e^{−2x})/(1+e^{2x}) dx = π²/6
  double log_ratio2;   // 2∫ e^{2x} ln(1+e^{−2x})/(1+e^{2x})² dx = 1
};
LogIntegrals log_integrals();

}  // namespace cgl
