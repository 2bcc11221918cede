#pragma once

#include <Eigen/Dense>

#include "cglpulse/params.hpp"

namespace cgl {

// Everything below is a closed form of the real pulse of
//   −m r'' + m r − r³ + r⁵ = 0,   R = r² = (3/4)(1−ν)/(1 + √ν cosh 2x).
// L-derivatives are taken at fixed x along ν = 4e^{−4L}.
struct ProfilePoint {
  double R, r, rp, rpp;  // r' and r'' from ln r, no √ differentiation
  double sigma;          // ∂r/∂L
  double sigma2;         // ∂²r/∂L²
  double S;              // ∂R/∂L = 2rσ
  double V, W;           // m − 3r² + 5r⁴, m − r² + r⁴
  double rho;            // 4ν(r⁵ − r³)/(1−ν), so Aσ = ρ
  double rho2;           // Aσ₂ + (20r³ − 6r)σ² = ρ₂
};

class ScalarProfile {
public:
  explicit ScalarProfile(double nu);

  double nu() const { return nu_; }
  double m() const { return m_; }
  ProfilePoint at(double x) const;

  double R(double x) const;
  double r(double x) const;
  double R0() const { return 0.75 * (1.0 - sq_); }

  // Samples of one field over arbitrary nodes.
  enum class Field { R, r, rp, rpp, sigma, sigma2, S, V, W, rho, rho2 };
  Eigen::VectorXd sample(const Eigen::VectorXd& x, Field f) const;

private:
  double nu_, sq_, m_;
};

ProfilePoint eval_profile(const ModelParams& p, double x);

// Front R̃(x) = (3/4)/(1 + e^{2x}); |R(x+L) − R̃(x)| ≤ ν e^{−2x}.
double R_front(double x);

inline double Phi(double m, double r) {
  const double R = r * r;
  return R * (m - R / 2.0 + R * R / 3.0);
}
inline double Psi(double m, double R) { return m - R / 2.0 + R * R / 3.0; }

// m r'² − Φ(r); vanishes identically.
double energy_identity_residual(const ModelParams& p, double x);
// −m r'' + m r − r³ + r⁵ with the analytic r''.
double ode_residual(const ModelParams& p, double x);

struct KinkQuantities {
  double k;            // wave number, sign of α
  double omega_plus;   // ω̃ with + root
  double omega_minus;  // ω̃ with − root
  double omega;        // ω = ω̃₊ + kc
  double rbar;         // √(ω̃₊/α), continuous at α = 0
  double c;            // front speed of r e^{ikx} rising from 0 to r̄
  double c_printed;    // √3(4α² − ν)/(1 + √(1 + 3(ν − 4α²))), lacks the √m factor
};

// Requires 4α² − ν < 1/3.
KinkQuantities kink_quantities(double nu, double alpha);

}  // namespace cgl
