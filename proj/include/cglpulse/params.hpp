#pragma once

#include <array>

namespace cgl {

// Coefficients of the general equation
//   u_t = (m + iαμ₀)u'' − (m + iαμ₁)u + (1 + iαμ₂)|u|²u − (1 + iαμ₃)|u|⁴u.
// The simplified equation is μ = (0, 0, 1, 0).
struct Mu {
  double m0 = 0.0, m1 = 0.0, m2 = 1.0, m3 = 0.0;

  static Mu simplified() { return {}; }
  bool is_simplified() const { return m0 == 0.0 && m1 == 0.0 && m2 == 1.0 && m3 == 0.0; }
  std::array<double, 4> as_array() const { return {m0, m1, m2, m3}; }
};

enum class Convert { NuToL, LToNu };

// ν = 4e^{−4L}; throws domain error outside ν ∈ (0,1), L > ln(4)/4.
double nu_L_convert(double value, Convert direction);
inline double nu_from_L(double L) { return nu_L_convert(L, Convert::LToNu); }
inline double L_from_nu(double nu) { return nu_L_convert(nu, Convert::NuToL); }

inline double m_from_nu(double nu) { return 3.0 * (1.0 - nu) / 16.0; }

struct ModelParams {
  double nu = 0.0;
  double L = 0.0;
  double m = 0.0;
  double eps = 0.0;  // α = √ε
  double tau = 0.0;  // ω = √ε τ
  double y = 0.0;
  double nu_flat = 0.0;  // ν♭ = ν e^{−4y}
  double kappa = 0.0;    // (ν − ν♭)/(1 − ν♭)
  Mu mu;

  static ModelParams from_nu(double nu, double y = 0.0, Mu mu = {});
  static ModelParams from_L(double L, double y = 0.0, Mu mu = {});

  double alpha() const;
  double omega() const;
  double L_flat() const { return L + y; }
  double m_flat() const { return m_from_nu(nu_flat); }
  // Parameters of the flat profile: ν → ν♭, y → 0.
  ModelParams flat() const;

  // Throws domain error if any invariant fails.
  void validate() const;
};

}  // namespace cgl
