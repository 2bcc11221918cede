#pragma once

#include <array>
#include <complex>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "cglpulse/ansatz.hpp"
#include "cglpulse/grid.hpp"
#include "cglpulse/params.hpp"

namespace cgl {

using cplx = std::complex<double>;

// Derivative of the stationary map F(u) = iωu − [(m + iαμ₀)u'' − (m + iαμ₁)u
// + (1 + iαμ₂)|u|²u − (1 + iαμ₃)|u|⁴u] acting on real pairs (Re δu, Im δu).
// Perturbations evolve by δu_t = −F'(u)δu in the frame rotating at ω.
struct FJacobian {
  SpMat J11, J12, J21, J22;
};
FJacobian jacobian_F(const Vec& u1, const Vec& u2, double alpha, double omega, double m, const Mu& mu, const Grid& g);

// 𝒟 = F'(ξ + i√εη)/(1 − κ) = 𝒜♭ + √κℬ + κ𝒞 on (Re, Im) pairs, with
// 𝒜♭ = diag(A♭, B♭), ℬ off-diagonal and 𝒞 diagonal multiplications. In
// general mode ℬ also carries a multiple of −∂² from μ₀.
struct LinearizationBlocks {
  const Grid* grid = nullptr;
  ModelParams params;  // eps, tau of the pulse
  double kappa = 0.0;
  SpMat A_flat, B_flat;
  Vec B12, B21, C11, C22;          // zero when κ = 0
  double B12_lap = 0.0, B21_lap = 0.0;  // coefficients of −∂² in ℬ₁₂, ℬ₂₁
  SpMat D11, D12, D21, D22;

  std::array<Vec, 2> apply(const Vec& v1, const Vec& v2) const;
  // 2·half × 2·half block matrix on one parity sector, (v₁ | v₂) ordering.
  SpMat sector(Parity par) const;
  // max entry of |𝒟 − 𝒜♭ − √κℬ − κ𝒞|
  double decomposition_defect() const;
};
LinearizationBlocks assemble_D(const AnsatzState& pulse, const Grid& g);

// The symmetry vectors iu = (−√εη, ξ) and u' = (ξ', √εη').
std::array<Vec, 2> phase_mode(const PulseFields& U);
std::array<Vec, 2> translation_mode(const PulseFields& U, const Grid& g);

struct StabilityOptions {
  double shift = std::numeric_limits<double>::quiet_NaN();  // default −μ₂♭/10
  double critical_tol = 1e-9;
  double cluster_ratio = 0.1;  // |λ₃| ≤ ratio·|λ₄|
  int even_block = 4;
  int odd_block = 2;
  bool throw_on_gap = true;
};

struct StabilityReport {
  ModelParams params;
  std::vector<cplx> small;  // the cluster around 0, by modulus
  std::vector<cplx> rest;   // the other computed eigenvalues, by modulus
  double phase_residual = 0.0;        // ‖𝒟 iu‖ / ‖iu‖
  double translation_residual = 0.0;  // ‖𝒟 u'‖ / ‖u'‖
  // 𝒟w = M11 w + M21 t on span{w, t} = P(s♭, 0), P(iu)
  double M11 = 0.0;
  double M21 = 0.0;
  double M21_first_order = std::numeric_limits<double>::quiet_NaN();  // M21/√κ
  double phase_in_subspace = 0.0;  // distance of iu from the computed subspace, relative
  double spectrum_floor = 0.0;     // min Re over `rest`
  double cluster_ratio = 0.0;      // max|small| / min|rest|
  bool cluster_ok = false;
  std::string classification;  // unstable, critical, stable
  double lambda_flat = 0.0;
  double prediction = 0.0;  // −3ν♭/2 + επ²/4(L+y)²
  double shift = 0.0;
  int iterations = 0;
};

// Shift-invert subspace iteration on each parity sector; throws numeric
// error "spectral gap" when the cluster of three is not separated.
StabilityReport small_spectrum_D(const LinearizationBlocks& D, const AnsatzState& pulse,
                                 const StabilityOptions& opt = {});

// Pulse (certified when possible) plus report, on the default pulse grid.
struct StabilityRun {
  AnsatzState pulse;
  StabilityReport report;
};
StabilityRun stability_at(const ModelParams& p, const Grid& g, const StabilityOptions& opt = {},
                          const std::optional<PulseFields>& seed = std::nullopt, bool certify = false);

// a(L) = ((−θ − μ₁ + μ₂r² − μ₃r⁴)q − rq² + 2r³q² + μ₀q'', σ) at ν(L).
double a_functional(double L, const Mu& mu, const Grid& g);
// Centered difference of a_functional.
double da_dL_differenced(double L, const Mu& mu, const Grid& g, double dL = 0.02);
inline double da_dL_formula(double L) { return 3.0 * M_PI * M_PI / (32.0 * L * L); }

struct M11Expansion {
  double M11_measured = 0.0;
  double M11_order0 = 0.0;  // λ♭
  double M11_order2 = 0.0;  // ε |s♭|⁻² ∂a/∂L, differenced
  double M11_order2_formula = 0.0;
  double da_dL = 0.0;
  double da_dL_formula = 0.0;
  double s_norm2 = 0.0;     // |s♭|²
  double prediction = 0.0;  // −3ν♭/2 + επ²/4(L+y)²
};
M11Expansion m11_expansion_check(const AnsatzState& pulse, const StabilityReport& report, const Grid& g);

struct AlphaScanPoint {
  double y, eps, M11;
};
struct AlphaCResult {
  double L = 0.0, nu = 0.0;
  bool found = false;  // false: no sign change on [0, L^p], a valid outcome when χ ≤ 0
  double y_c = 0.0;
  double alpha_c_measured = 0.0;
  double alpha_c_formula = 0.0;  // (√ν/2)(1 − π²/48L²)
  double normalized_gap = 0.0;   // (1 − 2α_c/√ν)·48L²/π²
  double yc_ratio = 0.0;         // y_c / ((1/2) ln L)
  double M21_at_c = 0.0;
  double M21_first_order_at_c = 0.0;
  double theta1_flat = 0.0;  // θ₁ at L♭ = L + y_c
  int sign_changes = 0;
  std::vector<AlphaScanPoint> scan;
};
struct AlphaCOptions {
  double p_exponent = 1.0;
  double scan_step = 0.25;
  double y_tol = 1e-3;
  double h = 0.02;
};
AlphaCResult find_alpha_c(double L, const Mu& mu, const AlphaCOptions& opt = {});
inline double alpha_c_formula(double L) {
  return 0.5 * std::sqrt(nu_from_L(L)) * (1.0 - M_PI * M_PI / (48.0 * L * L));
}

struct ChiResult {
  double chi = 0.0;
  double denominator = 0.0;  // (2μ₂ − 15μ₃/8)²
  // predicted ν_c/ν
  double nu_c_ratio(double L) const { return 2.0 * chi / (3.0 * L * L); }
};
// χ(μ) = [μ₂ − 9μ₃/8][π²μ₂/4 − 3π²μ₃/16 + 9μ₃/16] / (2μ₂ − 15μ₃/8)².
// Throws domain error "criterion undefined" when 2μ₂ = 15μ₃/8.
ChiResult chi_criterion(const Mu& mu);

// Coordinates on {w, iu, u'} under the linear flow:
//   δ₁ = e^{−at}δ₁(0), δ₂ = δ₂(0) + b(e^{−at} − 1)/a δ₁(0), δ₃ = δ₃(0),
// all times e^{iωt}; a = M11, b = M21. Pass ω = 0 for the rotating frame.
std::array<cplx, 3> linear_perturbation_flow(double a, double b, double omega, const std::array<cplx, 3>& d0, double t);
// lim δ₂ − δ₂(0) for a > 0
inline cplx asymptotic_phase_shift(double a, double b, cplx d1) { return -(b / a) * d1; }

}  // namespace cgl
