#pragma once

#include <array>
#include <optional>
#include <string>

#include "cglpulse/certified_newton.hpp"
#include "cglpulse/grid.hpp"
#include "cglpulse/params.hpp"
#include "cglpulse/phase.hpp"
#include "cglpulse/schrodinger.hpp"

namespace cgl {

// Default mesh for pulse work: X = L + y + margin. The zero-extension closure
// errs by about m·r(X)/h², so the margin keeps r(X) below round-off.
Grid pulse_grid(const ModelParams& p, double h = 0.02, int fd_order = 8, double margin = 40.0);

// A stationary solution e^{i√ε τ t}(ξ + i√ε η) of the general equation solves
// G(ξ, η, τ, ε, ν) = 0 with
//   G₁ = −mξ'' + εμ₀η'' − ετη + mξ − εμ₁η − P(ξ − εμ₂η) + P²(ξ − εμ₃η)
//   G₂ = −mη'' − μ₀ξ'' + τξ + mη + μ₁ξ − P(η + μ₂ξ) + P²(η + μ₃ξ),  P = ξ² + εη².
struct PulseFields {
  Vec xi, eta;  // full-grid samples, even
  double tau = 0.0;
  double eps = 0.0;
};

struct GResidual {
  Vec G1, G2;
  double sup() const { return std::max(G1.cwiseAbs().maxCoeff(), G2.cwiseAbs().maxCoeff()); }
};

GResidual residual_G(const PulseFields& U, const ModelParams& p, const Grid& g);

// D_U G as 2 × 4 blocks: field columns are n×n, scalar columns are vectors.
struct JacobianG {
  SpMat J11, J12, J21, J22;
  Vec J13, J14, J23, J24;
  // action on a direction (δξ, δη, δτ, δε)
  GResidual apply(const PulseFields& d) const;
};
JacobianG jacobian_G(const PulseFields& U, const ModelParams& p, const Grid& g);

struct AnsatzCoefficients {
  double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
  std::array<double, 4> as_array() const { return {a0, a1, a2, a3}; }
};

// (G₁(r, q, θ, ε, ν), s) = κa₀ + εa₁ + ε²a₂ + ε³a₃ with every profile
// quantity at the flat parameter; s is the even ground state of A scaled as Πσ.
AnsatzCoefficients ansatz_coefficients(const ModelParams& flat, const Grid& g, const Vec& s,
                                       const PhaseSolution& phase);

// Smallest positive root of κa₀ + εa₁ + ε²a₂ + ε³a₃ (0 when κ = 0).
// Throws regime error when no positive root exists.
double eps_flat(const AnsatzCoefficients& a, double kappa);

// Everything the construction needs at ν♭, plus the ansatz U♭ itself.
struct FlatAnsatz {
  ModelParams params;  // the actual point (ν, y, κ)
  ModelParams flat;    // ν♭, L♭ = L + y, κ = 0
  SpectralResult specA;
  Vec r, s;  // r♭ and s♭ = Πσ♭
  PhaseSolution phase;
  AnsatzCoefficients a;
  double eps = 0.0;
  PulseFields U;  // (r♭, q♭, θ♭, ε♭)
};
FlatAnsatz build_flat_ansatz(const ModelParams& p, const Grid& g);

// G(U♭, ν) from the algebraic expansion in ε, using the profile equations
// instead of differencing; agrees with residual_G up to truncation error.
GResidual residual_G_reduced(const FlatAnsatz& fa, const Grid& g);

// The linear operator 𝒢 = D_U G(r♭, q♭, θ♭, 0, ν♭) on E₂ (ξ ⊥ s♭, η ⊥ r♭):
//   row 1:  A♭ξ + zε,   row 2:  wξ + B♭η + r♭τ + ẑε
// with w a multiplication (plus μ₀ times the Laplacian in general mode).
struct StructuredG {
  const Grid* grid = nullptr;
  JacobianG J;  // J12 = 0, J13 = 0 at ε = 0
  Vec r, s;
};
StructuredG structured_G(const FlatAnsatz& fa, const Grid& g);
// Triangular order: ε from the s-component of row 1, ξ on s⊥, τ from the
// r-component of row 2, η on r⊥.
PulseFields solve_structured_triangular(const StructuredG& G, const Vec& h1, const Vec& h2);
// One bordered sparse factorization of the same system.
PulseFields solve_structured_monolithic(const StructuredG& G, const Vec& h1, const Vec& h2);

// Norm on E₂: ‖U‖² = ‖ξ‖²_{H²} + (ω_η‖η‖_{H²})² + (ω_τ τ)² + (ω_ε ε)².
struct NormWeights {
  double xi = 1.0, eta = 1.0, tau = 1.0, eps = 1.0;
};

struct PulseOptions {
  bool require_certificate = true;
  double p_exponent = 1.0;      // y ≤ L^p
  double tol = 1e-13;           // chord step tolerance in the E₂ norm
  double residual_tol = 1e-10;  // final ‖G‖∞
  bool optimize_weights = true;
};

struct AnsatzState {
  ModelParams params;  // eps and tau of the converged pulse filled in
  FlatAnsatz flat;
  PulseFields U;
  double residual_norm = 0.0;  // ‖G(U, ν)‖∞
  bool certified = false;
  Certificate cert;
  NormWeights weights;
  double flat_residual = 0.0;  // ‖G(U♭, ν)‖∞
  double correction_norm = 0.0;  // ‖U − U♭‖ in the weighted norm
  double eps1 = 0.0, tau1 = 0.0;  // ε − ε♭, τ − θ♭
  std::string method;  // "certified" or "newton"
};

// Certified correction of U♭. Without require_certificate a failed hypothesis
// falls back to plain Newton and the state is marked uncertified.
AnsatzState solve_pulse(const ModelParams& p, const Grid& g, const PulseOptions& opt = {});

// Sector-bordered matrix of a Jacobian: unknowns (ξ, η) on the even sector,
// then τ, ε; the last two rows are (ξ, s) and (η, r).
SpMat assemble_bordered(const Grid& g, const JacobianG& J, const Vec& s, const Vec& r);

// Plain Newton on the same bordered system from a given start (no certificate).
AnsatzState newton_pulse(const ModelParams& p, const Grid& g, const FlatAnsatz& fa, const PulseFields& start,
                         double residual_tol = 1e-10, int max_iter = 50);

// Phase of the complex field, arctan(√ε η / ξ), unwrapped from x = 0.
Vec pulse_phase(const PulseFields& U);

}  // namespace cgl
