#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "cglpulse/grid.hpp"

namespace cgl {

// Newton–Kantorovich in the chord form: with A = Df(x₀), z₀ = f(x₀) and
// M ≥ sup_{|ξ|≤ρ} ‖A⁻¹D²f(x₀+ξ)‖, the map ξ ↦ ξ − A⁻¹f(x₀+ξ) contracts with
// ratio ≤ 1/2 on |ξ| ≤ aρ whenever ‖A⁻¹z₀‖ ≤ K.
struct CertifiedProblem {
  std::function<Vec(const Vec&)> f;
  std::function<Vec(const Vec&)> solve_A;  // A⁻¹ v
  std::function<double(const Vec&)> norm;  // the norm every constant is measured in
  double M = 0.0;
  double rho = 1.0;
};

struct Certificate {
  double rho = 0.0;
  double M = 0.0;
  double a = 0.0;   // min(1, 1/(2ρM))
  double K = 0.0;   // 3aρ/4
  double d0 = 0.0;  // ‖A⁻¹z₀‖
  bool hypothesis_ok = false;
  double bound1 = 0.0;  // 2d₀ ≥ ‖x − x₀‖
  double bound2 = 0.0;  // 2Md₀² ≥ ‖x − x₀ + A⁻¹z₀‖

  // filled when the iteration ran
  int iterations = 0;
  double max_ratio = 0.0;  // largest observed step ratio
  std::vector<double> steps;
  double dist = 0.0;         // ‖x − x₀‖
  double dist_newton = 0.0;  // ‖x − x₀ + A⁻¹z₀‖
  // Norms of differences are only resolved down to this floor (round-off of
  // the discrete H² norm); the a posteriori checks allow it as slack.
  double noise_floor = 0.0;
  bool bounds_hold = false;
};

struct CertifiedResult {
  std::optional<Vec> x;
  Certificate cert;
};

// Constants only; no iteration.
Certificate certificate_constants(double d0, double M, double rho);

// Returns no x when d₀ > K. Throws consistency error when an observed step
// ratio exceeds 1/2 or an iterate leaves |ξ| ≤ 2d₀, both meaning M was underestimated.
CertifiedResult certify_and_solve(const CertifiedProblem& prob, const Vec& x0, double tol = 1e-13,
                                  int max_iter = 200);

}  // namespace cgl
