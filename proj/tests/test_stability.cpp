#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

#include <Eigen/Eigenvalues>

#include "cglpulse/ansatz.hpp"
#include "cglpulse/errors.hpp"
#include "cglpulse/grid.hpp"
#include "cglpulse/stability.hpp"

using namespace cgl;

namespace {

Mu general(double m0, double m1, double m2, double m3) {
  Mu mu;
  mu.m0 = m0;
  mu.m1 = m1;
  mu.m2 = m2;
  mu.m3 = m3;
  return mu;
}

std::vector<cplx> dense_eigenvalues(const SpMat& M) {
  Eigen::EigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd(M), false);
  std::vector<cplx> out(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
  std::sort(out.begin(), out.end(), [](const cplx& a, const cplx& b) { return std::abs(a) < std::abs(b); });
  return out;
}

SpMat block_matrix(const FJacobian& J) {
  const Eigen::Index n = J.J11.rows();
  Eigen::MatrixXd M(2 * n, 2 * n);
  M << Eigen::MatrixXd(J.J11), Eigen::MatrixXd(J.J12), Eigen::MatrixXd(J.J21), Eigen::MatrixXd(J.J22);
  return M.sparseView();
}

}  // namespace

TEST_SUITE("stability") {

TEST_CASE("subspace iteration agrees with a dense eigensolve") {
  const ModelParams p = ModelParams::from_L(3.0, 1.0);
  const Grid g = pulse_grid(p, 0.1, 8, 20.0);
  const StabilityRun run = stability_at(p, g);
  const LinearizationBlocks D = assemble_D(run.pulse, g);
  const std::vector<cplx> even = dense_eigenvalues(D.sector(Parity::Even));
  const std::vector<cplx> odd = dense_eigenvalues(D.sector(Parity::Odd));
  // even sector: phase mode and M11; odd sector: translation mode
  CHECK(std::abs(even[0]) <= 1e-7);
  CHECK(std::abs(odd[0]) <= 1e-6);
  CHECK(std::abs(even[1].imag()) <= 1e-10);
  CHECK(run.report.M11 == doctest::Approx(even[1].real()).epsilon(1e-6));
  // the next eigenvalues bound the floor
  const double floor = std::min(even[2].real(), odd[1].real());
  CHECK(run.report.spectrum_floor == doctest::Approx(floor).epsilon(1e-6));
  CHECK(run.report.small.size() == 3);
  CHECK(run.report.cluster_ok);
}

TEST_CASE("decomposition of D is exact") {
  for (const Mu& mu : {Mu::simplified(), general(0.2, 0.1, 1.0, 0.4)}) {
    const ModelParams p = ModelParams::from_L(3.0, 0.75, mu);
    const Grid g = pulse_grid(p, 0.05, 8, 20.0);
    const AnsatzState pulse = solve_pulse(p, g);
    const LinearizationBlocks D = assemble_D(pulse, g);
    CHECK(D.decomposition_defect() <= 1e-12);
    CHECK(D.B12.cwiseAbs().maxCoeff() > 0.0);
    CHECK(D.C11.cwiseAbs().maxCoeff() > 0.0);
  }
}

TEST_CASE("off-diagonal coefficients against the derivative of F") {
  const ModelParams p = ModelParams::from_L(3.0, 0.5);
  const Grid g = pulse_grid(p, 0.05, 8, 20.0);
  const AnsatzState pulse = solve_pulse(p, g);
  const LinearizationBlocks D = assemble_D(pulse, g);
  const PulseFields& U = pulse.U;
  const double e = U.eps, k = p.kappa, c = std::sqrt(e / k) / (1.0 - k);
  double d12 = 0.0, d21 = 0.0, scale = 0.0;
  for (int i = 0; i < g.n; ++i) {
    const double xi = U.xi[i], eta = U.eta[i], P = xi * xi + e * eta * eta;
    const double b12 = c * (-U.tau + P - 2.0 * xi * eta + 2.0 * e * eta * eta + 4.0 * P * xi * eta);
    const double b21 = c * (U.tau - P - 2.0 * xi * eta - 2.0 * xi * xi + 4.0 * P * xi * eta);
    d12 = std::max(d12, std::abs(D.B12[i] - b12));
    d21 = std::max(d21, std::abs(D.B21[i] - b21));
    scale = std::max({scale, std::abs(b12), std::abs(b21)});
  }
  CHECK(d12 <= 1e-12 * scale);
  CHECK(d21 <= 1e-12 * scale);
  // ℬ and 𝒞 stay O(1) while √κ is small
  CHECK(D.C11.cwiseAbs().maxCoeff() < 100.0);
  CHECK(D.C22.cwiseAbs().maxCoeff() < 100.0);
}

TEST_CASE("zero shift gives diag(A, B) and M11 = lambda") {
  const ModelParams p = ModelParams::from_L(3.0);
  const Grid g = pulse_grid(p, 0.05, 8, 20.0);
  const StabilityRun run = stability_at(p, g);
  const LinearizationBlocks D = assemble_D(run.pulse, g);
  // D is built from the Newton-corrected pulse, which differs from the sampled profile by the mesh defect
  CHECK(Eigen::MatrixXd(D.D11 - build_A(p, g).M).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK(Eigen::MatrixXd(D.D22 - build_B(p, g).M).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK(D.D12.nonZeros() == 0);
  CHECK(D.D21.nonZeros() == 0);
  CHECK(run.report.M11 == doctest::Approx(run.report.lambda_flat).epsilon(1e-8));
  CHECK(run.report.M11 / p.nu == doctest::Approx(-1.5).epsilon(0.05));
  CHECK(run.report.classification == "unstable");
}

TEST_CASE("symmetry modes and the rank-three cluster") {
  for (double y : {0.5, 1.5}) {
    const ModelParams p = ModelParams::from_L(3.0, y);
    const Grid g = pulse_grid(p, 0.04);
    const StabilityRun run = stability_at(p, g);
    const StabilityReport& r = run.report;
    CHECK(r.phase_residual <= 1e-8);
    CHECK(r.translation_residual <= 1e-7);
    CHECK(r.small.size() == 3);
    CHECK(r.cluster_ok);
    int zeros = 0;
    for (const cplx& z : r.small)
      if (std::abs(z) <= 1e-3 * std::abs(r.M11)) ++zeros;
    CHECK(zeros == 2);
    CHECK(r.phase_in_subspace <= 1e-8);
    if (r.classification == "stable") CHECK(r.spectrum_floor > 0.0);
  }
}

TEST_CASE("spectra of alpha and -alpha coincide") {
  const ModelParams p = ModelParams::from_L(3.0, 1.0);
  const Grid g = pulse_grid(p, 0.1, 8, 15.0);
  const AnsatzState pulse = solve_pulse(p, g);
  const double a = std::sqrt(pulse.U.eps), w = a * pulse.U.tau;
  const Vec u2 = a * pulse.U.eta;
  const std::vector<cplx> s1 = dense_eigenvalues(block_matrix(jacobian_F(pulse.U.xi, u2, a, w, p.m, p.mu, g)));
  const std::vector<cplx> s2 = dense_eigenvalues(block_matrix(jacobian_F(pulse.U.xi, -u2, -a, -w, p.m, p.mu, g)));
  for (int i = 0; i < 12; ++i) {
    // match each eigenvalue to its nearest partner; conjugation may swap a ± pair
    double best = 1e300;
    for (const cplx& z : s2) best = std::min(best, std::abs(z - s1[i]));
    CHECK(best <= 1e-9 * (1.0 + std::abs(s1[i])));
  }
}

TEST_CASE("linear perturbation flow") {
  const std::array<cplx, 3> d0{cplx(0.3, 0.1), cplx(-0.2, 0.5), cplx(0.7, 0.0)};
  const auto id = linear_perturbation_flow(0.02, 0.5, 0.3, d0, 0.0);
  for (int i = 0; i < 3; ++i) CHECK(std::abs(id[i] - d0[i]) <= 1e-15);
  const double a = 0.02, b = 0.5;
  const auto late = linear_perturbation_flow(a, b, 0.0, d0, 5000.0);
  CHECK(std::abs(late[0]) <= 1e-40);
  CHECK(std::abs(late[1] - (d0[1] + asymptotic_phase_shift(a, b, d0[0]))) <= 1e-12);
  CHECK(std::abs(late[2] - d0[2]) <= 1e-15);
  // a → 0: δ₂ − δ₂(0) → −b t δ₁(0)
  const double t = 7.0;
  const auto flat = linear_perturbation_flow(0.0, b, 0.0, d0, t);
  CHECK(std::abs(flat[1] - d0[1] + b * t * d0[0]) <= 1e-14);
  const auto tiny = linear_perturbation_flow(1e-9, b, 0.0, d0, t);
  CHECK(std::abs(tiny[1] - flat[1]) <= 1e-7);
  // rotating factor
  const auto rot = linear_perturbation_flow(a, b, 0.4, d0, t);
  const auto fix = linear_perturbation_flow(a, b, 0.0, d0, t);
  for (int i = 0; i < 3; ++i) CHECK(std::abs(rot[i] - std::polar(1.0, 0.4 * t) * fix[i]) <= 1e-14);
}

TEST_CASE("stabilization criterion chi") {
  CHECK(std::abs(chi_criterion(general(0, 0, 1, 0)).chi - M_PI * M_PI / 16.0) <= 1e-12);
  CHECK(chi_criterion(general(0, 0, 1, 1)).chi == doctest::Approx(-9.43).epsilon(0.001));
  CHECK(chi_criterion(general(0, 0, 9.0 / 8.0, 1.0)).chi == 0.0);
  CHECK_THROWS_AS(chi_criterion(general(0, 0, 15.0 / 16.0, 1.0)), Error);
  const ChiResult c = chi_criterion(Mu::simplified());
  CHECK(c.nu_c_ratio(4.0) == doctest::Approx(2.0 * c.chi / 48.0));
  CHECK(c.denominator == 4.0);
}

TEST_CASE("single crossing and coupling at the threshold") {
  AlphaCOptions opt;
  opt.h = 0.04;
  const AlphaCResult r = find_alpha_c(3.0, Mu::simplified(), opt);
  REQUIRE(r.found);
  CHECK(r.sign_changes == 1);
  CHECK(r.alpha_c_measured > 0.0);
  CHECK(r.alpha_c_formula == doctest::Approx(alpha_c_formula(3.0)));
  // |M21/√κ| ≥ √(ε/κ)θ₁♭/2 at α_c
  const ModelParams pc = ModelParams::from_L(3.0, r.y_c);
  double eps_c = 0.0;
  for (const AlphaScanPoint& s : r.scan)
    if (std::abs(s.y - r.y_c) < 1e-12) eps_c = s.eps;
  if (eps_c == 0.0) eps_c = r.alpha_c_measured * r.alpha_c_measured;
  CHECK(std::abs(r.M21_first_order_at_c) >= 0.5 * std::sqrt(eps_c / pc.kappa) * r.theta1_flat);
  CHECK(r.M21_at_c != 0.0);
  // monotone sign pattern: negative before y_c, positive after
  for (const AlphaScanPoint& s : r.scan) {
    if (s.y < r.y_c - 1e-3) CHECK(s.M11 < 0.0);
    if (s.y > r.y_c + 1e-3) CHECK(s.M11 > 0.0);
  }
}

TEST_CASE("expansion of M11 in epsilon") {
  const ModelParams p = ModelParams::from_L(4.0, 1.0);
  const Grid g = pulse_grid(p, 0.04);
  const StabilityRun run = stability_at(p, g);
  const M11Expansion ex = m11_expansion_check(run.pulse, run.report, g);
  CHECK(ex.M11_measured == run.report.M11);
  CHECK(ex.M11_order0 == doctest::Approx(run.report.lambda_flat));
  CHECK(ex.da_dL_formula == doctest::Approx(da_dL_formula(4.0 + 1.0)));
  CHECK(ex.da_dL > 0.0);
  // first two orders explain the measured value to within the next order
  CHECK(std::abs(ex.M11_measured - ex.M11_order0 - ex.M11_order2) <= 0.5 * std::abs(ex.M11_order2));
}

}  // TEST_SUITE
