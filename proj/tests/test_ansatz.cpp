#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include "cglpulse/ansatz.hpp"
#include "cglpulse/errors.hpp"
#include "cglpulse/grid.hpp"
#include "cglpulse/profiles.hpp"

using namespace cgl;
using cd = std::complex<double>;

namespace {

Mu general(double m0, double m1, double m2, double m3) {
  Mu mu;
  mu.m0 = m0;
  mu.m1 = m1;
  mu.m2 = m2;
  mu.m3 = m3;
  return mu;
}

// smooth even field with random Gaussian bumps
Vec random_even(const Grid& g, std::mt19937& rng) {
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  Vec v = Vec::Zero(g.n);
  for (int k = 0; k < 4; ++k) {
    const double c = 4.0 * U(rng), a = U(rng), w = 1.0 + std::abs(U(rng));
    for (int i = 0; i < g.n; ++i) {
      const double x = g.x[i];
      v[i] += a * (std::exp(-(x - c) * (x - c) / w) + std::exp(-(x + c) * (x + c) / w));
    }
  }
  return v;
}

// F(u) of the stationary equation on the mesh: (m + iαμ₀)u'' − (m + iαμ₁)u + (1 + iαμ₂)|u|²u − (1 + iαμ₃)|u|⁴u
Eigen::VectorXcd F(const ModelParams& p, const Grid& g, const Eigen::VectorXcd& u, double alpha) {
  const OperatorMatrix lap = build_laplacian(g);  // −d²
  const Vec re = u.real(), im = u.imag();
  Eigen::VectorXcd upp(g.n);
  upp.real() = -(lap * re);
  upp.imag() = -(lap * im);
  const Mu& mu = p.mu;
  const cd I(0.0, 1.0);
  Eigen::VectorXcd out(g.n);
  for (int i = 0; i < g.n; ++i) {
    const double P = std::norm(u[i]);
    out[i] = (p.m + I * alpha * mu.m0) * upp[i] - (p.m + I * alpha * mu.m1) * u[i] + (1.0 + I * alpha * mu.m2) * P * u[i] -
             (1.0 + I * alpha * mu.m3) * P * P * u[i];
  }
  return out;
}

}  // namespace

TEST_SUITE("ansatz") {

TEST_CASE("real part vanishes at the profile with zero epsilon") {
  const ModelParams p = ModelParams::from_L(4.0);
  const Grid g = pulse_grid(p);
  std::mt19937 rng(7);
  const ScalarProfile prof(p.nu);
  PulseFields U{prof.sample(g.x, ScalarProfile::Field::r), random_even(g, rng), 0.37, 0.0};
  CHECK(residual_G(U, p, g).G1.cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("G is the real and imaginary part of the rotating-frame equation") {
  std::mt19937 rng(11);
  for (const Mu& mu : {Mu::simplified(), general(0.3, -0.2, 1.0, 0.7)}) {
    const ModelParams p = ModelParams::from_L(3.0, 0.0, mu);
    const Grid g = Grid::make(12.0, 0.05);
    PulseFields U{random_even(g, rng), random_even(g, rng), 0.6, 0.04};
    const double a = std::sqrt(U.eps);
    Eigen::VectorXcd u(g.n);
    for (int i = 0; i < g.n; ++i) u[i] = cd(U.xi[i], a * U.eta[i]);
    // stationary in the frame e^{iωt}, ω = √ε τ
    const Eigen::VectorXcd e = F(p, g, u, a) - cd(0.0, a * U.tau) * u;
    const GResidual G = residual_G(U, p, g);
    CHECK((G.G1 + e.real()).cwiseAbs().maxCoeff() <= 1e-10 * (1.0 + G.G1.cwiseAbs().maxCoeff()));
    CHECK((G.G2 + e.imag() / a).cwiseAbs().maxCoeff() <= 1e-10 * (1.0 + G.G2.cwiseAbs().maxCoeff()));

    // S¹ equivariance of F
    std::uniform_real_distribution<double> Ub(0.0, 2.0 * M_PI);
    for (int k = 0; k < 3; ++k) {
      const cd rot = std::polar(1.0, Ub(rng));
      const Eigen::VectorXcd lhs = F(p, g, rot * u, a), rhs = rot * F(p, g, u, a);
      CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-11 * (1.0 + rhs.cwiseAbs().maxCoeff()));
    }
  }
}

TEST_CASE("Jacobian matches directional differences") {
  std::mt19937 rng(3);
  for (const Mu& mu : {Mu::simplified(), general(0.2, 0.1, 1.0, 0.5)}) {
    const ModelParams p = ModelParams::from_L(3.0, 0.5, mu);
    const Grid g = Grid::make(p.L + 12.0, 0.05);
    const FlatAnsatz fa = build_flat_ansatz(p, g);
    const JacobianG J = jacobian_G(fa.U, p, g);
    for (int k = 0; k < 3; ++k) {
      std::uniform_real_distribution<double> U(-1.0, 1.0);
      const PulseFields d{random_even(g, rng), random_even(g, rng), U(rng), 0.01 * U(rng)};
      const double t = 1e-5;
      auto shifted = [&](double s) {
        PulseFields V = fa.U;
        V.xi += s * d.xi;
        V.eta += s * d.eta;
        V.tau += s * d.tau;
        V.eps += s * d.eps;
        return residual_G(V, p, g);
      };
      const GResidual gp = shifted(t), gm = shifted(-t), lin = J.apply(d);
      const Vec fd1 = (gp.G1 - gm.G1) / (2.0 * t), fd2 = (gp.G2 - gm.G2) / (2.0 * t);
      CHECK((fd1 - lin.G1).norm() <= 1e-6 * lin.G1.norm());
      CHECK((fd2 - lin.G2).norm() <= 1e-6 * lin.G2.norm());
    }
  }
}

TEST_CASE("Jacobian blocks at the base point") {
  const ModelParams p = ModelParams::from_L(4.0);
  const Grid g = Grid::make(p.L + 15.0, 0.05);
  const FlatAnsatz fa = build_flat_ansatz(p, g);
  CHECK(fa.eps == 0.0);
  const JacobianG J = jacobian_G(fa.U, p, g);
  CHECK(Eigen::MatrixXd(J.J11 - build_A(p, g).M).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(Eigen::MatrixXd(J.J22 - build_B(p, g).M).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((J.J23 - fa.r).cwiseAbs().maxCoeff() <= 1e-15);
  CHECK(J.J13.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("ansatz coefficient a0") {
  const ModelParams p = ModelParams::from_nu(1e-5, 0.5);
  const FlatAnsatz fa = build_flat_ansatz(p, pulse_grid(p));
  CHECK(std::abs(fa.a.a0 + 9.0 / 64.0) <= 0.01);
  CHECK(fa.a.a3 == 0.0);
}

TEST_CASE("eps_flat roots") {
  const AnsatzCoefficients a{-9.0 / 64.0, 0.5, 20.0, 0.0};
  CHECK(eps_flat(a, 0.0) == 0.0);
  const double kappa = 1e-4;
  const double e = eps_flat(a, kappa);
  CHECK(e > 0.0);
  CHECK(std::abs(kappa * a.a0 + e * a.a1 + e * e * a.a2) <= 1e-16);
  CHECK(e == doctest::Approx(-2.0 * a.a0 * kappa / (a.a1 + std::sqrt(a.a1 * a.a1 - 4.0 * kappa * a.a0 * a.a2))));
  // cubic: smallest positive root
  const AnsatzCoefficients c{-9.0 / 64.0, 0.5, 20.0, -3.0};
  const double ec = eps_flat(c, kappa);
  CHECK(std::abs(kappa * c.a0 + ec * c.a1 + ec * ec * c.a2 + ec * ec * ec * c.a3) <= 1e-15);
  CHECK(ec > 0.0);
  CHECK(ec < e * 1.01);
  // no positive root when the quadratic has negative discriminant
  CHECK_THROWS_AS(eps_flat(AnsatzCoefficients{-9.0 / 64.0, 0.5, -2000.0, 0.0}, 0.01), Error);
}

TEST_CASE("ansatz satisfies its defining projection and residual scaling") {
  std::vector<double> C;
  for (double L : {4.0, 5.0})
    for (double y : {0.25, 1.0}) {
      const ModelParams p = ModelParams::from_L(L, y);
      const Grid g = pulse_grid(p);
      const FlatAnsatz fa = build_flat_ansatz(p, g);
      CHECK(fa.eps > 0.0);
      const GResidual G = residual_G(fa.U, p, g);
      // exact in the algebraic form; the differenced residual carries round-off of order 1e−15·m/h²
      const GResidual Gr = residual_G_reduced(fa, g);
      CHECK(std::abs(inner(g, Gr.G1, fa.s)) <= 1e-12 * p.kappa * l2_norm(g, fa.s));
      CHECK(std::abs(inner(g, G.G1, fa.s)) <= 1e-12);
      CHECK((G.G1 - Gr.G1).cwiseAbs().maxCoeff() <= 1e-7 * p.kappa + 1e-10);
      CHECK((G.G2 - Gr.G2).cwiseAbs().maxCoeff() <= 1e-7 * p.kappa + 1e-10);
      C.push_back(G.sup() / (p.kappa * L));
    }
  CHECK(*std::max_element(C.begin(), C.end()) <= 10.0 * *std::min_element(C.begin(), C.end()));
}

TEST_CASE("triangular and monolithic structured solves agree") {
  const ModelParams p = ModelParams::from_L(4.0, 0.5);
  const Grid g = pulse_grid(p);
  const FlatAnsatz fa = build_flat_ansatz(p, g);
  const StructuredG S = structured_G(fa, g);
  std::mt19937 rng(5);
  const Vec h1 = random_even(g, rng), h2 = random_even(g, rng);
  const PulseFields a = solve_structured_triangular(S, h1, h2), b = solve_structured_monolithic(S, h1, h2);
  const double scale = std::max(a.xi.cwiseAbs().maxCoeff(), a.eta.cwiseAbs().maxCoeff());
  CHECK((a.xi - b.xi).cwiseAbs().maxCoeff() <= 1e-8 * scale);
  CHECK((a.eta - b.eta).cwiseAbs().maxCoeff() <= 1e-8 * scale);
  CHECK(std::abs(a.tau - b.tau) <= 1e-8 * (1.0 + std::abs(a.tau)));
  CHECK(std::abs(a.eps - b.eps) <= 1e-8 * (1.0 + std::abs(a.eps)));
  // E₂ membership of the solution
  CHECK(std::abs(inner(g, a.xi, S.s)) <= 1e-10 * l2_norm(g, a.xi) * l2_norm(g, S.s));
  CHECK(std::abs(inner(g, a.eta, S.r)) <= 1e-10 * l2_norm(g, a.eta) * l2_norm(g, S.r));
}

TEST_CASE("zero shift returns the base solution") {
  const ModelParams p = ModelParams::from_L(4.0);
  const Grid g = pulse_grid(p);
  const AnsatzState st = solve_pulse(p, g);
  // Newton only removes the mesh defect of the sampled profile
  CHECK(std::abs(st.U.eps) <= 1e-12);
  CHECK((st.U.xi - st.flat.U.xi).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK((st.U.eta - st.flat.U.eta).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK(st.residual_norm <= 1e-10);
}

TEST_CASE("certified pulse at L = 5, y = 1") {
  const ModelParams p = ModelParams::from_L(5.0, 1.0);
  const Grid g = pulse_grid(p);
  const AnsatzState st = solve_pulse(p, g);
  CHECK(st.certified);
  CHECK(st.method == "certified");
  CHECK(st.residual_norm <= 1e-10);
  CHECK(st.cert.hypothesis_ok);
  CHECK(st.cert.bounds_hold);
  CHECK(st.cert.max_ratio <= 0.5 + 1e-6);
  CHECK(st.correction_norm <= 2.0 * st.cert.d0 + st.cert.noise_floor);
  // κ² ≈ 7e−17 is below what the differenced residual resolves; ε₁ is bounded
  // by that floor, (G₁(U♭), s)/a₁, instead
  const double floor = std::abs(inner(g, residual_G(st.flat.U, p, g).G1, st.flat.s)) / st.flat.a.a1;
  CHECK(std::abs(st.eps1) <= 10.0 * p.kappa * p.kappa + 10.0 * floor);
  CHECK(std::abs(st.eps1) <= 1e-4 * st.U.eps);
  CHECK(st.U.eps > 0.0);

  // phase arctan(√ε η/ξ) is asymptotically linear with negative slope
  const Vec ph = pulse_phase(st.U);
  std::vector<double> xs, ys;
  for (int i = g.center(); i < g.n; ++i)
    if (g.x[i] >= p.L_flat() + 5.0 && g.x[i] <= p.L_flat() + 15.0) {
      xs.push_back(g.x[i]);
      ys.push_back(ph[i]);
    }
  const double n = static_cast<double>(xs.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t i = 0; i < xs.size(); ++i) {
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx), icpt = (sy - slope * sx) / n;
  double fit = 0.0;
  for (size_t i = 0; i < xs.size(); ++i) fit = std::max(fit, std::abs(ys[i] - slope * xs[i] - icpt));
  CHECK(slope < 0.0);
  CHECK(fit <= 0.05 * std::abs(slope) * 10.0);
}

TEST_CASE("y outside the regime is rejected") {
  const ModelParams p = ModelParams::from_L(3.0, 4.0);
  PulseOptions opt;
  opt.p_exponent = 1.0;
  try {
    solve_pulse(p, pulse_grid(p), opt);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.exit_code() == 3);
  }
}

}  // TEST_SUITE
