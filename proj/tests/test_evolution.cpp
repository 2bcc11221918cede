#include <doctest.h>

#include <cmath>
#include <complex>
#include <random>

#include "cglpulse/evolution.hpp"
#include "cglpulse/params.hpp"
#include "cglpulse/profiles.hpp"

using namespace cgl;
using cd = std::complex<double>;

namespace {

CGLCoefficients coefficients(double nu, double alpha, double omega = 0.0) {
  CGLCoefficients c;
  c.m = m_from_nu(nu);
  c.alpha = alpha;
  c.omega_frame = omega;
  return c;
}

// profile modulus with a small phase twist, centred at x = c
CVec bump(const PeriodicGrid& g, double nu, double c = 0.0) {
  const ScalarProfile prof(nu);
  CVec u(g.N);
  for (int j = 0; j < g.N; ++j) {
    const double x = g.x[j] - c;
    u[j] = std::polar(prof.r(x), 0.05 * x * std::exp(-0.01 * x * x));
  }
  return u;
}

CVec evolve(const PeriodicGrid& g, const CGLCoefficients& c, double dt, double T, CVec u) {
  const CGLStepper s(g, c, dt);
  const long n = std::lround(T / dt);
  for (long i = 0; i < n; ++i) REQUIRE(s.step(u));
  return u;
}

CVec shift_cells(const CVec& u, int k) {
  const int N = static_cast<int>(u.size());
  CVec out(N);
  for (int j = 0; j < N; ++j) out[(j + k + N) % N] = u[j];
  return out;
}

}  // namespace

TEST_SUITE("evolution") {

TEST_CASE("etd coefficient functions") {
  for (const cd z : {cd(1e-9, 0.0), cd(-1e-6, 2e-6), cd(-0.5, 0.3), cd(-40.0, 1.0), cd(0.0, 0.0)}) {
    const cd p1 = etd_phi1(z), p2 = etd_phi2(z);
    if (std::abs(z) > 1e-3) {
      CHECK(std::abs(p1 - (std::exp(z) - 1.0) / z) <= 1e-14);
      CHECK(std::abs(p2 - (std::exp(z) - 1.0 - z) / (z * z)) <= 1e-12);
    } else {
      CHECK(std::abs(p1 - (1.0 + z / 2.0)) <= 1e-12);
      CHECK(std::abs(p2 - (0.5 + z / 6.0)) <= 1e-12);
    }
  }
}

TEST_CASE("zero is a fixed point") {
  const PeriodicGrid g = PeriodicGrid::make(256, 0.25);
  const CVec u = evolve(g, coefficients(0.01, 0.05), 0.05, 10.0, CVec::Zero(g.N));
  CHECK(u.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("homogeneous state keeps its amplitude") {
  const HomogeneousRun run = homogeneous_experiment(0.01, 0.03);
  CHECK(run.state.amplitude > 0.5);
  CHECK(run.max_drift <= 1e-6);
  const HomogeneousState s = homogeneous_state(m_from_nu(0.01), 0.03, Mu::simplified(), 0.2);
  const double a2 = s.amplitude * s.amplitude;
  CHECK(std::abs(a2 * a2 - a2 + m_from_nu(0.01) * (1.0 + 0.04)) <= 1e-14);
}

TEST_CASE("second order in time") {
  const PeriodicGrid g = PeriodicGrid::make(512, 0.1);
  const double nu = 1e-3;
  const CGLCoefficients c = coefficients(nu, 0.02, 0.01);
  const CVec u0 = bump(g, nu);
  const double T = 2.0;
  const CVec a = evolve(g, c, 0.04, T, u0), b = evolve(g, c, 0.02, T, u0), r = evolve(g, c, 0.005, T, u0);
  const double ea = (a - r).norm(), eb = (b - r).norm();
  // Richardson: the reference carries (1/4)² of the dt/2 error
  const double ratio = ea / eb;
  CHECK(ratio >= 3.5);
  CHECK(ratio <= 4.6);
}

TEST_CASE("phase and translation equivariance") {
  const PeriodicGrid g = PeriodicGrid::make(512, 0.1);
  const double nu = 1e-3;
  const CGLCoefficients c = coefficients(nu, 0.02, 0.01);
  const CGLStepper s(g, c, 0.05);
  const CVec u0 = bump(g, nu);
  const cd rot = std::polar(1.0, 0.83);
  CVec a = u0, b = rot * u0;
  CVec t1 = shift_cells(u0, 37), t2 = u0;
  for (int n = 0; n < 20; ++n) {
    REQUIRE(s.step(a));
    REQUIRE(s.step(b));
    CHECK((b - rot * a).cwiseAbs().maxCoeff() <= 1e-10);
    REQUIRE(s.step(t1));
    REQUIRE(s.step(t2));
    CHECK((t1 - shift_cells(t2, 37)).cwiseAbs().maxCoeff() <= 1e-13);
  }
}

TEST_CASE("conjugation maps alpha to -alpha") {
  const PeriodicGrid g = PeriodicGrid::make(512, 0.1);
  const double nu = 1e-3;
  const CVec u0 = bump(g, nu);
  const CVec a = evolve(g, coefficients(nu, 0.02, 0.01), 0.05, 2.0, u0);
  const CVec b = evolve(g, coefficients(nu, -0.02, -0.01), 0.05, 2.0, u0.conjugate());
  CHECK((b - a.conjugate()).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("blow-up leaves the field untouched") {
  const PeriodicGrid g = PeriodicGrid::make(128, 0.25);
  CGLCoefficients c = coefficients(0.01, 0.0);
  const CGLStepper s(g, c, 0.5);
  // the explicit quintic term overshoots far past the bound
  CVec u = CVec::Constant(g.N, cd(30.0, 0.0));
  const CVec before = u;
  CHECK_FALSE(s.step(u));
  CHECK(u == before);
}

TEST_CASE("distance modulo symmetries") {
  const PeriodicGrid g = PeriodicGrid::make(1024, 0.1);
  const double nu = 1e-3;
  const CVec ref = bump(g, nu);
  CHECK(modulo_symmetry_distance(g, ref, ref).distance <= 1e-12);
  const CVec moved = std::polar(1.0, 0.3) * bump(g, nu, 1.7);
  const SymmetryDistance d = modulo_symmetry_distance(g, moved, ref);
  CHECK(d.distance <= 1e-8);
  CHECK(d.shift == doctest::Approx(1.7).epsilon(1e-6));
  CHECK(std::remainder(d.phase - 0.3, 2.0 * M_PI) == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(d.converged);

  std::mt19937 rng(2);
  std::normal_distribution<double> N(0.0, 1.0);
  CVec noise(g.N);
  for (int j = 0; j <= g.N / 2; ++j) {
    const double v = N(rng) * std::exp(-0.002 * g.x[j] * g.x[j]);
    noise[j] = v;
    noise[(g.N - j) % g.N] = v;
  }
  noise *= 1e-3 / h1_norm_periodic(g, noise);
  const double dn = modulo_symmetry_distance(g, ref + noise, ref).distance;
  CHECK(dn <= 1e-3 * (1.0 + 1e-9));  // never worse than the identity alignment
  CHECK(dn >= 0.5e-3);
}

TEST_CASE("front speed of the kink") {
  // 4α² = ν: the front is stationary
  const KinkSpeedResult still = kink_speed_experiment(0.01, 0.05);
  CHECK(std::abs(still.c_measured) <= 0.005);
  // the zero state invades when 4α² > ν
  const KinkSpeedResult inflow = kink_speed_experiment(0.01, 0.08);
  CHECK(inflow.c_measured > 0.0);
  CHECK(inflow.c_formula > 0.0);
  const KinkSpeedResult real = kink_speed_experiment(0.01, 0.0);
  CHECK(real.c_measured < 0.0);
  CHECK(real.c_printed == doctest::Approx(-0.0085962).epsilon(1e-4));
}

}  // TEST_SUITE
