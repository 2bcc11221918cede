#include <doctest.h>

#include <cmath>

#include "cglpulse/certified_newton.hpp"
#include "cglpulse/errors.hpp"

using namespace cgl;

namespace {

Vec scalar(double v) { return Vec::Constant(1, v); }
double abs_norm(const Vec& v) { return v.cwiseAbs().maxCoeff(); }

// f(x) = x² − 1 with A = f'(x₀); A⁻¹f'' = 2/A is constant
CertifiedProblem square_minus_one(double x0, double rho) {
  const double A = 2.0 * x0;
  CertifiedProblem prob;
  prob.f = [](const Vec& x) { return scalar(x[0] * x[0] - 1.0); };
  prob.solve_A = [A](const Vec& v) { return Vec(v / A); };
  prob.norm = abs_norm;
  prob.M = 2.0 / std::abs(A);
  prob.rho = rho;
  return prob;
}

}  // namespace

TEST_SUITE("certified_newton") {

TEST_CASE("scalar quadratic from 1.1") {
  const CertifiedResult r = certify_and_solve(square_minus_one(1.1, 1.0), scalar(1.1));
  const Certificate& c = r.cert;
  CHECK(c.d0 == doctest::Approx(0.21 / 2.2).epsilon(1e-14));
  CHECK(c.M == doctest::Approx(2.0 / 2.2));
  CHECK(c.a == doctest::Approx(0.55).epsilon(1e-14));
  CHECK(c.K == doctest::Approx(0.4125).epsilon(1e-14));
  CHECK(c.hypothesis_ok);
  REQUIRE(r.x.has_value());
  CHECK((*r.x)[0] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(c.dist == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(c.dist <= c.bound1);
  CHECK(c.dist_newton <= c.bound2);
  CHECK(c.bound1 == doctest::Approx(2.0 * c.d0));
  CHECK(c.bound2 == doctest::Approx(2.0 * c.M * c.d0 * c.d0));
  CHECK(c.bounds_hold);
  CHECK(c.max_ratio <= 0.5 + 1e-6);
}

TEST_CASE("linear map converges in one step") {
  // f(x) = Bx − b with the exact inverse
  Eigen::Matrix2d B;
  B << 3.0, 1.0, 1.0, 2.0;
  const Vec b = (Vec(2) << 1.0, -2.0).finished();
  CertifiedProblem prob;
  prob.f = [B, b](const Vec& x) { return Vec(B * x - b); };
  prob.solve_A = [B](const Vec& v) { return Vec(B.partialPivLu().solve(v)); };
  prob.norm = [](const Vec& v) { return v.norm(); };
  prob.M = 0.0;
  prob.rho = 10.0;  // K = 7.5 covers ‖x₀ − x*‖ ≈ 1.6
  const Vec x0 = (Vec(2) << 0.1, 0.1).finished();
  const CertifiedResult r = certify_and_solve(prob, x0);
  CHECK(r.cert.a == 1.0);
  CHECK(r.cert.bound2 == 0.0);
  REQUIRE(r.x.has_value());
  CHECK((B * *r.x - b).norm() < 1e-14);
  CHECK(r.cert.steps.size() >= 1);
  // the first step lands on the root, the rest are round-off
  CHECK(r.cert.steps.size() <= 2);
  CHECK(r.cert.bounds_hold);
}

TEST_CASE("hypothesis fails far from the root") {
  const CertifiedResult r = certify_and_solve(square_minus_one(3.0, 0.1), scalar(3.0));
  CHECK_FALSE(r.cert.hypothesis_ok);
  CHECK_FALSE(r.x.has_value());
  CHECK(r.cert.iterations == 0);
  CHECK(r.cert.d0 == doctest::Approx(8.0 / 6.0));
  CHECK(r.cert.a == doctest::Approx(1.0));
  CHECK(r.cert.K == doctest::Approx(0.075));
}

TEST_CASE("certificate constants") {
  const Certificate c = certificate_constants(0.01, 5.0, 0.5);
  CHECK(c.a == doctest::Approx(0.2));
  CHECK(c.K == doctest::Approx(0.075));
  CHECK(c.hypothesis_ok);
  CHECK_FALSE(certificate_constants(0.08, 5.0, 0.5).hypothesis_ok);
  CHECK(certificate_constants(0.01, 0.0, 0.5).a == 1.0);
}

TEST_CASE("two-dimensional system") {
  // f(x, y) = (x² + y² − 4, x − y): root (√2, √2)
  const Vec x0 = (Vec(2) << 1.5, 1.4).finished();
  Eigen::Matrix2d A;
  A << 2.0 * x0[0], 2.0 * x0[1], 1.0, -1.0;
  const Eigen::Matrix2d Ainv = A.inverse();
  CertifiedProblem prob;
  prob.f = [](const Vec& x) { return Vec((Vec(2) << x[0] * x[0] + x[1] * x[1] - 4.0, x[0] - x[1]).finished()); };
  prob.solve_A = [Ainv](const Vec& v) { return Vec(Ainv * v); };
  prob.norm = [](const Vec& v) { return v.cwiseAbs().maxCoeff(); };
  // D²f[u, v] = (2u·v, 0) and |2u·v| ≤ 4‖u‖∞‖v‖∞, so M = 4‖A⁻¹e₁‖∞
  prob.M = 2.0 * 2.0 * Ainv.col(0).cwiseAbs().maxCoeff();
  prob.rho = 0.5;
  const CertifiedResult r = certify_and_solve(prob, x0);
  REQUIRE(r.cert.hypothesis_ok);
  REQUIRE(r.x.has_value());
  CHECK((*r.x)[0] == doctest::Approx(std::sqrt(2.0)).epsilon(1e-13));
  CHECK((*r.x)[1] == doctest::Approx(std::sqrt(2.0)).epsilon(1e-13));
  CHECK(r.cert.dist <= r.cert.bound1);
  CHECK(r.cert.dist_newton <= r.cert.bound2 + r.cert.noise_floor);
  CHECK(r.cert.max_ratio <= 0.5 + 1e-6);
  CHECK(r.cert.bounds_hold);
}

TEST_CASE("underestimated M is detected") {
  // f = x³ − 1 from 1.5 with M claimed as 0: the chord map contracts too slowly
  CertifiedProblem prob;
  const double A = 3.0 * 1.5 * 1.5;
  prob.f = [](const Vec& x) { return scalar(x[0] * x[0] * x[0] - 1.0); };
  prob.solve_A = [A](const Vec& v) { return Vec(v / A); };
  prob.norm = abs_norm;
  prob.M = 0.0;
  prob.rho = 1.0;
  CHECK_THROWS_AS(certify_and_solve(prob, scalar(1.5)), Error);
}

}  // TEST_SUITE
