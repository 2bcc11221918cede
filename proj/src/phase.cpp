#include "cglpulse/phase.hpp"

#include <cmath>
#include <sstream>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "cglpulse/bordered.hpp"
#include "cglpulse/errors.hpp"
#include "cglpulse/profiles.hpp"
#include "cglpulse/schrodinger.hpp"

namespace cgl {

namespace {

using Field = ScalarProfile::Field;

// r f(θ) at one point
double rf_at(const ProfilePoint& pt, double theta, const Mu& mu) {
  const double R = pt.R;
  return -(theta + mu.m1) * R + mu.m2 * R * R - mu.m3 * R * R * R + mu.m0 * pt.r * pt.rpp;
}

// ln(1 + e^{−2x}) without overflow
double softplus2(double x) { return x > -20.0 ? std::log1p(std::exp(-2.0 * x)) : -2.0 * x + std::log1p(std::exp(2.0 * x)); }

}  // namespace

double solve_theta(const ModelParams& p, const Grid& g, const Mu& mu) {
  const ScalarProfile prof(p.nu);
  const Vec R = prof.sample(g.x, Field::R);
  const Vec r = prof.sample(g.x, Field::r);
  const Vec rpp = prof.sample(g.x, Field::rpp);
  const double I1 = quadrature(g, R);
  const double I2 = quadrature(g, R.cwiseProduct(R));
  const double I3 = quadrature(g, R.cwiseProduct(R).cwiseProduct(R));
  const double I0 = inner(g, r, rpp);
  return -mu.m1 + (mu.m2 * I2 - mu.m3 * I3 + mu.m0 * I0) / I1;
}

Vec phase_rhs(const ModelParams& p, const Grid& g, double theta, const Mu& mu) {
  const ScalarProfile prof(p.nu);
  const Vec r = prof.sample(g.x, Field::r);
  const Vec rpp = prof.sample(g.x, Field::rpp);
  const Vec r3 = r.array().cube();
  const Vec r5 = r3.cwiseProduct(r).cwiseProduct(r);
  return -(theta + mu.m1) * r + mu.m2 * r3 - mu.m3 * r5 + mu.m0 * rpp;
}

double phi_prime_quadrature(const ModelParams& p, double theta, const Mu& mu, double x) {
  const ScalarProfile prof(p.nu);
  boost::math::quadrature::exp_sinh<double> integrator;
  auto f = [&](double t) { return rf_at(prof.at(x + t), theta, mu); };
  const double I = integrator.integrate(f, 1e-14);
  return I / (prof.m() * prof.R(x));
}

double phi_second_quadrature(const ModelParams& p, double theta, const Mu& mu, double x) {
  const ScalarProfile prof(p.nu);
  const ProfilePoint pt = prof.at(x);
  const double mphi1 = prof.m() * phi_prime_quadrature(p, theta, mu, x);
  const double dlogR = 2.0 * pt.rp / pt.r;
  return (-rf_at(pt, theta, mu) / pt.R - dlogR * mphi1) / prof.m();
}

PhaseSolution solve_q(const ModelParams& p, const Grid& g, double theta, const Mu& mu) {
  const ScalarProfile prof(p.nu);
  const Vec r = prof.sample(g.x, Field::r);
  const Vec f = phase_rhs(p, g, theta, mu);
  const OperatorMatrix B = build_B(p, g);
  const BorderedSolution sol = solve_bordered(g, B.M, Parity::Even, r, r, f);
  if (std::abs(sol.multiplier) > 1e-6 * (std::abs(theta) + 1.0)) {
    std::ostringstream os;
    os << "solve_q: right-hand side not orthogonal to r (multiplier " << sol.multiplier << " at theta " << theta
       << ")";
    throw consistency_error("incompatible theta", os.str());
  }

  PhaseSolution ph;
  ph.params = p;
  ph.mu = mu;
  ph.theta = theta + sol.multiplier;
  ph.theta_defect = sol.multiplier;
  ph.q = sol.x;
  ph.residual = (B * ph.q - phase_rhs(p, g, ph.theta, mu)).cwiseAbs().maxCoeff();

  const double Rmin = std::exp(-20.0) * prof.R0();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  ph.mask_halfwidth = 0.0;
  ph.phi = ph.phi_prime = ph.phi_second = Vec::Constant(g.n, nan);
  for (int i = 0; i < g.n; ++i) {
    const double x = g.x[i];
    if (std::abs(x) > p.L + 10.0 || prof.R(x) < Rmin) continue;
    ph.mask_halfwidth = std::max(ph.mask_halfwidth, std::abs(x));
    ph.phi[i] = ph.q[i] / r[i];
  }
  // quadrature values on x ≥ 0, mirrored (φ' odd, φ'' even)
  const int c = g.center();
  for (int i = c; i < g.n; ++i) {
    if (std::isnan(ph.phi[i])) continue;
    const double d1 = phi_prime_quadrature(p, ph.theta, mu, g.x[i]);
    const double d2 = phi_second_quadrature(p, ph.theta, mu, g.x[i]);
    ph.phi_prime[i] = i == c ? 0.0 : d1;
    ph.phi_second[i] = d2;
    ph.phi_prime[2 * c - i] = -ph.phi_prime[i];
    ph.phi_second[2 * c - i] = d2;
  }
  return ph;
}

Theta1Q1 solve_theta1_q1(const Grid& g, PhaseSolution& ph) {
  const ModelParams& p = ph.params;
  const Mu& mu = ph.mu;
  const ScalarProfile prof(p.nu);
  const Vec r = prof.sample(g.x, Field::r);
  const Vec sigma = prof.sample(g.x, Field::sigma);
  const Vec V = prof.sample(g.x, Field::V);
  const Vec rho = prof.sample(g.x, Field::rho);
  // Aσ = ρ gives σ'' without differencing
  const Vec sigma_pp = (V.cwiseProduct(sigma) - rho) / prof.m();
  const Vec f = phase_rhs(p, g, ph.theta, mu);
  const Vec R = r.cwiseProduct(r);
  const Vec R2 = R.cwiseProduct(R);
  const double k = 4.0 * p.nu / (1.0 - p.nu);  // ∂_L m / m

  const Vec dfdL_rest = (-(ph.theta + mu.m1) + 3.0 * mu.m2 * R.array() - 5.0 * mu.m3 * R2.array()).matrix()
                            .cwiseProduct(sigma) +
                        mu.m0 * sigma_pp;
  const Vec coupling = ((4.0 * R.array() - 2.0) * r.array() * ph.q.array() * sigma.array()).matrix();
  const Vec g_rhs = dfdL_rest - coupling + k * ((R2 - R).cwiseProduct(ph.q) - f);

  const double theta1 = inner(g, g_rhs, r) / inner(g, r, r);
  const double gamma = -inner(g, ph.q, sigma);
  const BorderedSolution sol = solve_bordered(g, build_B(p, g).M, Parity::Even, r, r, g_rhs - theta1 * r, gamma);
  if (std::abs(sol.multiplier) > 1e-6 * (std::abs(theta1) + 1.0)) {
    std::ostringstream os;
    os << "solve_theta1_q1: solvability defect " << sol.multiplier;
    throw consistency_error("incompatible theta1", os.str());
  }
  ph.theta1 = theta1 + sol.multiplier;
  ph.q1 = sol.x;
  return {ph.theta1, ph.q1, sol.multiplier};
}

PhaseSolution solve_phase(const ModelParams& p, const Grid& g, const Mu& mu) {
  PhaseSolution ph = solve_q(p, g, solve_theta(p, g, mu), mu);
  solve_theta1_q1(g, ph);
  return ph;
}

LogIntegrals log_integrals() {
  boost::math::quadrature::tanh_sinh<double> ts;
  LogIntegrals out;
  out.dilog = ts.integrate([](double y) { return y == 0.0 ? -1.0 : std::log1p(-y) / y; }, 0.0, 1.0, 1e-15);
  // the integrands decay like x²e^{2x} on the left and e^{−2x} on the right
  const double a = -40.0, b = 40.0;
  out.log_squared = 2.0 * ts.integrate(
                              [](double x) {
                                const double s = softplus2(x);
                                return std::exp(2.0 * x) * s * s;
                              },
                              a, b, 1e-15);
  out.log_ratio =
      2.0 * ts.integrate([](double x) { return softplus2(x) / (1.0 + std::exp(-2.0 * x)); }, a, b, 1e-15);
  out.log_ratio2 = 2.0 * ts.integrate(
                             [](double x) {
                               const double e = std::exp(2.0 * x);
                               return e * softplus2(x) / ((1.0 + e) * (1.0 + e));
                             },
                             a, b, 1e-15);
  return out;
}

}  // namespace cgl
