#include "cglpulse/profiles.hpp"

#include <cmath>
#include <sstream>

#include "cglpulse/errors.hpp"

namespace cgl {

ScalarProfile::ScalarProfile(double nu) : nu_(nu), sq_(std::sqrt(nu)), m_(m_from_nu(nu)) {
  if (!(nu > 0.0 && nu < 1.0)) throw domain_error("nu out of range", "ScalarProfile: nu outside (0,1)");
}

double ScalarProfile::R(double x) const {
  return 0.75 * (1.0 - nu_) / (1.0 + sq_ * std::cosh(2.0 * x));
}

double ScalarProfile::r(double x) const { return std::sqrt(R(x)); }

ProfilePoint ScalarProfile::at(double x) const {
  ProfilePoint p;
  if (std::abs(x) > 300.0) {
    // R < e^{−600} underflows; every field but the potentials vanishes
    p = ProfilePoint{};
    p.V = p.W = m_;
    return p;
  }
  const double ch = std::cosh(2.0 * x), sh = std::sinh(2.0 * x);
  const double t = sq_ * ch;
  const double D = 1.0 + t;
  const double onu = 1.0 - nu_;

  p.R = 0.75 * onu / D;
  p.r = std::sqrt(p.R);

  // ln r = const − ½ ln(1 + √ν cosh 2x)
  const double g1 = -sq_ * sh / D;
  const double g2 = -2.0 * sq_ * (ch + sq_) / (D * D);
  p.rp = p.r * g1;
  p.rpp = p.r * (g2 + g1 * g1);

  // ½ ∂_L ln R with ∂_L ν = −4ν, ∂_L t = −2t
  const double h = 2.0 * nu_ / onu + t / D;
  const double hL = -8.0 * nu_ / (onu * onu) - 2.0 * t / (D * D);
  p.sigma = p.r * h;
  p.sigma2 = p.r * (h * h + hL);
  p.S = 2.0 * p.R * h;

  p.V = m_ - 3.0 * p.R + 5.0 * p.R * p.R;
  p.W = m_ - p.R + p.R * p.R;

  const double r3 = p.R * p.r, r5 = p.R * r3;
  p.rho = 4.0 * nu_ / onu * (r5 - r3);
  // ∂_L ρ + (3ν/4)(σ'' − σ), with mσ'' = Vσ − ρ
  p.rho2 = -16.0 * nu_ * (1.0 + nu_) / (onu * onu) * (r5 - r3) +
           8.0 * nu_ / onu * (5.0 * p.R * p.R - 3.0 * p.R) * p.sigma;
  return p;
}

Eigen::VectorXd ScalarProfile::sample(const Eigen::VectorXd& x, Field f) const {
  Eigen::VectorXd out(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const ProfilePoint p = at(x[i]);
    switch (f) {
      case Field::R: out[i] = p.R; break;
      case Field::r: out[i] = p.r; break;
      case Field::rp: out[i] = p.rp; break;
      case Field::rpp: out[i] = p.rpp; break;
      case Field::sigma: out[i] = p.sigma; break;
      case Field::sigma2: out[i] = p.sigma2; break;
      case Field::S: out[i] = p.S; break;
      case Field::V: out[i] = p.V; break;
      case Field::W: out[i] = p.W; break;
      case Field::rho: out[i] = p.rho; break;
      case Field::rho2: out[i] = p.rho2; break;
    }
  }
  return out;
}

ProfilePoint eval_profile(const ModelParams& p, double x) { return ScalarProfile(p.nu).at(x); }

double R_front(double x) { return 0.75 / (1.0 + std::exp(2.0 * x)); }

double energy_identity_residual(const ModelParams& p, double x) {
  const ProfilePoint q = eval_profile(p, x);
  return p.m * q.rp * q.rp - Phi(p.m, q.r);
}

double ode_residual(const ModelParams& p, double x) {
  const ProfilePoint q = eval_profile(p, x);
  return -p.m * q.rpp + p.m * q.r - q.R * q.r + q.R * q.R * q.r;
}

KinkQuantities kink_quantities(double nu, double alpha) {
  if (!(nu > 0.0 && nu < 1.0)) throw domain_error("nu out of range", "kink_quantities: nu outside (0,1)");
  const double disc = 1.0 + 3.0 * (nu - 4.0 * alpha * alpha);
  if (!(disc > 0.0)) {
    std::ostringstream os;
    os << "kink_quantities: 4 alpha^2 - nu = " << 4.0 * alpha * alpha - nu << " >= 1/3, no real kink";
    throw domain_error("no kink", os.str());
  }
  const double m = m_from_nu(nu);
  const double sd = std::sqrt(disc);
  KinkQuantities k;
  k.k = alpha * std::sqrt(3.0 / (4.0 * m));
  k.omega_plus = alpha / 4.0 * (2.0 + sd);
  k.omega_minus = alpha / 4.0 * (2.0 - sd);
  k.rbar = std::sqrt((2.0 + sd) / 4.0);
  // c = (3α/2 − 2ω̃)/k with k² = 3α²/(4m); finite as α → 0
  k.c = std::sqrt(3.0 * m) * (4.0 * alpha * alpha - nu) / (1.0 + sd);
  k.c_printed = std::sqrt(3.0) * (4.0 * alpha * alpha - nu) / (1.0 + sd);
  k.omega = k.omega_plus + k.k * k.c;
  return k;
}

}  // namespace cgl
