#include "cglpulse/params.hpp"

#include <cmath>
#include <sstream>

#include "cglpulse/errors.hpp"

namespace cgl {

double nu_L_convert(double value, Convert direction) {
  const double L_min = 0.25 * std::log(4.0);
  if (!std::isfinite(value)) throw domain_error("non-finite", "nu_L_convert: non-finite input");
  if (direction == Convert::NuToL) {
    if (!(value > 0.0 && value < 1.0)) {
      std::ostringstream os;
      os << "nu_L_convert: nu = " << value << " outside (0,1)";
      throw domain_error("nu out of range", os.str());
    }
    return 0.25 * std::log(4.0 / value);
  }
  if (!(value > L_min)) {
    std::ostringstream os;
    os << "nu_L_convert: L = " << value << " must exceed ln(4)/4 (nu < 1)";
    throw domain_error("L out of range", os.str());
  }
  return 4.0 * std::exp(-4.0 * value);
}

ModelParams ModelParams::from_nu(double nu, double y, Mu mu) {
  ModelParams p;
  p.L = L_from_nu(nu);
  p.nu = nu;
  p.m = m_from_nu(nu);
  p.mu = mu;
  if (!(y >= 0.0) || !std::isfinite(y)) throw domain_error("y out of range", "ModelParams: y must be >= 0");
  p.y = y;
  p.nu_flat = nu * std::exp(-4.0 * y);
  p.kappa = (nu - p.nu_flat) / (1.0 - p.nu_flat);
  return p;
}

ModelParams ModelParams::from_L(double L, double y, Mu mu) {
  ModelParams p = from_nu(nu_from_L(L), y, mu);
  p.L = L;
  return p;
}

double ModelParams::alpha() const { return std::sqrt(eps); }
double ModelParams::omega() const { return std::sqrt(eps) * tau; }

ModelParams ModelParams::flat() const {
  ModelParams f = from_nu(nu_flat, 0.0, mu);
  f.L = L + y;
  return f;
}

void ModelParams::validate() const {
  auto fail = [](const std::string& msg) { throw domain_error("inconsistent params", "ModelParams: " + msg); };
  if (!(nu > 0.0 && nu < 1.0)) fail("nu outside (0,1)");
  if (std::abs(m - m_from_nu(nu)) > 1e-15) fail("m != 3(1-nu)/16");
  if (std::abs(nu - nu_from_L(L)) > 1e-13 * nu) fail("nu != 4 exp(-4L)");
  if (!(nu_flat > 0.0 && nu_flat <= nu)) fail("nu_flat outside (0, nu]");
  if (!(kappa >= 0.0 && kappa < nu)) fail("kappa outside [0, nu)");
  if (!(eps >= 0.0)) fail("eps < 0");
}

}  // namespace cgl
