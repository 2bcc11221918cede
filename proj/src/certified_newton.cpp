#include "cglpulse/certified_newton.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "cglpulse/errors.hpp"

namespace cgl {

Certificate certificate_constants(double d0, double M, double rho) {
  if (!(rho > 0.0) || !(M >= 0.0)) throw config_error("bad certificate input", "certificate needs rho > 0, M >= 0");
  Certificate c;
  c.rho = rho;
  c.M = M;
  c.a = M == 0.0 ? 1.0 : std::min(1.0, 1.0 / (2.0 * rho * M));
  c.K = 0.75 * c.a * rho;
  c.d0 = d0;
  c.hypothesis_ok = d0 <= c.K;
  c.bound1 = 2.0 * d0;
  c.bound2 = 2.0 * M * d0 * d0;
  return c;
}

CertifiedResult certify_and_solve(const CertifiedProblem& prob, const Vec& x0, double tol, int max_iter) {
  const Vec newton0 = prob.solve_A(prob.f(x0));  // A⁻¹z₀
  CertifiedResult res;
  res.cert = certificate_constants(prob.norm(newton0), prob.M, prob.rho);
  Certificate& c = res.cert;
  if (!c.hypothesis_ok) return res;

  // steps below this are round-off and their ratios carry no information
  const double noise = 1e-10 * std::max(1.0, prob.norm(x0));
  c.noise_floor = noise;
  Vec xi = Vec::Zero(x0.size());
  Vec step = -newton0;
  double prev = 0.0;
  for (int it = 1; it <= max_iter; ++it) {
    xi += step;
    const double s = prob.norm(step);
    c.steps.push_back(s);
    c.iterations = it;
    if (prev > noise && s > noise) {
      const double ratio = s / prev;
      c.max_ratio = std::max(c.max_ratio, ratio);
      if (ratio > 0.5 + 1e-6) {
        std::ostringstream os;
        os << "certify_and_solve: step ratio " << ratio << " > 1/2 at iteration " << it << " (M = " << c.M << ")";
        throw consistency_error("contraction violated", os.str());
      }
    }
    if (prob.norm(xi) > c.bound1 * (1.0 + 1e-9) + noise) {
      std::ostringstream os;
      os << "certify_and_solve: iterate left the ball, |xi| = " << prob.norm(xi) << " > 2 d0 = " << c.bound1;
      throw consistency_error("contraction violated", os.str());
    }
    if (s <= tol) break;
    // below the noise floor a non-decreasing step is round-off stagnation
    if (s <= noise && prev > 0.0 && s >= 0.5 * prev) break;
    prev = s;
    step = -prob.solve_A(prob.f(x0 + xi));
    if (!step.allFinite()) throw numeric_error("non-finite step", "certify_and_solve: non-finite chord step");
    if (it == max_iter && s > noise) throw numeric_error("no convergence", "certify_and_solve: iteration limit reached");
  }
  c.dist = prob.norm(xi);
  c.dist_newton = prob.norm(xi + newton0);
  // small slack for the round-off floor of the final iterate
  c.bounds_hold = c.dist <= c.bound1 * (1.0 + 1e-9) + noise && c.dist_newton <= c.bound2 * (1.0 + 1e-9) + noise;
  res.x = x0 + xi;
  return res;
}

}  // namespace cgl
