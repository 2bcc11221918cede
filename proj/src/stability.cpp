#include "cglpulse/stability.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "cglpulse/errors.hpp"
#include "cglpulse/phase.hpp"
#include "cglpulse/profiles.hpp"
#include "cglpulse/schrodinger.hpp"
#include "cglpulse/subspace_eigen.hpp"

namespace cgl {

namespace {

using Arr = Eigen::ArrayXd;
using Field = ScalarProfile::Field;

SpMat diag(const Vec& v) {
  SpMat D(v.size(), v.size());
  D.reserve(Eigen::VectorXi::Constant(v.size(), 1));
  for (Eigen::Index i = 0; i < v.size(); ++i) D.insert(i, i) = v[i];
  D.makeCompressed();
  return D;
}

double max_entry(const SpMat& M) {
  double out = 0.0;
  for (int j = 0; j < M.outerSize(); ++j)
    for (SpMat::InnerIterator it(M, j); it; ++it) out = std::max(out, std::abs(it.value()));
  return out;
}

double pair_norm(const Grid& g, const Vec& a, const Vec& b) { return std::hypot(l2_norm(g, a), l2_norm(g, b)); }

Vec sector_pair(const Grid& g, const Vec& a, const Vec& b, Parity par) {
  const Vec ra = restrict_to(g, a, par), rb = restrict_to(g, b, par);
  Vec out(ra.size() + rb.size());
  out << ra, rb;
  return out;
}

std::vector<cplx> ritz_range(const InvariantSubspace& s, int from, int to) {
  std::vector<cplx> out;
  for (int i = from; i < std::min<int>(to, static_cast<int>(s.ritz.size())); ++i) out.push_back(s.ritz[i]);
  return out;
}

}  // namespace

FJacobian jacobian_F(const Vec& u1v, const Vec& u2v, double alpha, double omega, double m, const Mu& mu, const Grid& g) {
  const SpMat lap = build_laplacian(g).M;
  const Arr u1 = u1v.array(), u2 = u2v.array();
  const Arr P = u1.square() + u2.square();
  const Arr a2 = u1 - alpha * mu.m2 * u2, a3 = u1 - alpha * mu.m3 * u2;
  const Arr b2 = u2 + alpha * mu.m2 * u1, b3 = u2 + alpha * mu.m3 * u1;
  const Arr j11 = m - P - 2.0 * u1 * a2 + P.square() + 4.0 * P * u1 * a3;
  const Arr j12 = -omega - alpha * mu.m1 + alpha * mu.m2 * P - 2.0 * u2 * a2 - alpha * mu.m3 * P.square() + 4.0 * P * u2 * a3;
  const Arr j21 = omega + alpha * mu.m1 - alpha * mu.m2 * P - 2.0 * u1 * b2 + alpha * mu.m3 * P.square() + 4.0 * P * u1 * b3;
  const Arr j22 = m - P - 2.0 * u2 * b2 + P.square() + 4.0 * P * u2 * b3;
  FJacobian J;
  J.J11 = m * lap + diag(j11.matrix());
  J.J12 = -alpha * mu.m0 * lap + diag(j12.matrix());
  J.J21 = alpha * mu.m0 * lap + diag(j21.matrix());
  J.J22 = m * lap + diag(j22.matrix());
  for (SpMat* M : {&J.J11, &J.J12, &J.J21, &J.J22}) {
    M->prune(0.0);
    M->makeCompressed();
  }
  return J;
}

std::array<Vec, 2> LinearizationBlocks::apply(const Vec& v1, const Vec& v2) const {
  return {D11 * v1 + D12 * v2, D21 * v1 + D22 * v2};
}

SpMat LinearizationBlocks::sector(Parity par) const {
  const Grid& g = *grid;
  const SpMat Rm = restriction_matrix(g, par), E = extension_matrix(g, par);
  const int nh = g.half_size(par == Parity::Even);
  std::vector<Eigen::Triplet<double>> t;
  auto put = [&](const SpMat& M, int r0, int c0) {
    const SpMat B = Rm * M * E;
    for (int j = 0; j < B.outerSize(); ++j)
      for (SpMat::InnerIterator it(B, j); it; ++it)
        if (it.value() != 0.0) t.emplace_back(r0 + it.row(), c0 + it.col(), it.value());
  };
  put(D11, 0, 0);
  put(D12, 0, nh);
  put(D21, nh, 0);
  put(D22, nh, nh);
  SpMat K(2 * nh, 2 * nh);
  K.setFromTriplets(t.begin(), t.end());
  K.makeCompressed();
  return K;
}

double LinearizationBlocks::decomposition_defect() const {
  const SpMat lap = build_laplacian(*grid).M;
  const double sk = std::sqrt(kappa);
  const SpMat r11 = D11 - A_flat - kappa * diag(C11);
  const SpMat r22 = D22 - B_flat - kappa * diag(C22);
  const SpMat r12 = D12 - sk * (diag(B12) + B12_lap * lap);
  const SpMat r21 = D21 - sk * (diag(B21) + B21_lap * lap);
  return std::max({max_entry(r11), max_entry(r22), max_entry(r12), max_entry(r21)});
}

LinearizationBlocks assemble_D(const AnsatzState& pulse, const Grid& g) {
  const ModelParams& p = pulse.params;
  const PulseFields& U = pulse.U;
  // at κ = 0 the pulse is real; Newton leaves ε at round-off
  const double alpha = p.kappa > 0.0 ? std::sqrt(std::max(U.eps, 0.0)) : 0.0;
  const Vec u2 = alpha * U.eta;
  const FJacobian J = jacobian_F(U.xi, u2, alpha, alpha * U.tau, p.m, p.mu, g);

  LinearizationBlocks D;
  D.grid = &g;
  D.params = p;
  D.params.eps = U.eps;
  D.params.tau = U.tau;
  D.kappa = p.kappa;
  const double k1 = 1.0 - p.kappa;
  D.D11 = J.J11 / k1;
  D.D12 = J.J12 / k1;
  D.D21 = J.J21 / k1;
  D.D22 = J.J22 / k1;

  const ModelParams fp = p.flat();
  D.A_flat = build_A(fp, g).M;
  D.B_flat = build_B(fp, g).M;
  const Eigen::Index n = g.n;
  D.B12 = D.B21 = D.C11 = D.C22 = Vec::Zero(n);
  if (p.kappa > 0.0) {
    const ScalarProfile prof(fp.nu);
    const Vec V = prof.sample(g.x, Field::V), W = prof.sample(g.x, Field::W);
    const double sk = std::sqrt(p.kappa);
    D.B12 = J.J12.diagonal() / (sk * k1);
    D.B21 = J.J21.diagonal() / (sk * k1);
    // the Laplacian part of J₁₂ contributes to the diagonal; strip it
    const SpMat lap = build_laplacian(g).M;
    const Vec lap_diag = lap.diagonal();
    D.B12 -= (-alpha * p.mu.m0) * lap_diag / (sk * k1);
    D.B21 -= (alpha * p.mu.m0) * lap_diag / (sk * k1);
    D.B12_lap = -alpha * p.mu.m0 / (sk * k1);
    D.B21_lap = alpha * p.mu.m0 / (sk * k1);
    const Vec j11 = J.J11.diagonal() - p.m * lap_diag;
    const Vec j22 = J.J22.diagonal() - p.m * lap_diag;
    D.C11 = (j11 / k1 - V) / p.kappa;
    D.C22 = (j22 / k1 - W) / p.kappa;
  }
  return D;
}

std::array<Vec, 2> phase_mode(const PulseFields& U) {
  const double a = std::sqrt(std::max(U.eps, 0.0));
  return {-a * U.eta, U.xi};
}

std::array<Vec, 2> translation_mode(const PulseFields& U, const Grid& g) {
  const SpMat D1 = build_first_derivative(g).M;
  const double a = std::sqrt(std::max(U.eps, 0.0));
  return {D1 * U.xi, a * (D1 * U.eta)};
}

StabilityReport small_spectrum_D(const LinearizationBlocks& D, const AnsatzState& pulse, const StabilityOptions& opt) {
  const Grid& g = *D.grid;
  const ModelParams& p = D.params;
  const double Lf = p.L_flat();
  StabilityReport rep;
  rep.params = p;
  rep.shift = std::isnan(opt.shift) ? -0.1 * p.m_flat() * M_PI * M_PI / (4.0 * Lf * Lf) : opt.shift;

  const auto t = phase_mode(pulse.U);
  const auto v = translation_mode(pulse.U, g);
  const auto Dt = D.apply(t[0], t[1]);
  const auto Dv = D.apply(v[0], v[1]);
  rep.phase_residual = pair_norm(g, Dt[0], Dt[1]) / pair_norm(g, t[0], t[1]);
  rep.translation_residual = pair_norm(g, Dv[0], Dv[1]) / pair_norm(g, v[0], v[1]);

  SubspaceOptions eo;
  eo.block = opt.even_block;
  eo.lead = 2;
  const InvariantSubspace even = shift_invert_subspace(D.sector(Parity::Even), rep.shift, eo);
  SubspaceOptions oo;
  oo.block = opt.odd_block;
  oo.lead = 1;
  const InvariantSubspace odd = shift_invert_subspace(D.sector(Parity::Odd), rep.shift, oo);
  rep.iterations = std::max(even.iterations, odd.iterations);
  if (!even.converged || !odd.converged) {
    std::ostringstream os;
    os << "small_spectrum_D: subspace iteration did not settle (even " << even.lead_residual << ", odd "
       << odd.lead_residual << ")";
    throw numeric_error("eigensolver failure", os.str());
  }

  // M11, M21 from the even invariant pair in the basis {P(s♭,0), P(iu)}
  const Eigen::MatrixXd Qc = even.Q.leftCols(2);
  const Eigen::Matrix2d Hc = even.H.topLeftCorner(2, 2);
  const Vec ws = sector_pair(g, pulse.flat.s, Vec::Zero(g.n), Parity::Even);
  const Vec ts = sector_pair(g, t[0], t[1], Parity::Even);
  const Eigen::Vector2d cw = Qc.transpose() * ws, ct = Qc.transpose() * ts;
  rep.phase_in_subspace = (ts - Qc * ct).norm() / ts.norm();
  Eigen::Matrix2d basis;
  basis << cw, ct;
  const Eigen::Vector2d m = basis.fullPivLu().solve(Hc * cw);
  rep.M11 = m[0];
  rep.M21 = m[1];
  if (p.kappa > 0.0) rep.M21_first_order = rep.M21 / std::sqrt(p.kappa);

  rep.small = ritz_range(even, 0, 2);
  for (const cplx& z : ritz_range(odd, 0, 1)) rep.small.push_back(z);
  rep.rest = ritz_range(even, 2, opt.even_block);
  for (const cplx& z : ritz_range(odd, 1, opt.odd_block)) rep.rest.push_back(z);
  auto by_modulus = [](const cplx& a, const cplx& b) { return std::abs(a) < std::abs(b); };
  std::stable_sort(rep.small.begin(), rep.small.end(), by_modulus);
  std::stable_sort(rep.rest.begin(), rep.rest.end(), by_modulus);

  double small_max = 0.0;
  for (const cplx& z : rep.small) small_max = std::max(small_max, std::abs(z));
  rep.spectrum_floor = std::numeric_limits<double>::infinity();
  for (const cplx& z : rep.rest) rep.spectrum_floor = std::min(rep.spectrum_floor, z.real());
  const double rest_min = rep.rest.empty() ? std::numeric_limits<double>::infinity() : std::abs(rep.rest.front());
  rep.cluster_ratio = small_max / rest_min;
  rep.cluster_ok = rep.cluster_ratio <= opt.cluster_ratio;

  rep.lambda_flat = pulse.flat.specA.values[even_ground_index(pulse.flat.specA)];
  rep.prediction = -1.5 * p.nu_flat + p.eps * M_PI * M_PI / (4.0 * Lf * Lf);

  if (!rep.cluster_ok && opt.throw_on_gap) {
    std::ostringstream os;
    os << "small_spectrum_D: cluster of 3 not separated, max|small| = " << small_max << ", min|rest| = " << rest_min;
    throw numeric_error("spectral gap", os.str());
  }
  if (std::abs(rep.M11) <= opt.critical_tol)
    rep.classification = "critical";
  else if (rep.M11 > 0.0 && rep.spectrum_floor > 0.0)
    rep.classification = "stable";
  else
    rep.classification = "unstable";
  return rep;
}

StabilityRun stability_at(const ModelParams& p, const Grid& g, const StabilityOptions& opt,
                          const std::optional<PulseFields>& seed, bool certify) {
  StabilityRun run;
  if (certify) {
    PulseOptions po;
    po.require_certificate = false;
    run.pulse = solve_pulse(p, g, po);
  } else {
    const FlatAnsatz fa = build_flat_ansatz(p, g);
    run.pulse = newton_pulse(p, g, fa, seed.value_or(fa.U));
  }
  const LinearizationBlocks D = assemble_D(run.pulse, g);
  run.report = small_spectrum_D(D, run.pulse, opt);
  return run;
}

double a_functional(double L, const Mu& mu, const Grid& g) {
  const ModelParams p = ModelParams::from_L(L, 0.0, mu);
  const PhaseSolution ph = solve_q(p, g, solve_theta(p, g, mu), mu);
  const ScalarProfile prof(p.nu);
  const Vec W = prof.sample(g.x, Field::W);
  const Vec qpp = (W.cwiseProduct(ph.q) - phase_rhs(p, g, ph.theta, mu)) / prof.m();
  const Arr r = prof.sample(g.x, Field::r).array(), q = ph.q.array();
  const Arr R = r.square();
  const Arr integrand = (-ph.theta - mu.m1 + mu.m2 * R - mu.m3 * R.square()) * q - r * q.square() +
                        2.0 * R * r * q.square() + mu.m0 * qpp.array();
  return inner(g, integrand.matrix(), prof.sample(g.x, Field::sigma));
}

double da_dL_differenced(double L, const Mu& mu, const Grid& g, double dL) {
  return (a_functional(L + dL, mu, g) - a_functional(L - dL, mu, g)) / (2.0 * dL);
}

M11Expansion m11_expansion_check(const AnsatzState& pulse, const StabilityReport& report, const Grid& g) {
  const ModelParams& p = pulse.params;
  const double Lf = p.L_flat();
  M11Expansion e;
  e.M11_measured = report.M11;
  e.M11_order0 = pulse.flat.specA.values[even_ground_index(pulse.flat.specA)];
  e.s_norm2 = std::pow(l2_norm(g, pulse.flat.s), 2);
  e.da_dL = da_dL_differenced(Lf, p.mu, g);
  e.da_dL_formula = da_dL_formula(Lf);
  e.M11_order2 = pulse.U.eps * e.da_dL / e.s_norm2;
  e.M11_order2_formula = pulse.U.eps * e.da_dL_formula / e.s_norm2;
  e.prediction = -1.5 * p.nu_flat + pulse.U.eps * M_PI * M_PI / (4.0 * Lf * Lf);
  return e;
}

AlphaCResult find_alpha_c(double L, const Mu& mu, const AlphaCOptions& opt) {
  AlphaCResult res;
  res.L = L;
  res.nu = nu_from_L(L);
  res.alpha_c_formula = alpha_c_formula(L);
  const double ymax = std::pow(L, opt.p_exponent);
  const Grid g = Grid::make(L + ymax + 40.0, opt.h);
  StabilityOptions so;
  so.throw_on_gap = false;

  struct Eval {
    bool ok = false;
    StabilityRun run;
  };
  auto eval = [&](double y, const std::optional<PulseFields>& seed) {
    Eval e;
    try {
      e.run = stability_at(ModelParams::from_L(L, y, mu), g, so, seed);
      e.ok = true;
    } catch (const Error& err) {
      // no pulse of this family at y: the ansatz has no positive ε
      if (err.kind() != ErrorKind::Regime) throw;
    }
    return e;
  };

  const int nsteps = std::max(1, static_cast<int>(std::ceil(ymax / opt.scan_step - 1e-9)));
  std::vector<Eval> evals;
  for (int k = 0; k <= nsteps; ++k) {
    const double y = std::min(ymax, k * opt.scan_step);
    std::optional<PulseFields> seed;
    if (!evals.empty() && evals.back().ok && k > 1) seed = evals.back().run.pulse.U;
    evals.push_back(eval(y, seed));
    const Eval& e = evals.back();
    res.scan.push_back({y, e.ok ? e.run.pulse.U.eps : std::numeric_limits<double>::quiet_NaN(),
                        e.ok ? e.run.report.M11 : std::numeric_limits<double>::quiet_NaN()});
  }
  int first = -1;
  for (size_t k = 1; k < res.scan.size(); ++k) {
    const double a = res.scan[k - 1].M11, b = res.scan[k].M11;
    if (std::isnan(a) || std::isnan(b)) continue;
    if ((a < 0.0) != (b < 0.0)) {
      ++res.sign_changes;
      if (first < 0 && a < 0.0) first = static_cast<int>(k);
    }
  }
  if (first < 0) return res;

  double ylo = res.scan[first - 1].y, yhi = res.scan[first].y;
  PulseFields seed = evals[first - 1].run.pulse.U;
  // y = 0 is the real pulse; it is a poor seed for ε > 0
  if (ylo == 0.0) seed = evals[first].run.pulse.U;
  while (yhi - ylo > opt.y_tol) {
    const double ym = 0.5 * (ylo + yhi);
    const Eval e = eval(ym, seed);
    if (!e.ok) throw numeric_error("bisection failure", "find_alpha_c: no pulse inside the bracket");
    seed = e.run.pulse.U;
    if (e.run.report.M11 < 0.0)
      ylo = ym;
    else
      yhi = ym;
  }
  res.found = true;
  res.y_c = 0.5 * (ylo + yhi);
  const Eval ec = eval(res.y_c, seed);
  if (!ec.ok) throw numeric_error("bisection failure", "find_alpha_c: no pulse at y_c");
  res.alpha_c_measured = std::sqrt(ec.run.pulse.U.eps);
  res.normalized_gap = (1.0 - 2.0 * res.alpha_c_measured / std::sqrt(res.nu)) * 48.0 * L * L / (M_PI * M_PI);
  res.yc_ratio = res.y_c / (0.5 * std::log(L));
  res.M21_at_c = ec.run.report.M21;
  res.M21_first_order_at_c = ec.run.report.M21_first_order;
  res.theta1_flat = ec.run.pulse.flat.phase.theta1;
  return res;
}

ChiResult chi_criterion(const Mu& mu) {
  const double den = 2.0 * mu.m2 - 15.0 * mu.m3 / 8.0;
  if (std::abs(den) <= 1e-14 * (std::abs(mu.m2) + std::abs(mu.m3) + 1.0))
    throw domain_error("criterion undefined", "chi_criterion: 2μ₂ − 15μ₃/8 vanishes");
  const double pi2 = M_PI * M_PI;
  ChiResult c;
  c.denominator = den * den;
  c.chi = (mu.m2 - 9.0 * mu.m3 / 8.0) * (pi2 * mu.m2 / 4.0 - 3.0 * pi2 * mu.m3 / 16.0 + 9.0 * mu.m3 / 16.0) / c.denominator;
  return c;
}

std::array<cplx, 3> linear_perturbation_flow(double a, double b, double omega, const std::array<cplx, 3>& d0, double t) {
  const double at = a * t;
  // (e^{−at} − 1)/a, with the a → 0 limit −t
  const double c = std::abs(at) < 1e-8 ? -t * (1.0 - 0.5 * at) : std::expm1(-at) / a;
  const cplx rot = std::polar(1.0, omega * t);
  return {rot * std::exp(-at) * d0[0], rot * (d0[1] + b * c * d0[0]), rot * d0[2]};
}

}  // namespace cgl
