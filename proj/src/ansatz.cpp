#include "cglpulse/ansatz.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include <unsupported/Eigen/Polynomials>

#include "cglpulse/bordered.hpp"
#include "cglpulse/errors.hpp"
#include "cglpulse/polynomial.hpp"
#include "cglpulse/profiles.hpp"

namespace cgl {

namespace {

using Field = ScalarProfile::Field;
using Arr = Eigen::ArrayXd;

// Pointwise parts g₁, g₂ of G (everything except the second derivatives).
struct GPolys {
  Poly4 g[2];
  Poly4 d[2][4];
  Poly4 h[2][4][4];  // second derivatives, h[k][b][c] = h[k][c][b]
};

GPolys make_gpolys(double m, const Mu& mu) {
  const Poly4 X = Poly4::var(Poly4::Xi), Y = Poly4::var(Poly4::Eta), T = Poly4::var(Poly4::Tau),
              E = Poly4::var(Poly4::Eps);
  const Poly4 P = X * X + E * Y * Y;
  GPolys gp;
  gp.g[0] = -(E * T * Y) + m * X - mu.m1 * (E * Y) - P * (X - mu.m2 * (E * Y)) + P * P * (X - mu.m3 * (E * Y));
  gp.g[1] = T * X + m * Y + mu.m1 * X - P * (Y + mu.m2 * X) + P * P * (Y + mu.m3 * X);
  for (int k = 0; k < 2; ++k)
    for (int b = 0; b < 4; ++b) {
      gp.d[k][b] = gp.g[k].derivative(b);
      for (int c = 0; c < 4; ++c) gp.h[k][b][c] = gp.d[k][b].derivative(c);
    }
  return gp;
}

// Σ c ξ^a η^b τ^c ε^d over nodes, with the powers of the fields tabulated.
Arr eval_poly(const Poly4& p, const Arr& xi, const Arr& eta, double tau, double eps) {
  Arr out = Arr::Zero(xi.size());
  if (p.is_zero()) return out;
  std::vector<Arr> xp{Arr::Ones(xi.size())}, ep{Arr::Ones(xi.size())};
  for (const auto& [e, c] : p.terms()) {
    while (static_cast<int>(xp.size()) <= e[0]) xp.push_back(xp.back() * xi);
    while (static_cast<int>(ep.size()) <= e[1]) ep.push_back(ep.back() * eta);
    out += c * std::pow(tau, e[2]) * std::pow(eps, e[3]) * xp[e[0]] * ep[e[1]];
  }
  return out;
}

SpMat diag(const Vec& v) {
  SpMat D(v.size(), v.size());
  D.reserve(Eigen::VectorXi::Constant(v.size(), 1));
  for (Eigen::Index i = 0; i < v.size(); ++i) D.insert(i, i) = v[i];
  D.makeCompressed();
  return D;
}

// (ξ, η, τ, ε) packed on the even sector
struct SectorMap {
  const Grid* g;
  int nh;
  SpMat E;
  Vec w;
  explicit SectorMap(const Grid& grid)
      : g(&grid), nh(grid.half_size(true)), E(extension_matrix(grid, Parity::Even)), w(sector_weights(grid, Parity::Even)) {}

  Vec pack(const PulseFields& U) const {
    Vec x(2 * nh + 2);
    x.head(nh) = restrict_to(*g, U.xi, Parity::Even);
    x.segment(nh, nh) = restrict_to(*g, U.eta, Parity::Even);
    x[2 * nh] = U.tau;
    x[2 * nh + 1] = U.eps;
    return x;
  }
  PulseFields unpack(const Vec& x) const {
    return {E * x.head(nh), E * x.segment(nh, nh), x[2 * nh], x[2 * nh + 1]};
  }
};

// Gram matrix of the discrete H² norm on the even sector.
SpMat h2_gram(const Grid& g) {
  const SpMat D1 = build_first_derivative(g).M;
  const SpMat D2 = build_laplacian(g).M;
  const SpMat W = diag(quadrature_weights(g));
  const SpMat E = extension_matrix(g, Parity::Even);
  SpMat G = W;
  G += SpMat(D1.transpose() * W * D1);
  G += SpMat(D2.transpose() * W * D2);
  SpMat Gs = E.transpose() * G * E;
  Gs.makeCompressed();
  return Gs;
}

}  // namespace

Grid pulse_grid(const ModelParams& p, double h, int fd_order, double margin) {
  return Grid::make(p.L + p.y + margin, h, fd_order);
}

GResidual JacobianG::apply(const PulseFields& d) const {
  GResidual r;
  r.G1 = J11 * d.xi + J12 * d.eta + J13 * d.tau + J14 * d.eps;
  r.G2 = J21 * d.xi + J22 * d.eta + J23 * d.tau + J24 * d.eps;
  return r;
}

GResidual residual_G(const PulseFields& U, const ModelParams& p, const Grid& g) {
  const GPolys gp = make_gpolys(p.m, p.mu);
  const SpMat lap = build_laplacian(g).M;  // −d²
  const Arr xi = U.xi.array(), eta = U.eta.array();
  GResidual r;
  r.G1 = p.m * (lap * U.xi) - U.eps * p.mu.m0 * (lap * U.eta) + eval_poly(gp.g[0], xi, eta, U.tau, U.eps).matrix();
  r.G2 = p.m * (lap * U.eta) + p.mu.m0 * (lap * U.xi) + eval_poly(gp.g[1], xi, eta, U.tau, U.eps).matrix();
  return r;
}

JacobianG jacobian_G(const PulseFields& U, const ModelParams& p, const Grid& g) {
  const GPolys gp = make_gpolys(p.m, p.mu);
  const SpMat lap = build_laplacian(g).M;
  const Arr xi = U.xi.array(), eta = U.eta.array();
  auto d = [&](int k, int b) { return Vec(eval_poly(gp.d[k][b], xi, eta, U.tau, U.eps).matrix()); };
  JacobianG J;
  J.J11 = p.m * lap + diag(d(0, 0));
  J.J12 = -U.eps * p.mu.m0 * lap + diag(d(0, 1));
  J.J13 = d(0, 2);
  J.J14 = d(0, 3) - p.mu.m0 * (lap * U.eta);
  J.J21 = p.mu.m0 * lap + diag(d(1, 0));
  J.J22 = p.m * lap + diag(d(1, 1));
  J.J23 = d(1, 2);
  J.J24 = d(1, 3);
  for (SpMat* M : {&J.J11, &J.J12, &J.J21, &J.J22}) {
    M->prune(0.0);
    M->makeCompressed();
  }
  return J;
}

AnsatzCoefficients ansatz_coefficients(const ModelParams& fp, const Grid& g, const Vec& s, const PhaseSolution& ph) {
  const ScalarProfile prof(fp.nu);
  const Vec r = prof.sample(g.x, Field::r);
  const Vec W = prof.sample(g.x, Field::W);
  const Vec& q = ph.q;
  const Mu& mu = fp.mu;
  // B q = f gives q'' without differencing
  const Vec qpp = (W.cwiseProduct(q) - phase_rhs(fp, g, ph.theta, mu)) / prof.m();
  const Arr R = r.array().square();
  const Arr ra = r.array(), qa = q.array();
  AnsatzCoefficients a;
  a.a0 = inner(g, Vec((R * R * ra - R * ra).matrix()), s);
  const Arr a1 = (-ph.theta - mu.m1 + mu.m2 * R - mu.m3 * R * R) * qa - qa.square() * ra + 2.0 * R * ra * qa.square() +
                 mu.m0 * qpp.array();
  a.a1 = inner(g, a1.matrix(), s);
  const Arr q3 = qa.cube();
  a.a2 = inner(g, Vec((mu.m2 * q3 - 2.0 * mu.m3 * R * q3 + ra * q3 * qa).matrix()), s);
  a.a3 = -mu.m3 * inner(g, Vec((q3 * qa.square()).matrix()), s);
  return a;
}

double eps_flat(const AnsatzCoefficients& a, double kappa) {
  if (kappa == 0.0) return 0.0;
  const double c0 = kappa * a.a0;
  auto fail = [&](const std::string& why) {
    std::ostringstream os;
    os << "eps_flat: " << why << " (kappa a0 = " << c0 << ", a1 = " << a.a1 << ", a2 = " << a.a2 << ", a3 = " << a.a3
       << ")";
    throw regime_error("ansatz range", os.str());
  };
  std::vector<double> roots;
  if (a.a3 == 0.0) {
    if (a.a2 == 0.0) {
      if (a.a1 == 0.0) fail("degenerate polynomial");
      roots.push_back(-c0 / a.a1);
    } else {
      const double disc = a.a1 * a.a1 - 4.0 * c0 * a.a2;
      if (disc < 0.0) fail("negative discriminant");
      const double qq = -0.5 * (a.a1 + std::copysign(std::sqrt(disc), a.a1));
      if (qq != 0.0) {
        roots.push_back(qq / a.a2);
        roots.push_back(c0 / qq);
      }
    }
  } else {
    Eigen::Vector4d coeffs(c0, a.a1, a.a2, a.a3);
    Eigen::PolynomialSolver<double, 3> solver(coeffs);
    std::vector<double> real;
    solver.realRoots(real, 1e-10);
    for (double e : real) {
      // polish: the companion eigenvalues lose relative accuracy for tiny roots
      for (int it = 0; it < 20; ++it) {
        const double f = ((a.a3 * e + a.a2) * e + a.a1) * e + c0;
        const double df = (3.0 * a.a3 * e + 2.0 * a.a2) * e + a.a1;
        if (df == 0.0) break;
        const double step = f / df;
        e -= step;
        if (std::abs(step) <= 1e-16 * std::abs(e)) break;
      }
      roots.push_back(e);
    }
  }
  double best = -1.0;
  for (double e : roots)
    if (e > 0.0 && (best < 0.0 || e < best)) best = e;
  if (best < 0.0) fail("no positive root");
  return best;
}

FlatAnsatz build_flat_ansatz(const ModelParams& p, const Grid& g) {
  FlatAnsatz fa;
  fa.params = p;
  fa.flat = p.flat();
  fa.specA = low_spectrum(g, build_A(fa.flat, g), 3, fa.flat.m, 'A');
  fa.s = s_as_Pi_sigma(fa.flat, g, fa.specA);
  fa.phase = solve_phase(fa.flat, g, p.mu);
  fa.r = ScalarProfile(fa.flat.nu).sample(g.x, Field::r);
  fa.a = ansatz_coefficients(fa.flat, g, fa.s, fa.phase);
  fa.eps = eps_flat(fa.a, p.kappa);
  fa.U = {fa.r, fa.phase.q, fa.phase.theta, fa.eps};
  return fa;
}

GResidual residual_G_reduced(const FlatAnsatz& fa, const Grid& g) {
  const ModelParams& fp = fa.flat;
  const Mu& mu = fp.mu;
  const ScalarProfile prof(fp.nu);
  const Vec W = prof.sample(g.x, Field::W);
  const Vec f = phase_rhs(fp, g, fa.phase.theta, mu);
  const Vec qpp = (W.cwiseProduct(fa.phase.q) - f) / prof.m();
  const Arr r = fa.r.array(), q = fa.phase.q.array(), R = r.square();
  const double k = fa.params.kappa, e = fa.eps, th = fa.phase.theta;

  GResidual out;
  const Arr lin1 = (-th - mu.m1 + mu.m2 * R - mu.m3 * R * R) * q - q.square() * r + 2.0 * R * r * q.square() +
                   mu.m0 * qpp.array();
  const Arr q3 = q.cube();
  out.G1 = (k * (R * R * r - R * r) + e * lin1 + e * e * (mu.m2 * q3 - 2.0 * mu.m3 * R * q3 + r * q3 * q) -
            e * e * e * mu.m3 * q3 * q.square())
               .matrix();
  const Arr lin2 = -q.square() * (q + mu.m2 * r) + 2.0 * R * q.square() * (q + mu.m3 * r);
  out.G2 = (-k * (f.array() + (R - R * R) * q) + e * lin2 + e * e * q3 * q * (q + mu.m3 * r)).matrix();
  return out;
}

StructuredG structured_G(const FlatAnsatz& fa, const Grid& g) {
  StructuredG G;
  G.grid = &g;
  PulseFields base = fa.U;
  base.eps = 0.0;
  G.J = jacobian_G(base, fa.flat, g);
  G.r = fa.r;
  G.s = fa.s;
  return G;
}

PulseFields solve_structured_triangular(const StructuredG& G, const Vec& h1, const Vec& h2) {
  const Grid& g = *G.grid;
  PulseFields u;
  u.eps = inner(g, h1, G.s) / inner(g, G.J.J14, G.s);
  u.xi = solve_bordered(g, G.J.J11, Parity::Even, G.s, G.s, h1 - u.eps * G.J.J14).x;
  const Vec k = h2 - G.J.J21 * u.xi - u.eps * G.J.J24;
  u.tau = inner(g, k, G.r) / inner(g, G.J.J23, G.r);
  u.eta = solve_bordered(g, G.J.J22, Parity::Even, G.r, G.r, k - u.tau * G.J.J23).x;
  return u;
}

SpMat assemble_bordered(const Grid& g, const JacobianG& J, const Vec& s, const Vec& r) {
  const SectorMap sm(g);
  const int nh = sm.nh;
  const SpMat Rm = restriction_matrix(g, Parity::Even);
  std::vector<Eigen::Triplet<double>> t;
  auto put_block = [&](const SpMat& M, int r0, int c0) {
    const SpMat B = Rm * M * sm.E;
    for (int j = 0; j < B.outerSize(); ++j)
      for (SpMat::InnerIterator it(B, j); it; ++it)
        if (it.value() != 0.0) t.emplace_back(r0 + it.row(), c0 + it.col(), it.value());
  };
  auto put_col = [&](const Vec& v, int r0, int c) {
    const Vec h = restrict_to(g, v, Parity::Even);
    for (int i = 0; i < nh; ++i)
      if (h[i] != 0.0) t.emplace_back(r0 + i, c, h[i]);
  };
  put_block(J.J11, 0, 0);
  put_block(J.J12, 0, nh);
  put_block(J.J21, nh, 0);
  put_block(J.J22, nh, nh);
  put_col(J.J13, 0, 2 * nh);
  put_col(J.J14, 0, 2 * nh + 1);
  put_col(J.J23, nh, 2 * nh);
  put_col(J.J24, nh, 2 * nh + 1);
  const Vec cs = sm.w.cwiseProduct(restrict_to(g, s, Parity::Even));
  const Vec cr = sm.w.cwiseProduct(restrict_to(g, r, Parity::Even));
  for (int i = 0; i < nh; ++i) {
    t.emplace_back(2 * nh, i, cs[i]);
    t.emplace_back(2 * nh + 1, nh + i, cr[i]);
  }
  SpMat K(2 * nh + 2, 2 * nh + 2);
  K.setFromTriplets(t.begin(), t.end());
  K.makeCompressed();
  return K;
}

PulseFields solve_structured_monolithic(const StructuredG& G, const Vec& h1, const Vec& h2) {
  const Grid& g = *G.grid;
  const SectorMap sm(g);
  const FieldBorderLU lu(assemble_bordered(g, G.J, G.s, G.r), sm.nh, 2);
  Vec b = Vec::Zero(2 * sm.nh + 2);
  b.head(sm.nh) = restrict_to(g, h1, Parity::Even);
  b.segment(sm.nh, sm.nh) = restrict_to(g, h2, Parity::Even);
  return sm.unpack(lu.solve(b));
}

namespace {

// Everything needed to evaluate the certificate constants for one bordered system.
struct CertSetup {
  const Grid* g;
  SectorMap sm;
  SpMat Gs;  // H² Gram on the sector
  FieldBorderLU lu;
  GPolys gp;
  Mu mu;
  PulseFields U0;
  Vec d;                       // A⁻¹z₀
  std::array<double, 4> dnorm; // its block norms
  double N[4][2];              // ‖block (a, k) of A⁻¹‖, L² → H² or |·|

  explicit CertSetup(const Grid& grid) : g(&grid), sm(grid) {}

  double block_norm(const Vec& x, int a) const {
    const int nh = sm.nh;
    if (a < 2) {
      const auto v = x.segment(a * nh, nh);
      return std::sqrt(std::max(0.0, v.dot(Gs * v)));
    }
    return std::abs(x[2 * nh + a - 2]);
  }

  double weighted_norm(const Vec& x, const NormWeights& w) const {
    const double n0 = block_norm(x, 0), n1 = w.eta * block_norm(x, 1), n2 = w.tau * block_norm(x, 2),
                 n3 = w.eps * block_norm(x, 3);
    return std::sqrt(n0 * n0 + n1 * n1 + n2 * n2 + n3 * n3);
  }

  // operator norm of v ↦ P_a A⁻¹ I_k v with the L² norm on v
  double operator_norm(int a, int k) {
    const int nh = sm.nh, N2 = 2 * nh + 2;
    const Vec& w = sm.w;
    auto adjoint_in = [&](const Vec& y) {  // I_kᵀ A⁻ᵀ y, then W⁻¹
      const Vec z = lu.solve_transpose(y);
      return Vec(z.segment(k * nh, nh).cwiseQuotient(w));
    };
    if (a >= 2) {
      Vec e = Vec::Zero(N2);
      e[2 * nh + a - 2] = 1.0;
      const Vec y = adjoint_in(e);
      return std::sqrt(y.dot(w.cwiseProduct(y)));
    }
    Vec v = Vec::LinSpaced(nh, 1.0, 2.0);
    v /= std::sqrt(v.dot(w.cwiseProduct(v)));
    double est = 0.0;
    for (int it = 0; it < 60; ++it) {
      Vec b = Vec::Zero(N2);
      b.segment(k * nh, nh) = v;
      const Vec u = lu.solve(b);
      Vec y = Vec::Zero(N2);
      y.segment(a * nh, nh) = Gs * u.segment(a * nh, nh);
      const Vec back = adjoint_in(y);
      const double next = std::sqrt(std::max(0.0, v.dot(w.cwiseProduct(back))));
      const double nb = std::sqrt(back.dot(w.cwiseProduct(back)));
      if (!(nb > 0.0)) break;
      v = back / nb;
      const bool done = it > 5 && std::abs(next - est) <= 1e-7 * next;
      est = next;
      if (done) break;
    }
    return est;
  }

  // M ≥ sup_{|ζ|≤ρ} ‖A⁻¹D²F(U₀+ζ)‖ in the weighted norm, inflated by 10%
  double M_bound(double rho, const NormWeights& w) const {
    const double om[4] = {w.xi, w.eta, w.tau, w.eps};
    const Arr xi = U0.xi.array().abs() + rho / (std::sqrt(2.0) * w.xi);
    const Arr eta = U0.eta.array().abs() + rho / (std::sqrt(2.0) * w.eta);
    const double tau = std::abs(U0.tau) + rho / w.tau, eps = std::abs(U0.eps) + rho / w.eps;
    const Vec qw = quadrature_weights(*g);
    double gk[2];
    for (int k = 0; k < 2; ++k) {
      Eigen::Matrix4d beta = Eigen::Matrix4d::Zero();
      for (int b = 0; b < 4; ++b)
        for (int c = b; c < 4; ++c) {
          const Poly4& H = gp.h[k][b][c];
          if (H.is_zero()) continue;
          const Arr vals = eval_poly(H.abs(), xi, eta, tau, eps);
          const int fields = (b < 2) + (c < 2);
          double bnd;
          if (fields == 2)
            bnd = vals.maxCoeff() / std::sqrt(2.0);
          else if (fields == 1)
            bnd = vals.maxCoeff();
          else
            bnd = std::sqrt((qw.array() * vals.square()).sum());
          beta(b, c) = beta(c, b) = bnd;
        }
      // ε μ₀ η'' in row 1: ‖η''‖ ≤ ‖η‖_{H²}
      if (k == 0 && mu.m0 != 0.0) {
        beta(1, 3) += std::abs(mu.m0);
        beta(3, 1) += std::abs(mu.m0);
      }
      for (int b = 0; b < 4; ++b)
        for (int c = 0; c < 4; ++c) beta(b, c) /= om[b] * om[c];
      Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(beta, Eigen::EigenvaluesOnly);
      gk[k] = es.eigenvalues().cwiseAbs().maxCoeff();
    }
    double sum = 0.0;
    for (int a = 0; a < 4; ++a) {
      const double t = om[a] * (N[a][0] * gk[0] + N[a][1] * gk[1]);
      sum += t * t;
    }
    return 1.1 * std::sqrt(sum);
  }

  double d0(const NormWeights& w) const {
    const double om[4] = {w.xi, w.eta, w.tau, w.eps};
    double s = 0.0;
    for (int a = 0; a < 4; ++a) s += om[a] * om[a] * dnorm[a] * dnorm[a];
    return std::sqrt(s);
  }

  // largest ρ with 2ρM(ρ) ≤ 1 (then a = 1 and K = 3ρ/4 is maximal)
  double best_rho(const NormWeights& w) const {
    const double base = std::max(d0(w), 1e-300);
    double lo = base * 1e-6;
    if (2.0 * lo * M_bound(lo, w) > 1.0) return lo;
    double hi = lo;
    for (int i = 0; i < 80 && 2.0 * hi * M_bound(hi, w) <= 1.0; ++i) hi *= 10.0;
    if (2.0 * hi * M_bound(hi, w) <= 1.0) return hi;
    lo = hi / 10.0;
    for (int i = 0; i < 30; ++i) {
      const double mid = std::sqrt(lo * hi);
      (2.0 * mid * M_bound(mid, w) <= 1.0 ? lo : hi) = mid;
    }
    return lo;
  }

  double margin(const NormWeights& w) const {
    const double rho = best_rho(w);
    const Certificate c = certificate_constants(d0(w), M_bound(rho, w), rho);
    return c.K / std::max(c.d0, 1e-300);
  }
};

NormWeights optimize_weights(const CertSetup& cs) {
  // coordinate search on log ω_η, log ω_τ, log ω_ε
  std::array<double, 3> l{0.0, 0.0, 0.0};
  auto weights = [](const std::array<double, 3>& v) { return NormWeights{1.0, std::exp(v[0]), std::exp(v[1]), std::exp(v[2])}; };
  double best = cs.margin(weights(l));
  for (double step = 4.0; step >= 0.1; step *= 0.5) {
    bool improved = true;
    while (improved) {
      improved = false;
      for (int k = 0; k < 3; ++k)
        for (double sgn : {1.0, -1.0}) {
          auto trial = l;
          trial[k] += sgn * step;
          const double m = cs.margin(weights(trial));
          if (m > best * (1.0 + 1e-9)) {
            best = m;
            l = trial;
            improved = true;
          }
        }
    }
  }
  return weights(l);
}

void check_regime(const ModelParams& p, double p_exponent) {
  const double ymax = std::pow(p.L, p_exponent);
  if (p.y > ymax) {
    std::ostringstream os;
    os << "solve_pulse: y = " << p.y << " exceeds L^p = " << ymax;
    throw regime_error("y out of range", os.str());
  }
}

Vec constraint_residual(const SectorMap& sm, const FlatAnsatz& fa, const PulseFields& U) {
  Vec c(2);
  c[0] = inner(*sm.g, U.xi - fa.r, fa.s);
  c[1] = inner(*sm.g, U.eta - fa.phase.q, fa.r);
  return c;
}

Vec bordered_residual(const SectorMap& sm, const FlatAnsatz& fa, const ModelParams& p, const Vec& x) {
  const PulseFields U = sm.unpack(x);
  const GResidual G = residual_G(U, p, *sm.g);
  Vec out(2 * sm.nh + 2);
  out.head(sm.nh) = restrict_to(*sm.g, G.G1, Parity::Even);
  out.segment(sm.nh, sm.nh) = restrict_to(*sm.g, G.G2, Parity::Even);
  out.tail(2) = constraint_residual(sm, fa, U);
  return out;
}

void finish_state(AnsatzState& st, const Grid& g) {
  const ModelParams& p = st.params;
  st.residual_norm = residual_G(st.U, p, g).sup();
  st.params.eps = st.U.eps;
  st.params.tau = st.U.tau;
  st.eps1 = st.U.eps - st.flat.eps;
  st.tau1 = st.U.tau - st.flat.U.tau;
}

}  // namespace

AnsatzState newton_pulse(const ModelParams& p, const Grid& g, const FlatAnsatz& fa, const PulseFields& start,
                         double residual_tol, int max_iter) {
  const SectorMap sm(g);
  Vec x = sm.pack(start);
  AnsatzState st;
  st.params = p;
  st.flat = fa;
  st.method = "newton";
  st.flat_residual = residual_G(fa.U, p, g).sup();
  double res = 0.0;
  for (int it = 0; it <= max_iter; ++it) {
    const Vec F = bordered_residual(sm, fa, p, x);
    res = F.cwiseAbs().maxCoeff();
    if (!std::isfinite(res)) throw numeric_error("non-finite residual", "newton_pulse: residual is not finite");
    if (res <= residual_tol && it > 0) break;
    if (it == max_iter) break;
    const FieldBorderLU lu(assemble_bordered(g, jacobian_G(sm.unpack(x), p, g), fa.s, fa.r), sm.nh, 2);
    const Vec dx = lu.solve(F);
    x -= dx;
    if (dx.cwiseAbs().maxCoeff() <= 1e-15 * std::max(1.0, x.cwiseAbs().maxCoeff()) &&
        bordered_residual(sm, fa, p, x).cwiseAbs().maxCoeff() <= residual_tol)
      break;
  }
  st.U = sm.unpack(x);
  finish_state(st, g);
  if (!(st.residual_norm <= residual_tol)) {
    std::ostringstream os;
    os << "newton_pulse: residual " << st.residual_norm << " above " << residual_tol;
    throw numeric_error("no convergence", os.str());
  }
  return st;
}

AnsatzState solve_pulse(const ModelParams& p, const Grid& g, const PulseOptions& opt) {
  p.validate();
  check_regime(p, opt.p_exponent);
  FlatAnsatz fa = build_flat_ansatz(p, g);

  CertSetup cs(g);
  const SectorMap& sm = cs.sm;
  cs.Gs = h2_gram(g);
  cs.gp = make_gpolys(p.m, p.mu);
  cs.mu = p.mu;
  cs.U0 = fa.U;
  cs.lu.compute(assemble_bordered(g, jacobian_G(fa.U, p, g), fa.s, fa.r), sm.nh, 2);
  const Vec x0 = sm.pack(fa.U);
  cs.d = cs.lu.solve(bordered_residual(sm, fa, p, x0));
  for (int a = 0; a < 4; ++a) cs.dnorm[a] = cs.block_norm(cs.d, a);
  for (int a = 0; a < 4; ++a)
    for (int k = 0; k < 2; ++k) cs.N[a][k] = cs.operator_norm(a, k);

  AnsatzState st;
  st.params = p;
  st.flat = fa;
  st.flat_residual = residual_G(fa.U, p, g).sup();
  st.weights = opt.optimize_weights ? optimize_weights(cs) : NormWeights{};
  const NormWeights w = st.weights;
  const double rho = cs.best_rho(w);

  CertifiedProblem prob;
  prob.f = [&](const Vec& x) { return bordered_residual(sm, fa, p, x); };
  prob.solve_A = [&](const Vec& v) { return Vec(cs.lu.solve(v)); };
  prob.norm = [&](const Vec& x) { return cs.weighted_norm(x, w); };
  prob.rho = rho;
  prob.M = cs.M_bound(rho, w);
  const CertifiedResult cr = certify_and_solve(prob, x0, opt.tol);
  st.cert = cr.cert;

  if (!cr.x) {
    if (opt.require_certificate) {
      std::ostringstream os;
      os << "solve_pulse: Newton-Kantorovich hypothesis fails, d0 = " << cr.cert.d0 << " > K = " << cr.cert.K
         << " (M = " << cr.cert.M << ", rho = " << cr.cert.rho << ")";
      throw regime_error("certification failed", os.str());
    }
    AnsatzState nt = newton_pulse(p, g, fa, fa.U, opt.residual_tol);
    nt.cert = st.cert;
    nt.weights = w;
    nt.correction_norm = cs.weighted_norm(sm.pack(nt.U) - x0, w);
    return nt;
  }

  st.U = sm.unpack(*cr.x);
  st.certified = true;
  st.method = "certified";
  st.correction_norm = cs.weighted_norm(*cr.x - x0, w);
  finish_state(st, g);
  if (!(st.residual_norm <= opt.residual_tol)) {
    std::ostringstream os;
    os << "solve_pulse: certified iterate has residual " << st.residual_norm;
    throw numeric_error("no convergence", os.str());
  }
  return st;
}

Vec pulse_phase(const PulseFields& U) {
  const Eigen::Index n = U.xi.size(), c = (n - 1) / 2;
  const double se = std::sqrt(std::max(U.eps, 0.0));
  Vec ph(n);
  for (Eigen::Index i = 0; i < n; ++i) ph[i] = std::atan2(se * U.eta[i], U.xi[i]);
  auto unwrap = [&](Eigen::Index from, Eigen::Index to, int dir) {
    for (Eigen::Index i = from + dir; dir > 0 ? i <= to : i >= to; i += dir) {
      double d = ph[i] - ph[i - dir];
      while (d > M_PI) { ph[i] -= 2.0 * M_PI; d -= 2.0 * M_PI; }
      while (d < -M_PI) { ph[i] += 2.0 * M_PI; d += 2.0 * M_PI; }
    }
  };
  unwrap(c, n - 1, 1);
  unwrap(c, 0, -1);
  return ph;
}

}  // namespace cgl
