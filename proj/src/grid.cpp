#include "cglpulse/grid.hpp"

#include <cmath>
#include <sstream>
#include <vector>

#include "cglpulse/errors.hpp"

namespace cgl {

namespace {

void check_order(int order) {
  if (order != 2 && order != 4 && order != 6 && order != 8)
    throw config_error("bad fd order", "fd_order must be one of 2, 4, 6, 8");
}

Grid finish(double X, int n, int order) {
  check_order(order);
  if (!(X > 0.0)) throw config_error("bad grid", "grid half-width must be positive");
  if (n % 2 == 0) throw config_error("bad grid", "grid point count must be odd");
  if (n < 2 * order + 3) {
    std::ostringstream os;
    os << "grid: n = " << n << " < 2*order+3 = " << 2 * order + 3;
    throw config_error("grid too small", os.str());
  }
  Grid g;
  g.X = X;
  g.n = n;
  g.fd_order = order;
  g.h = 2.0 * X / (n - 1);
  g.x.resize(n);
  const int c = (n - 1) / 2;
  for (int i = 0; i < n; ++i) g.x[i] = (i - c) * g.h;
  return g;
}

SpMat banded_toeplitz(int n, const Vec& center_and_right, int sign_left) {
  // entries at offset ±k, k ≥ 0; left entries multiplied by sign_left
  const int p = static_cast<int>(center_and_right.size()) - 1;
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(static_cast<size_t>(n) * (2 * p + 1));
  for (int i = 0; i < n; ++i) {
    for (int k = -p; k <= p; ++k) {
      const int j = i + k;
      if (j < 0 || j >= n) continue;
      const double w = center_and_right[std::abs(k)];
      if (w == 0.0) continue;
      t.emplace_back(i, j, k < 0 ? sign_left * w : w);
    }
  }
  SpMat M(n, n);
  M.setFromTriplets(t.begin(), t.end());
  return M;
}

}  // namespace

Grid Grid::make(double X, double h_max, int fd_order) {
  if (!(h_max > 0.0)) throw config_error("bad grid", "h_max must be positive");
  int intervals = static_cast<int>(std::ceil(2.0 * X / h_max - 1e-12));
  if (intervals % 2) ++intervals;
  return finish(X, intervals + 1, fd_order);
}

Grid Grid::with_points(double X, int n, int fd_order) { return finish(X, n, fd_order); }

Vec second_derivative_stencil(int order) {
  check_order(order);
  switch (order) {
    case 2: return (Vec(2) << -2.0, 1.0).finished();
    case 4: return (Vec(3) << -5.0 / 2, 4.0 / 3, -1.0 / 12).finished();
    case 6: return (Vec(4) << -49.0 / 18, 3.0 / 2, -3.0 / 20, 1.0 / 90).finished();
    default: return (Vec(5) << -205.0 / 72, 8.0 / 5, -1.0 / 5, 8.0 / 315, -1.0 / 560).finished();
  }
}

Vec first_derivative_stencil(int order) {
  check_order(order);
  switch (order) {
    case 2: return (Vec(1) << 0.5).finished();
    case 4: return (Vec(2) << 2.0 / 3, -1.0 / 12).finished();
    case 6: return (Vec(3) << 3.0 / 4, -3.0 / 20, 1.0 / 60).finished();
    default: return (Vec(4) << 4.0 / 5, -1.0 / 5, 4.0 / 105, -1.0 / 280).finished();
  }
}

OperatorMatrix build_laplacian(const Grid& g) {
  Vec w = -second_derivative_stencil(g.fd_order) / (g.h * g.h);
  OperatorMatrix op;
  op.M = banded_toeplitz(g.n, w, 1);
  op.symmetric = true;
  return op;
}

OperatorMatrix build_first_derivative(const Grid& g) {
  Vec s = first_derivative_stencil(g.fd_order);
  Vec w(s.size() + 1);
  w[0] = 0.0;
  w.tail(s.size()) = s / g.h;
  OperatorMatrix op;
  op.M = banded_toeplitz(g.n, w, -1);
  op.symmetric = false;
  return op;
}

Vec quadrature_weights(const Grid& g) {
  Vec w = Vec::Constant(g.n, g.h);
  w[0] = w[g.n - 1] = 0.5 * g.h;
  return w;
}

double quadrature(const Grid& g, const Vec& samples) {
  if (samples.size() != g.n)
    throw config_error("length mismatch", "quadrature: samples length differs from grid size");
  return quadrature_weights(g).dot(samples);
}

double inner(const Grid& g, const Vec& a, const Vec& b) { return quadrature(g, a.cwiseProduct(b)); }

double l2_norm(const Grid& g, const Vec& a) { return std::sqrt(inner(g, a, a)); }

double h1_norm(const Grid& g, const Vec& a) {
  const Vec d1 = build_first_derivative(g).M * a;
  return std::sqrt(inner(g, a, a) + inner(g, d1, d1));
}

double h2_norm(const Grid& g, const Vec& a) {
  const Vec d1 = build_first_derivative(g).M * a;
  const Vec d2 = build_laplacian(g).M * a;
  return std::sqrt(inner(g, a, a) + inner(g, d1, d1) + inner(g, d2, d2));
}

SpMat extension_matrix(const Grid& g, Parity p) {
  const int c = g.center();
  std::vector<Eigen::Triplet<double>> t;
  if (p == Parity::Full) {
    SpMat I(g.n, g.n);
    I.setIdentity();
    return I;
  }
  const int nh = g.half_size(p == Parity::Even);
  for (int j = 0; j < g.n; ++j) {
    if (p == Parity::Even) {
      t.emplace_back(j, std::abs(j - c), 1.0);
    } else if (j > c) {
      t.emplace_back(j, j - c - 1, 1.0);
    } else if (j < c) {
      t.emplace_back(j, c - j - 1, -1.0);
    }
  }
  SpMat E(g.n, nh);
  E.setFromTriplets(t.begin(), t.end());
  return E;
}

SpMat restriction_matrix(const Grid& g, Parity p) {
  if (p == Parity::Full) return extension_matrix(g, p);
  const int c = g.center();
  const int first = p == Parity::Even ? c : c + 1;
  const int nh = g.half_size(p == Parity::Even);
  std::vector<Eigen::Triplet<double>> t;
  for (int k = 0; k < nh; ++k) t.emplace_back(k, first + k, 1.0);
  SpMat R(nh, g.n);
  R.setFromTriplets(t.begin(), t.end());
  return R;
}

Vec restrict_to(const Grid& g, const Vec& full, Parity p) {
  if (p == Parity::Full) return full;
  const int first = p == Parity::Even ? g.center() : g.center() + 1;
  return full.segment(first, g.half_size(p == Parity::Even));
}

Vec extend_from(const Grid& g, const Vec& half, Parity p) {
  if (p == Parity::Full) return half;
  return extension_matrix(g, p) * half;
}

Vec sector_weights(const Grid& g, Parity p) {
  const Vec w = quadrature_weights(g);
  if (p == Parity::Full) return w;
  Vec ws = 2.0 * restrict_to(g, w, p);
  if (p == Parity::Even) ws[0] = w[g.center()];
  return ws;
}

Vec sector_adjoint_weights(const Grid& g, Parity p) {
  if (p == Parity::Full) return Vec::Ones(g.n);
  Vec c = Vec::Constant(g.half_size(p == Parity::Even), 2.0);
  if (p == Parity::Even) c[0] = 1.0;
  return c;
}

OperatorMatrix parity_restrict(const Grid& g, const OperatorMatrix& full, Parity p) {
  if (full.rows() != g.n) throw config_error("grid mismatch", "parity_restrict: operator size differs from grid");
  if (g.n % 2 == 0) throw config_error("asymmetric grid", "parity_restrict: grid has no center node");
  OperatorMatrix out;
  out.parity = p;
  if (p == Parity::Full) {
    out = full;
    return out;
  }
  out.M = restriction_matrix(g, p) * full.M * extension_matrix(g, p);
  out.M.makeCompressed();
  // odd sector inherits symmetry directly; even sector only after symmetrize_sector
  out.symmetric = full.symmetric && p == Parity::Odd;
  return out;
}

SpMat symmetrize_sector(const Grid& g, const SpMat& sector, Parity p) {
  const Vec c = sector_adjoint_weights(g, p);
  const Vec cs = c.cwiseSqrt();
  SpMat S = cs.asDiagonal() * sector * cs.cwiseInverse().asDiagonal();
  S.makeCompressed();
  return S;
}

}  // namespace cgl
