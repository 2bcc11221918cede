#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace cgl {

using Vec = Eigen::VectorXd;
using SpMat = Eigen::SparseMatrix<double>;

// Uniform symmetric mesh on [−X, X]; n odd so that x = 0 is node c = (n−1)/2.
struct Grid {
  double X = 0.0;
  int n = 0;
  double h = 0.0;
  int fd_order = 8;
  Vec x;

  // Smallest odd n with spacing ≤ h_max.
  static Grid make(double X, double h_max, int fd_order = 8);
  static Grid with_points(double X, int n, int fd_order = 8);

  int center() const { return (n - 1) / 2; }
  int half_size(bool even) const { return even ? (n + 1) / 2 : (n - 1) / 2; }
};

enum class Parity { Full, Even, Odd };

struct OperatorMatrix {
  SpMat M;
  bool symmetric = false;
  Parity parity = Parity::Full;

  Eigen::Index rows() const { return M.rows(); }
  Vec operator*(const Vec& v) const { return M * v; }
};

// Central stencil weights for d²/dx² (offsets 0..p) and d/dx (offsets 1..p), p = order/2.
Vec second_derivative_stencil(int order);
Vec first_derivative_stencil(int order);

// −d²/dx² with zero extension beyond ±X (homogeneous Dirichlet); symmetric.
OperatorMatrix build_laplacian(const Grid& g);
// d/dx with the same closure; antisymmetric.
OperatorMatrix build_first_derivative(const Grid& g);

// Trapezoid weights over all n nodes.
Vec quadrature_weights(const Grid& g);
double quadrature(const Grid& g, const Vec& samples);
double inner(const Grid& g, const Vec& a, const Vec& b);
double l2_norm(const Grid& g, const Vec& a);
// Discrete Sobolev norm (‖v‖² + ‖v'‖² + ‖v''‖²)^{1/2} using the FD matrices.
double h2_norm(const Grid& g, const Vec& a);
double h1_norm(const Grid& g, const Vec& a);

// Sector maps. Even sector unknowns are nodes c..n−1, odd sector c+1..n−1.
SpMat extension_matrix(const Grid& g, Parity p);   // half → full
SpMat restriction_matrix(const Grid& g, Parity p); // full → half (row pick)
Vec restrict_to(const Grid& g, const Vec& full, Parity p);
Vec extend_from(const Grid& g, const Vec& half, Parity p);
// Quadrature weights of the full line expressed on a sector: ∫ f = Σ w_k f_k.
Vec sector_weights(const Grid& g, Parity p);
// Weights c_k making the sector operator self-adjoint when the full one is
// symmetric: 1 at x = 0 (even sector), 2 elsewhere.
Vec sector_adjoint_weights(const Grid& g, Parity p);

// Half-size operator on the even (reflection at 0) or odd (zero at 0) sector.
OperatorMatrix parity_restrict(const Grid& g, const OperatorMatrix& full, Parity p);

// C^{1/2} M C^{−1/2}: symmetric representative of a sector restriction.
SpMat symmetrize_sector(const Grid& g, const SpMat& sector, Parity p);

}  // namespace cgl
