#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace cgl {

// Orthogonal iteration on (K − σ)⁻¹ for a real nonsymmetric sparse K. The
// first j columns of Q span the dominant j-dimensional invariant subspace of
// the inverse, i.e. the j eigenvalues of K closest to σ, for every j ≤ block.
struct InvariantSubspace {
  Eigen::MatrixXd Q;     // orthonormal columns
  Eigen::MatrixXd H;     // Qᵀ K Q
  Eigen::VectorXcd ritz; // eigenvalues of H, by distance to σ
  double shift = 0.0;
  double lead_residual = 0.0;   // ‖K Q_l − Q_l H_l‖_F over the leading columns
  double block_residual = 0.0;  // same over the whole block
  int iterations = 0;
  bool converged = false;       // leading subspace settled to tolerance
};

struct SubspaceOptions {
  int block = 4;
  int lead = 2;        // columns whose convergence is required
  double tol = 1e-13;  // sine of the step-to-step angle of the leading subspace
  int max_iter = 400;
  int min_iter = 8;
};

InvariantSubspace shift_invert_subspace(const Eigen::SparseMatrix<double>& K, double shift,
                                        const SubspaceOptions& opt = {});

// All eigenvalues of a small operator by a dense solve (test oracle).
Eigen::VectorXcd dense_eigenvalues(const Eigen::SparseMatrix<double>& K);

}  // namespace cgl
