#include "cglpulse/subspace_eigen.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SparseLU>

#include <algorithm>
#include <random>
#include <vector>

#include "cglpulse/errors.hpp"

namespace cgl {

namespace {

Eigen::MatrixXd orthonormalize(const Eigen::MatrixXd& V) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(V);
  Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(V.rows(), V.cols());
  // fix column signs so the iteration is a map on bases, not only on spans
  const Eigen::MatrixXd R = qr.matrixQR().topRows(V.cols()).triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < V.cols(); ++j)
    if (R(j, j) < 0) Q.col(j) = -Q.col(j);
  return Q;
}

double subspace_gap(const Eigen::MatrixXd& Qold, const Eigen::MatrixXd& Qnew) {
  return (Qnew - Qold * (Qold.transpose() * Qnew)).norm();
}

}  // namespace

InvariantSubspace shift_invert_subspace(const Eigen::SparseMatrix<double>& K, double shift, const SubspaceOptions& opt) {
  const Eigen::Index n = K.rows();
  if (opt.block < 1 || opt.lead < 1 || opt.lead > opt.block || opt.block > n)
    throw config_error("bad block", "shift_invert_subspace: need 1 ≤ lead ≤ block ≤ n");
  Eigen::SparseMatrix<double> S = K;
  for (Eigen::Index i = 0; i < n; ++i) S.coeffRef(i, i) -= shift;
  S.makeCompressed();
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu(S);
  if (lu.info() != Eigen::Success)
    throw numeric_error("singular shift", "shift_invert_subspace: K − σ is singular");

  std::mt19937_64 rng(20240611);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  Eigen::MatrixXd Q(n, opt.block);
  for (Eigen::Index j = 0; j < Q.cols(); ++j)
    for (Eigen::Index i = 0; i < n; ++i) Q(i, j) = unif(rng);
  Q = orthonormalize(Q);

  InvariantSubspace res;
  res.shift = shift;
  int settled_at = 0;
  for (int it = 1; it <= opt.max_iter; ++it) {
    Eigen::MatrixXd Z = lu.solve(Q);
    if (!Z.allFinite()) throw numeric_error("eigensolver failure", "shift_invert_subspace: non-finite iterate");
    Eigen::MatrixXd Qn = orthonormalize(Z);
    const double lead_gap = subspace_gap(Q.leftCols(opt.lead), Qn.leftCols(opt.lead));
    const double block_gap = subspace_gap(Q, Qn);
    Q = std::move(Qn);
    res.iterations = it;
    if (it >= opt.min_iter && lead_gap <= opt.tol && !res.converged) {
      res.converged = true;
      settled_at = it;
    }
    // guard columns only need rough Ritz values; give them a bounded budget
    if (res.converged && (block_gap <= 1e-6 || it >= 2 * settled_at + 10)) break;
  }
  res.Q = Q;
  const Eigen::MatrixXd KQ = K * Q;
  res.H = Q.transpose() * KQ;
  const Eigen::Index l = opt.lead;
  res.lead_residual =
      (KQ.leftCols(l) - Q.leftCols(l) * res.H.topLeftCorner(l, l)).norm();
  res.block_residual = (KQ - Q * res.H).norm();

  Eigen::EigenSolver<Eigen::MatrixXd> es(res.H, false);
  std::vector<std::complex<double>> ev(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
  std::stable_sort(ev.begin(), ev.end(), [&](const auto& a, const auto& b) {
    return std::abs(a - shift) < std::abs(b - shift);
  });
  res.ritz = Eigen::Map<Eigen::VectorXcd>(ev.data(), static_cast<Eigen::Index>(ev.size()));
  return res;
}

Eigen::VectorXcd dense_eigenvalues(const Eigen::SparseMatrix<double>& K) {
  Eigen::EigenSolver<Eigen::MatrixXd> es{Eigen::MatrixXd(K), false};
  if (es.info() != Eigen::Success) throw numeric_error("eigensolver failure", "dense_eigenvalues: no convergence");
  return es.eigenvalues();
}

}  // namespace cgl
