#include "cglpulse/banded_eigen.hpp"

#include <lapacke.h>

#include <Eigen/SparseLU>

#include <algorithm>
#include <sstream>
#include <vector>

#include "cglpulse/errors.hpp"

namespace cgl {

SymEigenResult banded_lowest(const SpMat& S, int k) {
  const int n = static_cast<int>(S.rows());
  if (S.cols() != n) throw numeric_error("not square", "banded_lowest: matrix not square");
  k = std::min(k, n);
  int kd = 0;
  for (int j = 0; j < S.outerSize(); ++j)
    for (SpMat::InnerIterator it(S, j); it; ++it)
      if (it.value() != 0.0) kd = std::max(kd, static_cast<int>(std::abs(it.row() - it.col())));

  // lower band storage, column major: ab[(i−j) + j*ldab] = S(i,j), i ≥ j
  const int ldab = kd + 1;
  std::vector<double> ab(static_cast<size_t>(ldab) * n, 0.0);
  for (int j = 0; j < S.outerSize(); ++j)
    for (SpMat::InnerIterator it(S, j); it; ++it) {
      const int r = static_cast<int>(it.row()), c = static_cast<int>(it.col());
      if (r >= c) ab[static_cast<size_t>(r - c) + static_cast<size_t>(c) * ldab] = it.value();
    }

  // eigenvalues only: forming the band-reduction Q costs O(n²) memory and dominates
  std::vector<double> w(n);
  std::vector<lapack_int> ifail(n);
  lapack_int m_found = 0;
  const double abstol = 2.0 * LAPACKE_dlamch('S');
  const lapack_int info = LAPACKE_dsbevx(LAPACK_COL_MAJOR, 'N', 'I', 'L', n, kd, ab.data(), ldab, nullptr, n, 0.0,
                                         0.0, 1, k, abstol, &m_found, w.data(), nullptr, 1, ifail.data());
  if (info != 0 || m_found != k) {
    std::ostringstream os;
    os << "dsbevx failed: info = " << info << ", found " << m_found << " of " << k << " (n = " << n << ", kd = " << kd
       << ")";
    throw numeric_error("eigensolver failure", os.str());
  }
  SymEigenResult res;
  res.values = Eigen::Map<Vec>(w.data(), k);
  res.vectors.resize(n, k);

  // eigenvectors by shifted inverse iteration, orthogonalized against earlier ones
  const double scale = std::max(1.0, res.values.cwiseAbs().maxCoeff());
  SpMat I(n, n);
  I.setIdentity();
  for (int j = 0; j < k; ++j) {
    const double shift = res.values[j] - 1e-10 * scale;
    SpMat Sh = S - shift * I;
    Sh.makeCompressed();
    Eigen::SparseLU<SpMat> lu(Sh);
    if (lu.info() != Eigen::Success) throw numeric_error("eigensolver failure", "banded_lowest: shifted factorization failed");
    Vec v = Vec::LinSpaced(n, 1.0, 2.0);
    for (int it = 0; it < 3; ++it) {
      for (int i = 0; i < j; ++i) v -= res.vectors.col(i).dot(v) * res.vectors.col(i);
      v = lu.solve(v);
      v.normalize();
    }
    for (int i = 0; i < j; ++i) v -= res.vectors.col(i).dot(v) * res.vectors.col(i);
    res.vectors.col(j) = v.normalized();
  }
  return res;
}

SymEigenResult dense_lowest(const SpMat& S, int k) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es{Eigen::MatrixXd(S)};
  if (es.info() != Eigen::Success) throw numeric_error("eigensolver failure", "dense_lowest: no convergence");
  k = std::min<int>(k, static_cast<int>(S.rows()));
  SymEigenResult res;
  res.values = es.eigenvalues().head(k);
  res.vectors = es.eigenvectors().leftCols(k);
  return res;
}

}  // namespace cgl
