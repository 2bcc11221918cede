#include "cglpulse/bordered.hpp"

#include <vector>

#include <Eigen/SparseLU>

#include "cglpulse/errors.hpp"

namespace cgl {

BorderedSolution solve_bordered(const Grid& g, const SpMat& M, Parity par, const Vec& b, const Vec& c, const Vec& f,
                                double gamma) {
  const SpMat Ms = parity_restrict(g, OperatorMatrix{M, false, Parity::Full}, par).M;
  const Vec w = sector_weights(g, par);
  const Vec bs = restrict_to(g, b, par);
  const Vec cs = w.cwiseProduct(restrict_to(g, c, par));
  const int nh = static_cast<int>(Ms.rows());

  std::vector<Eigen::Triplet<double>> t;
  t.reserve(static_cast<size_t>(Ms.nonZeros()) + 2 * nh);
  for (int j = 0; j < Ms.outerSize(); ++j)
    for (SpMat::InnerIterator it(Ms, j); it; ++it) t.emplace_back(it.row(), it.col(), it.value());
  for (int i = 0; i < nh; ++i) {
    t.emplace_back(i, nh, bs[i]);
    t.emplace_back(nh, i, cs[i]);
  }
  SpMat K(nh + 1, nh + 1);
  K.setFromTriplets(t.begin(), t.end());
  const FieldBorderLU lu(K, nh, 1);
  Vec rhs(nh + 1);
  rhs.head(nh) = restrict_to(g, f, par);
  rhs[nh] = gamma;
  const Vec sol = lu.solve(rhs);
  if (!sol.allFinite()) throw numeric_error("singular system", "bordered solve produced non-finite values");
  return {extend_from(g, sol.head(nh), par), sol[nh]};
}

void FieldBorderLU::compute(const SpMat& K, int nh, int blocks) {
  const Eigen::Index n = K.rows();
  Eigen::VectorXi perm(n);
  for (int b = 0; b < blocks; ++b)
    for (int i = 0; i < nh; ++i) perm[b * nh + i] = blocks * i + b;
  for (Eigen::Index k = static_cast<Eigen::Index>(blocks) * nh; k < n; ++k) perm[k] = static_cast<int>(k);
  P_ = Eigen::PermutationMatrix<Eigen::Dynamic>(perm);
  SpMat Kp = P_ * K * P_.transpose();
  Kp.makeCompressed();
  lu_.compute(Kp);
  if (lu_.info() != Eigen::Success) throw numeric_error("singular system", "bordered factorization failed");
}

Vec FieldBorderLU::solve(const Vec& b) const { return P_.transpose() * Vec(lu_.solve(P_ * b)); }

Vec FieldBorderLU::solve_transpose(const Vec& b) const {
  return P_.transpose() * Vec(lu_.transpose().solve(P_ * b));
}

}  // namespace cgl
