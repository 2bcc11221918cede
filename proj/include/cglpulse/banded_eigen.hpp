#pragma once

#include "cglpulse/grid.hpp"

namespace cgl {

struct SymEigenResult {
  Vec values;            // ascending
  Eigen::MatrixXd vectors;  // columns, Euclidean unit norm
};

// k smallest eigenpairs of a symmetric banded sparse matrix (LAPACK dsbevx).
SymEigenResult banded_lowest(const SpMat& S, int k);

// Same via a dense symmetric solve; used as an oracle on small matrices.
SymEigenResult dense_lowest(const SpMat& S, int k);

}  // namespace cgl
