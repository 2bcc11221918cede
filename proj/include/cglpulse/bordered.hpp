#pragma once

#include <Eigen/SparseLU>

#include "cglpulse/grid.hpp"

namespace cgl {

struct BorderedSolution {
  Vec x;                    // full-grid samples, parity of the sector
  double multiplier = 0.0;  // coefficient of the border column
};

// Solves  M x + μ b = f,  (x, c) = γ  on one parity sector, with (·,·) the
// discrete L² product. M is a full-grid operator, b, c, f full-grid samples
// of the sector's parity. Throws numeric error on a singular border.
BorderedSolution solve_bordered(const Grid& g, const SpMat& M, Parity par, const Vec& b, const Vec& c, const Vec& f,
                                double gamma = 0.0);

// Sparse LU of a matrix whose leading blocks·nh unknowns are field blocks of
// size nh, followed by a few dense border unknowns. The fields are
// interleaved node by node so the core is banded and natural ordering keeps
// the fill in the border; COLAMD stalls on the dense border rows.
class FieldBorderLU {
public:
  FieldBorderLU() = default;
  FieldBorderLU(const SpMat& K, int nh, int blocks) { compute(K, nh, blocks); }
  // Throws numeric error "singular system" on failure.
  void compute(const SpMat& K, int nh, int blocks);
  Vec solve(const Vec& b) const;
  Vec solve_transpose(const Vec& b) const;

private:
  Eigen::PermutationMatrix<Eigen::Dynamic> P_;
  mutable Eigen::SparseLU<SpMat, Eigen::NaturalOrdering<int>> lu_;
};

}  // namespace cgl
