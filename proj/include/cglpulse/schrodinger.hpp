#pragma once

#include <vector>

#include "cglpulse/grid.hpp"
#include "cglpulse/params.hpp"

namespace cgl {

// A = −m∂² + V and B = −m∂² + W on the full grid, potentials at params.nu.
OperatorMatrix build_A(const ModelParams& p, const Grid& g);
OperatorMatrix build_B(const ModelParams& p, const Grid& g);
// −m∂² + diag(potential)
OperatorMatrix build_schrodinger(const Grid& g, double m, const Vec& potential);

struct SpectralResult {
  char op = 'A';
  Vec values;                  // ascending
  std::vector<Vec> vectors;    // full-grid samples, unit L² norm
  std::vector<Parity> parity;  // Even or Odd per eigenpair
  double floor = 0.0;          // essential spectrum starts at m
};

// k smallest eigenpairs of a symmetric full-grid operator, from the two
// parity sectors merged. Sign: positive at the first extremum from the left.
SpectralResult low_spectrum(const Grid& g, const OperatorMatrix& op, int k, double floor, char tag = 'A');

// Index of the even member of the two smallest eigenpairs. Once |λ| is below
// the mesh defect of the translation mode the pair may come out in either order.
int even_ground_index(const SpectralResult& spec_A);

// Orthogonal (L²) projector onto span{s, r'} built from the two lowest eigenpairs.
struct Projector {
  std::vector<Vec> basis;  // L²-orthonormal
  const Grid* grid = nullptr;
  Vec apply(const Vec& v) const;
};
Projector projection_Pi(const Grid& g, const SpectralResult& spec_A);

// Eigenfunction s scaled as Πσ: the L²-unit even ground state times (σ, ŝ).
Vec s_as_Pi_sigma(const ModelParams& p, const Grid& g, const SpectralResult& spec_A);

struct RayleighRecord {
  double quotient;     // (Aσ,σ)/(σ,σ)
  double A_sigma_sigma;
  double sigma_sigma;
};
RayleighRecord rayleigh_sigma(const ModelParams& p, const Grid& g);

struct DLambdaRecord {
  double value;       // centered difference of λ(L)
  double prediction;  // 6ν
  double dL;
};
// Both λ(L ± dL) on the same grid g.
DLambdaRecord dlambda_dL(const ModelParams& p, const Grid& g, double dL = 0.01);

// Solution of Aŝ = (1−Π)(λσ − ρ), Πŝ = 0 (even sector, bordered by s).
Vec sigma_hat(const ModelParams& p, const Grid& g, const SpectralResult& spec_A);

}  // namespace cgl
