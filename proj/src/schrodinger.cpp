#include "cglpulse/schrodinger.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "cglpulse/banded_eigen.hpp"
#include "cglpulse/bordered.hpp"
#include "cglpulse/errors.hpp"
#include "cglpulse/profiles.hpp"

namespace cgl {

OperatorMatrix build_schrodinger(const Grid& g, double m, const Vec& potential) {
  OperatorMatrix op = build_laplacian(g);
  op.M *= m;
  for (int i = 0; i < g.n; ++i) op.M.coeffRef(i, i) += potential[i];
  op.M.makeCompressed();
  op.symmetric = true;
  return op;
}

OperatorMatrix build_A(const ModelParams& p, const Grid& g) {
  ScalarProfile prof(p.nu);
  return build_schrodinger(g, prof.m(), prof.sample(g.x, ScalarProfile::Field::V));
}

OperatorMatrix build_B(const ModelParams& p, const Grid& g) {
  ScalarProfile prof(p.nu);
  return build_schrodinger(g, prof.m(), prof.sample(g.x, ScalarProfile::Field::W));
}

namespace {

void normalize_sign(Vec& v) {
  const double vmax = v.cwiseAbs().maxCoeff();
  const Eigen::Index n = v.size();
  for (Eigen::Index i = 1; i + 1 < n; ++i) {
    const double a = std::abs(v[i]);
    if (a > 1e-3 * vmax && a >= std::abs(v[i - 1]) && a >= std::abs(v[i + 1])) {
      if (v[i] < 0) v = -v;
      return;
    }
  }
}

}  // namespace

SpectralResult low_spectrum(const Grid& g, const OperatorMatrix& op, int k, double floor, char tag) {
  if (k < 1) throw config_error("bad k", "low_spectrum: k must be positive");
  struct Pair {
    double value;
    Vec vec;
    Parity parity;
  };
  std::vector<Pair> all;
  for (Parity par : {Parity::Even, Parity::Odd}) {
    const OperatorMatrix sec = parity_restrict(g, op, par);
    const SpMat S = symmetrize_sector(g, sec.M, par);
    const SymEigenResult r = banded_lowest(S, k);
    const Vec cs_inv = sector_adjoint_weights(g, par).cwiseSqrt().cwiseInverse();
    const SpMat E = extension_matrix(g, par);
    for (int j = 0; j < r.values.size(); ++j) {
      Vec full = E * cs_inv.cwiseProduct(r.vectors.col(j));
      full /= l2_norm(g, full);
      normalize_sign(full);
      all.push_back({r.values[j], std::move(full), par});
    }
  }
  std::stable_sort(all.begin(), all.end(), [](const Pair& a, const Pair& b) { return a.value < b.value; });
  SpectralResult res;
  res.op = tag;
  res.floor = floor;
  const int kk = std::min<int>(k, static_cast<int>(all.size()));
  res.values.resize(kk);
  for (int j = 0; j < kk; ++j) {
    res.values[j] = all[j].value;
    res.vectors.push_back(all[j].vec);
    res.parity.push_back(all[j].parity);
  }
  return res;
}

Vec Projector::apply(const Vec& v) const {
  Vec out = Vec::Zero(v.size());
  for (const Vec& b : basis) out += inner(*grid, b, v) * b;
  return out;
}

Projector projection_Pi(const Grid& g, const SpectralResult& spec) {
  if (spec.values.size() < 3)
    throw numeric_error("degenerate spectrum", "projection_Pi: need at least 3 eigenvalues to verify the gap");
  const double small = std::max(std::abs(spec.values[0]), std::abs(spec.values[1]));
  const double gap = spec.values[2];
  if (!(gap > 10.0 * small)) {
    std::ostringstream os;
    os << "projection_Pi: third eigenvalue " << gap << " not separated from the pair (" << spec.values[0] << ", "
       << spec.values[1] << ")";
    throw numeric_error("degenerate spectrum", os.str());
  }
  Projector P;
  P.grid = &g;
  P.basis = {spec.vectors[0], spec.vectors[1]};
  return P;
}

int even_ground_index(const SpectralResult& spec) {
  for (int i = 0; i < std::min<int>(2, static_cast<int>(spec.parity.size())); ++i)
    if (spec.parity[i] == Parity::Even) return i;
  throw numeric_error("degenerate spectrum", "no even state in the small pair");
}

Vec s_as_Pi_sigma(const ModelParams& p, const Grid& g, const SpectralResult& spec) {
  const Vec& s = spec.vectors[even_ground_index(spec)];
  const Vec sigma = ScalarProfile(p.nu).sample(g.x, ScalarProfile::Field::sigma);
  return inner(g, sigma, s) * s;
}

RayleighRecord rayleigh_sigma(const ModelParams& p, const Grid& g) {
  const Vec sigma = ScalarProfile(p.nu).sample(g.x, ScalarProfile::Field::sigma);
  const OperatorMatrix A = build_A(p, g);
  RayleighRecord r;
  r.A_sigma_sigma = inner(g, A * sigma, sigma);
  r.sigma_sigma = inner(g, sigma, sigma);
  r.quotient = r.A_sigma_sigma / r.sigma_sigma;
  return r;
}

DLambdaRecord dlambda_dL(const ModelParams& p, const Grid& g, double dL) {
  auto lambda_at = [&](double L) {
    const ModelParams q = ModelParams::from_L(L);
    return low_spectrum(g, build_A(q, g), 1, q.m).values[0];
  };
  DLambdaRecord r;
  r.dL = dL;
  r.value = (lambda_at(p.L + dL) - lambda_at(p.L - dL)) / (2.0 * dL);
  r.prediction = 6.0 * p.nu;
  return r;
}

Vec sigma_hat(const ModelParams& p, const Grid& g, const SpectralResult& spec) {
  ScalarProfile prof(p.nu);
  const Vec sigma = prof.sample(g.x, ScalarProfile::Field::sigma);
  const Vec rho = prof.sample(g.x, ScalarProfile::Field::rho);
  const Projector P = projection_Pi(g, spec);
  const int k = even_ground_index(spec);
  const double lambda = spec.values[k];
  Vec rhs = lambda * sigma - rho;
  rhs -= P.apply(rhs);

  const Vec& s = spec.vectors[k];
  return solve_bordered(g, build_A(p, g).M, Parity::Even, s, s, rhs).x;
}

}  // namespace cgl
