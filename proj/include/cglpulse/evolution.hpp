#pragma once

#include <complex>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cglpulse/params.hpp"

namespace cgl {

using CVec = Eigen::VectorXcd;

// Periodic mesh x_j = (j − N/2)h, j = 0..N−1, width W = Nh; x = 0 is node N/2.
struct PeriodicGrid {
  int N = 0;
  double h = 0.0;
  double W = 0.0;
  Eigen::VectorXd x;
  Eigen::VectorXd k;  // FFT-ordered wave numbers

  static PeriodicGrid make(int N, double h);
};

// u_t = (m + iαμ₀)u'' − (m + iαμ₁)u + (1 + iαμ₂)|u|²u − (1 + iαμ₃)|u|⁴u,
// integrated for v = e^{−iωt}u.
struct CGLCoefficients {
  double m = 0.0;
  double alpha = 0.0;
  double omega_frame = 0.0;
  Mu mu;

  // α = √ε, ω = √ετ of a pulse
  static CGLCoefficients from_params(const ModelParams& p);
};

// Exponential time differencing, second order (Cox–Matthews ETDRK2). The
// linear part including the frame rotation is integrated exactly.
class CGLStepper {
public:
  CGLStepper(const PeriodicGrid& g, const CGLCoefficients& c, double dt);
  ~CGLStepper();
  CGLStepper(const CGLStepper&) = delete;
  CGLStepper& operator=(const CGLStepper&) = delete;

  // One step in place. Returns false, leaving u untouched, when the new
  // field is not finite or exceeds the blow-up bound.
  bool step(CVec& u) const;
  double dt() const { return dt_; }
  const PeriodicGrid& grid() const { return g_; }

  static constexpr double blowup_bound = 2.0;

private:
  CVec nonlinear(const CVec& u) const;
  struct Fft;
  PeriodicGrid g_;
  CGLCoefficients c_;
  double dt_;
  std::unique_ptr<Fft> fft_;
  CVec E_, Q1_, Q2_;  // e^{z}, dt·φ₁(z), dt·φ₂(z) with z = L̂dt
};

// (e^z − 1)/z and (e^z − 1 − z)/z², by series near 0.
std::complex<double> etd_phi1(std::complex<double> z);
std::complex<double> etd_phi2(std::complex<double> z);

struct DiagnosticSample {
  double t = 0.0;
  double amp_max = 0.0;
  double half_width = 0.0;  // at |u|² = level
  double distance = 0.0;    // modulo symmetry, NaN without reference
  double front = 0.0;       // leftmost crossing of |u|² = level
};

struct EvolutionState {
  PeriodicGrid grid;
  CVec u;
  double t = 0.0;
  std::vector<DiagnosticSample> history;
  bool diverged = false;  // u holds the last finite state
};

// Advances by whole steps; false if the run diverged.
bool step(EvolutionState& s, const CGLStepper& stepper);

double max_modulus(const CVec& u);
// Half-distance between the outermost crossings of |u|² = level; 0 if none.
double half_width(const PeriodicGrid& g, const CVec& u, double level);
// Leftmost upward crossing of |u|² = level, linearly interpolated; NaN if none.
double left_front(const PeriodicGrid& g, const CVec& u, double level);

// Discrete H¹ norm with spectral derivative.
double h1_norm_periodic(const PeriodicGrid& g, const CVec& u);

struct SymmetryDistance {
  double distance = 0.0;
  double shift = 0.0;  // X
  double phase = 0.0;  // Ψ
  bool converged = true;
};
// min over X, Ψ of ‖u − e^{iΨ}ref(· − X)‖_{H¹}. For fixed X the optimal Ψ is
// explicit, so only X is searched: cross-correlation peak, then Brent.
SymmetryDistance modulo_symmetry_distance(const PeriodicGrid& g, const CVec& u, const CVec& ref);

struct StabilizationConfig {
  double delta = 1e-3;  // relative to ‖pulse‖_{L²}
  double T = 1000.0;
  double dt = 0.01;
  double cadence = 1.0;
  int N = 2048;
  double h = 0.08;
  double sign = 1.0;  // direction of the s kick
};

struct StabilizationResult {
  ModelParams params;  // with the pulse's ε, τ
  double alpha = 0.0;
  double M11 = 0.0;
  std::string linear_class;  // from the stability report
  std::string verdict;       // stable, unstable, inconclusive
  std::string reason;
  double delta_abs = 0.0;
  double final_distance = 0.0;
  double width_ratio = 0.0;  // last half-width over the first
  double amp_ratio = 0.0;    // last max|u| over the first
  double decay_rate = 0.0;   // −d ln(distance)/dt over the second half
  bool diverged = false;
  std::vector<DiagnosticSample> history;
};

// Pulse plus δ·s on a periodic grid, evolved in the pulse's rotating frame.
StabilizationResult stabilization_experiment(const ModelParams& p, const StabilizationConfig& cfg = {});

struct KinkConfig {
  double T = 1000.0;
  double dt = 0.05;
  int N = 2048;
  double h = 0.08;
  double cadence = 1.0;
};

struct KinkSpeedResult {
  double nu = 0.0, alpha = 0.0;
  double c_measured = 0.0;
  double c_formula = 0.0;  // corrected velocity
  double c_printed = 0.0;
  std::vector<DiagnosticSample> history;
};

// Plateau r̄e^{ikx} between two smooth fronts; the left front has the zero
// state on its left, so its velocity is the kink speed c.
KinkSpeedResult kink_speed_experiment(double nu, double alpha, const KinkConfig& cfg = {});

struct HomogeneousState {
  double k = 0.0, amplitude = 0.0, omega = 0.0;
};
// a e^{i(ωt + kx)} with a⁴ − a² + m(1 + k²) = 0 (upper root).
HomogeneousState homogeneous_state(double m, double alpha, const Mu& mu, double k);

struct HomogeneousRun {
  HomogeneousState state;
  double max_drift = 0.0;  // max over t, x of ||u| − a|
};
// Wave number taken on the periodic lattice nearest the kink wave number.
HomogeneousRun homogeneous_experiment(double nu, double alpha, double T = 100.0, double dt = 0.01, int N = 256,
                                      double h = 0.25);

}  // namespace cgl
