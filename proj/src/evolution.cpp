#include "cglpulse/evolution.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <sstream>

#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>

#include "cglpulse/errors.hpp"
#include "cglpulse/profiles.hpp"
#include "cglpulse/stability.hpp"

namespace cgl {

namespace {

using cd = std::complex<double>;

// FFTW's planner is not thread-safe; execution on new arrays is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

fftw_complex* fc(const CVec& v) { return reinterpret_cast<fftw_complex*>(const_cast<cd*>(v.data())); }
fftw_complex* fc(CVec& v) { return reinterpret_cast<fftw_complex*>(v.data()); }

class FftPlan {
public:
  explicit FftPlan(int n) : n_(n) {
    std::lock_guard<std::mutex> lock(planner_mutex());
    CVec a(n), b(n);
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    fwd_ = fftw_plan_dft_1d(n, fc(a), fc(b), FFTW_FORWARD, flags);
    bwd_ = fftw_plan_dft_1d(n, fc(a), fc(b), FFTW_BACKWARD, flags);
    if (!fwd_ || !bwd_) throw numeric_error("fft plan", "FFTW planning failed");
  }
  ~FftPlan() {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(bwd_);
  }
  FftPlan(const FftPlan&) = delete;
  FftPlan& operator=(const FftPlan&) = delete;

  CVec forward(const CVec& in) const {
    CVec out(n_);
    fftw_execute_dft(fwd_, fc(in), fc(out));
    return out;
  }
  // normalized inverse
  CVec backward(const CVec& in) const {
    CVec out(n_);
    fftw_execute_dft(bwd_, fc(in), fc(out));
    return out / static_cast<double>(n_);
  }

private:
  int n_;
  fftw_plan fwd_ = nullptr, bwd_ = nullptr;
};

double lsq_slope(const std::vector<double>& t, const std::vector<double>& y) {
  const double n = static_cast<double>(t.size());
  if (t.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  double st = 0, sy = 0;
  for (size_t i = 0; i < t.size(); ++i) {
    st += t[i];
    sy += y[i];
  }
  const double tm = st / n, ym = sy / n;
  double num = 0, den = 0;
  for (size_t i = 0; i < t.size(); ++i) {
    num += (t[i] - tm) * (y[i] - ym);
    den += (t[i] - tm) * (t[i] - tm);
  }
  return num / den;
}

}  // namespace

PeriodicGrid PeriodicGrid::make(int N, double h) {
  if (N < 8 || N % 2 != 0 || !(h > 0.0)) throw config_error("bad grid", "PeriodicGrid: need even N ≥ 8 and h > 0");
  PeriodicGrid g;
  g.N = N;
  g.h = h;
  g.W = N * h;
  g.x.resize(N);
  g.k.resize(N);
  for (int j = 0; j < N; ++j) {
    g.x[j] = (j - N / 2) * h;
    const int kk = j <= N / 2 ? j : j - N;
    g.k[j] = 2.0 * M_PI * kk / g.W;
  }
  return g;
}

CGLCoefficients CGLCoefficients::from_params(const ModelParams& p) {
  CGLCoefficients c;
  c.m = p.m;
  c.alpha = std::sqrt(std::max(p.eps, 0.0));
  c.omega_frame = c.alpha * p.tau;
  c.mu = p.mu;
  return c;
}

cd etd_phi1(cd z) {
  if (std::abs(z) < 0.1) {
    cd term = 1.0, sum = 0.0;
    for (int j = 0; j < 16; ++j) {
      sum += term;
      term *= z / static_cast<double>(j + 2);
    }
    return sum;
  }
  return (std::exp(z) - 1.0) / z;
}

cd etd_phi2(cd z) {
  if (std::abs(z) < 0.1) {
    cd term = 0.5, sum = 0.0;
    for (int j = 0; j < 16; ++j) {
      sum += term;
      term *= z / static_cast<double>(j + 3);
    }
    return sum;
  }
  return (std::exp(z) - 1.0 - z) / (z * z);
}

struct CGLStepper::Fft : FftPlan {
  using FftPlan::FftPlan;
};

CGLStepper::CGLStepper(const PeriodicGrid& g, const CGLCoefficients& c, double dt)
    : g_(g), c_(c), dt_(dt), fft_(std::make_unique<Fft>(g.N)) {
  if (!(dt > 0.0)) throw config_error("bad dt", "CGLStepper: dt must be positive");
  E_.resize(g.N);
  Q1_.resize(g.N);
  Q2_.resize(g.N);
  const cd i(0.0, 1.0);
  for (int j = 0; j < g.N; ++j) {
    const double k2 = g.k[j] * g.k[j];
    const cd Lk = -(c.m + i * c.alpha * c.mu.m0) * k2 - (c.m + i * c.alpha * c.mu.m1) - i * c.omega_frame;
    const cd z = Lk * dt;
    E_[j] = std::exp(z);
    Q1_[j] = dt * etd_phi1(z);
    Q2_[j] = dt * etd_phi2(z);
  }
}

CGLStepper::~CGLStepper() = default;

CVec CGLStepper::nonlinear(const CVec& u) const {
  const cd i(0.0, 1.0);
  const cd c2 = 1.0 + i * c_.alpha * c_.mu.m2, c3 = 1.0 + i * c_.alpha * c_.mu.m3;
  CVec out(u.size());
  for (Eigen::Index j = 0; j < u.size(); ++j) {
    const double P = std::norm(u[j]);
    out[j] = (c2 * P - c3 * P * P) * u[j];
  }
  return out;
}

bool CGLStepper::step(CVec& u) const {
  const CVec vh = fft_->forward(u);
  const CVec Nv = fft_->forward(nonlinear(u));
  const CVec ah = E_.cwiseProduct(vh) + Q1_.cwiseProduct(Nv);
  const CVec Na = fft_->forward(nonlinear(fft_->backward(ah)));
  const CVec un = fft_->backward(ah + Q2_.cwiseProduct(Na - Nv));
  if (!un.allFinite() || max_modulus(un) > blowup_bound) return false;
  u = un;
  return true;
}

bool step(EvolutionState& s, const CGLStepper& stepper) {
  if (s.diverged) return false;
  if (!stepper.step(s.u)) {
    s.diverged = true;
    return false;
  }
  s.t += stepper.dt();
  return true;
}

double max_modulus(const CVec& u) { return u.cwiseAbs().maxCoeff(); }

double half_width(const PeriodicGrid& g, const CVec& u, double level) {
  int lo = -1, hi = -1;
  for (int j = 0; j < g.N; ++j)
    if (std::norm(u[j]) >= level) {
      if (lo < 0) lo = j;
      hi = j;
    }
  if (lo < 0) return 0.0;
  auto cross = [&](int a, int b) {
    const double pa = std::norm(u[a]), pb = std::norm(u[b]);
    return g.x[a] + (level - pa) / (pb - pa) * (g.x[b] - g.x[a]);
  };
  const double xl = lo > 0 ? cross(lo - 1, lo) : g.x[lo];
  const double xr = hi + 1 < g.N ? cross(hi, hi + 1) : g.x[hi];
  return 0.5 * (xr - xl);
}

double left_front(const PeriodicGrid& g, const CVec& u, double level) {
  for (int j = 1; j < g.N; ++j) {
    const double pa = std::norm(u[j - 1]), pb = std::norm(u[j]);
    if (pa < level && pb >= level) return g.x[j - 1] + (level - pa) / (pb - pa) * g.h;
  }
  return std::numeric_limits<double>::quiet_NaN();
}

double h1_norm_periodic(const PeriodicGrid& g, const CVec& u) {
  const FftPlan fft(g.N);
  const CVec U = fft.forward(u);
  double s = 0.0;
  for (int j = 0; j < g.N; ++j) s += (1.0 + g.k[j] * g.k[j]) * std::norm(U[j]);
  return std::sqrt(s * g.h / g.N);
}

SymmetryDistance modulo_symmetry_distance(const PeriodicGrid& g, const CVec& u, const CVec& ref) {
  if (u.size() != g.N || ref.size() != g.N) throw config_error("grid mismatch", "modulo_symmetry_distance: sizes differ");
  const FftPlan fft(g.N);
  const CVec F = fft.forward(u), G = fft.forward(ref);
  const Eigen::VectorXd w = ((1.0 + g.k.array().square()) * (g.h / g.N)).matrix();
  CVec c(g.N);
  for (int j = 0; j < g.N; ++j) c[j] = w[j] * std::conj(G[j]) * F[j];

  // ⟨ref(· − X), u⟩ and its X-derivative
  auto inner = [&](double X) {
    cd s = 0.0;
    for (int j = 0; j < g.N; ++j) s += c[j] * std::polar(1.0, g.k[j] * X);
    return s;
  };
  auto dinner = [&](double X) {
    cd s = 0.0;
    for (int j = 0; j < g.N; ++j) s += c[j] * cd(0.0, g.k[j]) * std::polar(1.0, g.k[j] * X);
    return s;
  };

  const CVec corr = fft.backward(c) * static_cast<double>(g.N);
  Eigen::Index jmax = 0;
  corr.cwiseAbs().maxCoeff(&jmax);
  double X0 = static_cast<double>(jmax) * g.h;
  if (X0 > 0.5 * g.W) X0 -= g.W;

  SymmetryDistance d;
  // stationarity of |I(X)|²: Re(conj(I) I') = 0, bracketed around the grid peak
  auto slope = [&](double X) { return std::real(std::conj(inner(X)) * dinner(X)); };
  const double a = X0 - g.h, b = X0 + g.h;
  const double fa = slope(a), fb = slope(b);
  double X = X0;
  if (fa > 0.0 && fb < 0.0) {
    boost::uintmax_t iters = 100;
    const auto r = boost::math::tools::toms748_solve(slope, a, b, fa, fb,
                                                     boost::math::tools::eps_tolerance<double>(50), iters);
    X = 0.5 * (r.first + r.second);
    d.converged = iters < 100;
  } else {
    const auto r = boost::math::tools::brent_find_minima([&](double t) { return -std::abs(inner(t)); }, a, b, 50);
    X = r.first;
    d.converged = false;
  }
  d.shift = X;
  d.phase = std::arg(inner(X));
  double s = 0.0;
  const cd rot = std::polar(1.0, d.phase);
  for (int j = 0; j < g.N; ++j) s += w[j] * std::norm(F[j] - rot * G[j] * std::polar(1.0, -g.k[j] * X));
  d.distance = std::sqrt(s);
  return d;
}

StabilizationResult stabilization_experiment(const ModelParams& p, const StabilizationConfig& cfg) {
  const PeriodicGrid pg = PeriodicGrid::make(cfg.N, cfg.h);
  // FD mesh at half the periodic spacing, so every periodic node is an FD node
  const double hf = 0.5 * cfg.h;
  const double X = cfg.h * std::ceil((p.L + p.y + 40.0) / cfg.h);
  if (X > 0.5 * pg.W - cfg.h) {
    std::ostringstream os;
    os << "stabilization_experiment: pulse mesh half-width " << X << " exceeds the periodic half-width " << 0.5 * pg.W;
    throw config_error("domain too small", os.str());
  }
  const Grid g = Grid::with_points(X, static_cast<int>(std::lround(2.0 * X / hf)) + 1);
  StabilityOptions so;
  so.throw_on_gap = false;
  const StabilityRun run = stability_at(p, g, so);
  const PulseFields& U = run.pulse.U;

  StabilizationResult res;
  res.params = run.pulse.params;
  res.alpha = std::sqrt(std::max(U.eps, 0.0));
  res.M11 = run.report.M11;
  res.linear_class = run.report.classification;

  const double se = std::sqrt(std::max(U.eps, 0.0));
  const Vec s_dir = run.pulse.flat.s / l2_norm(g, run.pulse.flat.s);
  CVec ref = CVec::Zero(pg.N), kick = CVec::Zero(pg.N);
  const int c = g.center();
  for (int j = 0; j < pg.N; ++j) {
    const int i = c + 2 * (j - pg.N / 2);
    if (i < 0 || i >= g.n) continue;
    ref[j] = cd(U.xi[i], se * U.eta[i]);
    kick[j] = s_dir[i];
  }
  double ref_l2 = 0.0;
  for (int j = 0; j < pg.N; ++j) ref_l2 += std::norm(ref[j]) * pg.h;
  res.delta_abs = cfg.delta * std::sqrt(ref_l2);

  EvolutionState st;
  st.grid = pg;
  st.u = ref + cfg.sign * res.delta_abs * kick;
  const CGLStepper stepper(pg, CGLCoefficients::from_params(res.params), cfg.dt);
  const double level = 0.5 * std::norm(ref[pg.N / 2]);
  const double amp0 = max_modulus(ref), width0 = half_width(pg, ref, level);

  auto record = [&]() {
    DiagnosticSample d;
    d.t = st.t;
    d.amp_max = max_modulus(st.u);
    d.half_width = half_width(pg, st.u, level);
    d.distance = modulo_symmetry_distance(pg, st.u, ref).distance;
    d.front = std::numeric_limits<double>::quiet_NaN();
    st.history.push_back(d);
    return d;
  };
  record();
  const long nsteps = std::lround(cfg.T / cfg.dt);
  const long every = std::max(1L, std::lround(cfg.cadence / cfg.dt));
  res.verdict = "inconclusive";
  res.reason = "neither criterion met by T";
  for (long n = 1; n <= nsteps; ++n) {
    if (!step(st, stepper)) {
      res.diverged = true;
      res.verdict = "unstable";
      res.reason = "blow-up";
      break;
    }
    if (n % every != 0 && n != nsteps) continue;
    const DiagnosticSample d = record();
    if (d.amp_max < 0.5 * amp0) {
      res.verdict = "unstable";
      res.reason = "amplitude collapse";
      break;
    }
    if (d.half_width >= 1.5 * width0) {
      res.verdict = "unstable";
      res.reason = "width growth";
      break;
    }
  }
  const DiagnosticSample& last = st.history.back();
  res.final_distance = last.distance;
  res.amp_ratio = last.amp_max / amp0;
  res.width_ratio = last.half_width / width0;
  if (res.verdict == "inconclusive" && res.final_distance <= 0.1 * res.delta_abs) {
    res.verdict = "stable";
    res.reason = "distance below 0.1 delta";
  }
  std::vector<double> tt, ll;
  const double t_half = 0.5 * last.t;
  for (const DiagnosticSample& d : st.history)
    if (d.t >= t_half && d.distance > 0.0) {
      tt.push_back(d.t);
      ll.push_back(std::log(d.distance));
    }
  res.decay_rate = -lsq_slope(tt, ll);
  res.history = std::move(st.history);
  return res;
}

KinkSpeedResult kink_speed_experiment(double nu, double alpha, const KinkConfig& cfg) {
  const KinkQuantities kq = kink_quantities(nu, alpha);
  const PeriodicGrid pg = PeriodicGrid::make(cfg.N, cfg.h);
  KinkSpeedResult res;
  res.nu = nu;
  res.alpha = alpha;
  res.c_formula = kq.c;
  res.c_printed = kq.c_printed;

  const double xl = -0.25 * pg.W, xr = 0.25 * pg.W;
  CVec u(pg.N);
  for (int j = 0; j < pg.N; ++j) {
    const double x = pg.x[j];
    const double env = 1.0 / std::sqrt((1.0 + std::exp(-2.0 * (x - xl))) * (1.0 + std::exp(2.0 * (x - xr))));
    u[j] = kq.rbar * env * std::polar(1.0, kq.k * x);
  }
  CGLCoefficients cc;
  cc.m = m_from_nu(nu);
  cc.alpha = alpha;
  const CGLStepper stepper(pg, cc, cfg.dt);
  EvolutionState st;
  st.grid = pg;
  st.u = u;
  const double level = 0.5 * kq.rbar * kq.rbar;
  auto record = [&]() {
    DiagnosticSample d;
    d.t = st.t;
    d.amp_max = max_modulus(st.u);
    d.half_width = half_width(pg, st.u, level);
    d.distance = std::numeric_limits<double>::quiet_NaN();
    d.front = left_front(pg, st.u, level);
    if (!std::isfinite(d.front) || d.front < -0.5 * pg.W + 10.0 || d.front > -10.0) {
      std::ostringstream os;
      os << "kink_speed_experiment: front at " << d.front << " left the tracking window at t = " << st.t;
      throw config_error("domain too small", os.str());
    }
    st.history.push_back(d);
  };
  record();
  const long nsteps = std::lround(cfg.T / cfg.dt);
  const long every = std::max(1L, std::lround(cfg.cadence / cfg.dt));
  for (long n = 1; n <= nsteps; ++n) {
    if (!step(st, stepper)) throw numeric_error("simulation diverged", "kink_speed_experiment: blow-up");
    if (n % every == 0 || n == nsteps) record();
  }
  std::vector<double> tt, xx;
  for (const DiagnosticSample& d : st.history)
    if (d.t >= 0.5 * cfg.T) {
      tt.push_back(d.t);
      xx.push_back(d.front);
    }
  res.c_measured = lsq_slope(tt, xx);
  res.history = std::move(st.history);
  return res;
}

HomogeneousState homogeneous_state(double m, double alpha, const Mu& mu, double k) {
  const double disc = 1.0 - 4.0 * m * (1.0 + k * k);
  if (disc < 0.0) throw domain_error("no homogeneous state", "homogeneous_state: 1 − 4m(1 + k²) < 0");
  HomogeneousState h;
  h.k = k;
  const double a2 = 0.5 * (1.0 + std::sqrt(disc));
  h.amplitude = std::sqrt(a2);
  h.omega = alpha * (-mu.m0 * k * k - mu.m1 + mu.m2 * a2 - mu.m3 * a2 * a2);
  return h;
}

HomogeneousRun homogeneous_experiment(double nu, double alpha, double T, double dt, int N, double h) {
  const PeriodicGrid pg = PeriodicGrid::make(N, h);
  const double k0 = kink_quantities(nu, alpha).k;
  const double k = 2.0 * M_PI * std::round(k0 * pg.W / (2.0 * M_PI)) / pg.W;
  HomogeneousRun run;
  const Mu mu;
  run.state = homogeneous_state(m_from_nu(nu), alpha, mu, k);
  CGLCoefficients cc;
  cc.m = m_from_nu(nu);
  cc.alpha = alpha;
  cc.mu = mu;
  const CGLStepper stepper(pg, cc, dt);
  EvolutionState st;
  st.grid = pg;
  st.u.resize(N);
  for (int j = 0; j < N; ++j) st.u[j] = run.state.amplitude * std::polar(1.0, k * pg.x[j]);
  const long nsteps = std::lround(T / dt);
  for (long n = 1; n <= nsteps; ++n) {
    if (!step(st, stepper)) throw numeric_error("simulation diverged", "homogeneous_experiment: blow-up");
    run.max_drift = std::max(run.max_drift, (st.u.cwiseAbs().array() - run.state.amplitude).abs().maxCoeff());
  }
  return run;
}

}  // namespace cgl
