#include "cglpulse/runner.hpp"

#include <fftw3.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <map>
#include <sstream>
#include <thread>

#include <Eigen/Core>
#include <boost/version.hpp>

#include "cglpulse/ansatz.hpp"
#include "cglpulse/errors.hpp"
#include "cglpulse/evolution.hpp"
#include "cglpulse/phase.hpp"
#include "cglpulse/profiles.hpp"
#include "cglpulse/schrodinger.hpp"
#include "cglpulse/stability.hpp"

namespace cgl {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// JSON has no NaN; null stands for "not available".
json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json vec_json(const Vec& v, int stride = 1) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); i += stride) a.push_back(num(v[i]));
  return a;
}

std::string key_list(const std::set<std::string>& keys) {
  std::string s;
  for (const auto& k : keys) s += (s.empty() ? "" : ", ") + k;
  return s;
}

// Keys each command accepts; checked before any work starts.
const std::set<std::string>& allowed_keys(const std::string& command) {
  static const std::set<std::string> params = {"nu", "L", "y", "alpha", "mu", "p"};
  auto with = [](std::set<std::string> s, std::initializer_list<const char*> more) {
    for (const char* k : more) s.insert(k);
    return s;
  };
  static const std::map<std::string, std::set<std::string>> keys = {
      {"profile", with(params, {"X", "h", "order", "stride"})},
      {"spectrum", with(params, {"X", "h", "order", "k"})},
      {"phase", with(params, {"X", "h", "order", "stride"})},
      {"pulse", with(params, {"h", "order", "margin", "newton_tol", "residual_tol", "require_certificate", "stride"})},
      {"stability", with(params, {"h", "order", "margin", "critical_tol", "throw_on_gap", "certify", "expansion"})},
      {"alpha-c", {"nu", "L", "mu", "p", "scan_step", "y_tol", "h"}},
      {"chi", {"mu", "mu2", "mu3", "L", "mu2_values", "mu3_values"}},
      // h is the mesh of the alpha-to-y map
      {"evolve", with(params, {"h", "delta", "T", "dt", "cadence", "N", "h_periodic", "sign"})},
      {"kink", {"nu", "L", "alpha", "T", "dt", "N", "h_periodic", "cadence"}},
  };
  static const std::set<std::string> none;
  const auto it = keys.find(command);
  return it == keys.end() ? none : it->second;
}

void check_keys(const std::string& command, const json& config) {
  if (command == "sweep" || !config.is_object()) return;
  std::set<std::string> unknown;
  const std::set<std::string>& ok = allowed_keys(command);
  for (const auto& [k, v] : config.items())
    if (!ok.count(k)) unknown.insert(k);
  if (!unknown.empty())
    throw config_error("unknown key", "unknown configuration keys for " + command + ": " + key_list(unknown));
}

}  // namespace

ConfigReader::ConfigReader(json j) : j_(std::move(j)) {
  if (j_.is_null()) j_ = json::object();
  if (!j_.is_object()) throw config_error("bad config", "configuration must be a JSON object");
}

bool ConfigReader::has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }

std::optional<double> ConfigReader::opt_num(const std::string& key) {
  if (!has(key)) return std::nullopt;
  const json& v = j_.at(key);
  if (!v.is_number()) throw config_error("bad type", "config key '" + key + "' must be a number");
  const double d = v.get<double>();
  resolved_[key] = d;
  return d;
}

double ConfigReader::num(const std::string& key, double def) {
  const auto v = opt_num(key);
  if (!v) resolved_[key] = def;
  return v.value_or(def);
}

int ConfigReader::integer(const std::string& key, int def) {
  if (!has(key)) {
    resolved_[key] = def;
    return def;
  }
  const json& v = j_.at(key);
  if (!v.is_number_integer() && !(v.is_number() && v.get<double>() == std::floor(v.get<double>())))
    throw config_error("bad type", "config key '" + key + "' must be an integer");
  const int i = static_cast<int>(v.get<double>());
  resolved_[key] = i;
  return i;
}

bool ConfigReader::flag(const std::string& key, bool def) {
  if (!has(key)) {
    resolved_[key] = def;
    return def;
  }
  const json& v = j_.at(key);
  if (!v.is_boolean()) throw config_error("bad type", "config key '" + key + "' must be true or false");
  resolved_[key] = v.get<bool>();
  return v.get<bool>();
}

std::vector<double> ConfigReader::list(const std::string& key, const std::vector<double>& def) {
  if (!has(key)) {
    resolved_[key] = def;
    return def;
  }
  const json& v = j_.at(key);
  std::vector<double> out;
  if (v.is_number()) {
    out.push_back(v.get<double>());
  } else if (v.is_array()) {
    for (const json& e : v) {
      if (!e.is_number()) throw config_error("bad type", "config key '" + key + "' must hold numbers");
      out.push_back(e.get<double>());
    }
  } else {
    throw config_error("bad type", "config key '" + key + "' must be a number or an array");
  }
  resolved_[key] = out;
  return out;
}

Mu ConfigReader::mu() {
  const std::vector<double> v = list("mu", {0.0, 0.0, 1.0, 0.0});
  if (v.size() != 4) throw config_error("bad mu", "mu must have four entries (mu0, mu1, mu2, mu3)");
  return Mu{v[0], v[1], v[2], v[3]};
}

const std::vector<std::string>& commands() {
  static const std::vector<std::string> c = {"profile", "stability", "alpha-c", "chi",   "evolve",
                                             "kink",    "spectrum",  "phase",   "pulse", "sweep"};
  return c;
}

int worker_count() {
  if (const char* s = std::getenv("CGLPULSE_WORKERS")) {
    char* end = nullptr;
    const long n = std::strtol(s, &end, 10);
    if (end != s && *end == '\0' && n >= 1 && n <= 1024) return static_cast<int>(n);
    throw config_error("bad worker count", "CGLPULSE_WORKERS must be an integer in [1, 1024]");
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

namespace {

double base_nu_or_L(ConfigReader& cfg, bool& from_L) {
  const auto nu = cfg.opt_num("nu");
  const auto L = cfg.opt_num("L");
  if (nu && L) throw config_error("conflicting parameters", "give either nu or L, not both");
  if (!nu && !L) throw config_error("missing parameter", "one of nu or L is required");
  from_L = L.has_value();
  return from_L ? *L : *nu;
}

ModelParams make_params(bool from_L, double v, double y, const Mu& mu) {
  return from_L ? ModelParams::from_L(v, y, mu) : ModelParams::from_nu(v, y, mu);
}

// √ε♭ of the ansatz at shift y, on a pulse mesh of spacing h.
double ansatz_alpha(bool from_L, double v, double y, const Mu& mu, double h) {
  const ModelParams p = make_params(from_L, v, y, mu);
  return std::sqrt(build_flat_ansatz(p, pulse_grid(p, h)).eps);
}

}  // namespace

ModelParams resolve_params(ConfigReader& cfg) {
  bool from_L = false;
  const double v = base_nu_or_L(cfg, from_L);
  const Mu mu = cfg.mu();
  const double p_exp = cfg.num("p", 1.0);
  const auto y = cfg.opt_num("y");
  const auto alpha = cfg.opt_num("alpha");
  if (y && alpha) throw config_error("conflicting parameters", "give either y or alpha, not both");
  if (!alpha) {
    const ModelParams p = make_params(from_L, v, y.value_or(0.0), mu);
    if (!y) cfg.num("y", 0.0);
    return p;
  }
  // α(y) rises from 0, peaks and falls again; take the rising branch.
  const double a = std::abs(*alpha);
  const double h = cfg.num("h", 0.02);
  const ModelParams p0 = make_params(from_L, v, 0.0, mu);
  const double y_max = std::pow(p0.L, p_exp);
  if (a == 0.0) return p0;
  double lo = 0.0, a_lo = 0.0, hi = kNaN;
  for (double yy = 0.25; yy <= y_max + 1e-12; yy += 0.25) {
    double ay = kNaN;
    try {
      ay = ansatz_alpha(from_L, v, yy, mu, h);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::Regime) throw;
    }
    if (!std::isfinite(ay) || ay < a_lo) break;
    if (ay >= a) {
      hi = yy;
      break;
    }
    lo = yy;
    a_lo = ay;
  }
  if (!std::isfinite(hi)) {
    std::ostringstream os;
    os << "alpha = " << a << " exceeds the largest ansatz alpha " << a_lo << " on the rising branch";
    throw regime_error("alpha out of range", os.str());
  }
  while (hi - lo > 1e-6) {
    const double mid = 0.5 * (lo + hi);
    (ansatz_alpha(from_L, v, mid, mu, h) < a ? lo : hi) = mid;
  }
  return make_params(from_L, v, 0.5 * (lo + hi), mu);
}

namespace {

Grid make_grid(ConfigReader& cfg, double X_default) {
  const double X = cfg.num("X", X_default);
  const double h = cfg.num("h", 0.02);
  const int order = cfg.integer("order", 8);
  return Grid::make(X, h, order);
}

json params_json(const ModelParams& p) {
  return json{{"nu", p.nu},       {"L", p.L},         {"m", p.m},       {"y", p.y},
              {"nu_flat", p.nu_flat}, {"kappa", p.kappa}, {"eps", p.eps}, {"tau", p.tau},
              {"alpha", p.alpha()}, {"omega", p.omega()}, {"mu", p.mu.as_array()}};
}

json grid_json(const Grid& g) { return json{{"X", g.X}, {"n", g.n}, {"h", g.h}, {"order", g.fd_order}}; }

int stride_of(ConfigReader& cfg) {
  const int s = cfg.integer("stride", 10);
  if (s < 1) throw config_error("bad stride", "stride must be >= 1");
  return s;
}

json cmd_profile(ConfigReader& cfg, json& meta) {
  const ModelParams p = resolve_params(cfg);
  const Grid g = make_grid(cfg, p.L + 25.0);
  const int stride = stride_of(cfg);
  meta["grid"] = grid_json(g);
  const ScalarProfile prof(p.nu);
  using F = ScalarProfile::Field;
  double ode = 0.0, energy = 0.0;
  for (Eigen::Index i = 0; i < g.x.size(); ++i) {
    ode = std::max(ode, std::abs(ode_residual(p, g.x[i])));
    energy = std::max(energy, std::abs(energy_identity_residual(p, g.x[i])));
  }
  json table;
  table["x"] = vec_json(g.x, stride);
  table["R"] = vec_json(prof.sample(g.x, F::R), stride);
  table["r"] = vec_json(prof.sample(g.x, F::r), stride);
  table["sigma"] = vec_json(prof.sample(g.x, F::sigma), stride);
  table["V"] = vec_json(prof.sample(g.x, F::V), stride);
  table["W"] = vec_json(prof.sample(g.x, F::W), stride);
  return json{{"params", params_json(p)},
              {"R0", prof.R0()},
              {"max_ode_residual", ode},
              {"max_energy_residual", energy},
              {"table", table}};
}

json spectral_json(const SpectralResult& s) {
  json parity = json::array();
  for (Parity q : s.parity) parity.push_back(q == Parity::Even ? "even" : "odd");
  return json{{"values", vec_json(s.values)}, {"parity", parity}, {"floor", s.floor}};
}

json cmd_spectrum(ConfigReader& cfg, json& meta) {
  const ModelParams p = resolve_params(cfg);
  const Grid g = make_grid(cfg, p.L + 25.0);
  const int k = cfg.integer("k", 4);
  if (k < 2) throw config_error("bad k", "spectrum needs k >= 2");
  meta["grid"] = grid_json(g);
  const OperatorMatrix A = build_A(p, g), B = build_B(p, g);
  const SpectralResult sa = low_spectrum(g, A, k, p.m, 'A');
  const SpectralResult sb = low_spectrum(g, B, k, p.m, 'B');
  const ScalarProfile prof(p.nu);
  const Vec r = prof.sample(g.x, ScalarProfile::Field::r);
  const Vec rp = prof.sample(g.x, ScalarProfile::Field::rp);
  const double lambda = sa.values[even_ground_index(sa)];
  const double mu2 = sb.values[1];
  return json{{"params", params_json(p)},
              {"A", spectral_json(sa)},
              {"B", spectral_json(sb)},
              {"lambda", lambda},
              {"lambda_over_nu", lambda / p.nu},
              {"lambda_asymptotic_gap", std::abs(lambda / p.nu + 1.5)},
              {"mu2", mu2},
              {"mu2_ratio", mu2 * 4.0 * p.L * p.L / (p.m * M_PI * M_PI)},
              {"kernel_residual_A", l2_norm(g, A * rp) / l2_norm(g, rp)},
              {"kernel_residual_B", l2_norm(g, B * r) / l2_norm(g, r)}};
}

json cmd_phase(ConfigReader& cfg, json& meta) {
  const ModelParams p = resolve_params(cfg);
  const Grid g = make_grid(cfg, p.L + 25.0);
  const int stride = stride_of(cfg);
  meta["grid"] = grid_json(g);
  const PhaseSolution ph = solve_phase(p, g, p.mu);
  json table;
  table["x"] = vec_json(g.x, stride);
  table["q"] = vec_json(ph.q, stride);
  table["phi"] = vec_json(ph.phi, stride);
  table["phi_prime"] = vec_json(ph.phi_prime, stride);
  return json{{"params", params_json(p)},
              {"theta", ph.theta},
              {"theta_prediction", p.mu.is_simplified() ? num(0.75 - 3.0 / (8.0 * p.L)) : json(nullptr)},
              {"theta1", num(ph.theta1)},
              {"theta1_scaled", num(ph.theta1 * 8.0 * p.L * p.L / 3.0)},
              {"phi_prime_limit", phi_prime_limit(p.mu)},
              {"residual", ph.residual},
              {"theta_defect", ph.theta_defect},
              {"table", table}};
}

json cert_json(const Certificate& c) {
  return json{{"rho", c.rho},
              {"M", c.M},
              {"a", c.a},
              {"K", c.K},
              {"d0", c.d0},
              {"hypothesis_ok", c.hypothesis_ok},
              {"bound1", c.bound1},
              {"bound2", c.bound2},
              {"iterations", c.iterations},
              {"max_ratio", c.max_ratio},
              {"dist", c.dist},
              {"dist_newton", c.dist_newton},
              {"noise_floor", c.noise_floor},
              {"bounds_hold", c.bounds_hold}};
}

json cmd_pulse(ConfigReader& cfg, json& meta) {
  const ModelParams p = resolve_params(cfg);
  const Grid g = pulse_grid(p, cfg.num("h", 0.02), cfg.integer("order", 8), cfg.num("margin", 40.0));
  const int stride = stride_of(cfg);
  meta["grid"] = grid_json(g);
  PulseOptions opt;
  opt.require_certificate = cfg.flag("require_certificate", true);
  opt.p_exponent = cfg.num("p", 1.0);
  opt.tol = cfg.num("newton_tol", opt.tol);
  opt.residual_tol = cfg.num("residual_tol", opt.residual_tol);
  const AnsatzState st = solve_pulse(p, g, opt);
  const Vec modulus = (st.U.xi.array().square() + st.U.eps * st.U.eta.array().square()).sqrt();
  json table;
  table["x"] = vec_json(g.x, stride);
  table["xi"] = vec_json(st.U.xi, stride);
  table["eta"] = vec_json(st.U.eta, stride);
  table["modulus"] = vec_json(modulus, stride);
  table["phase"] = vec_json(pulse_phase(st.U), stride);
  return json{{"params", params_json(st.params)},
              {"method", st.method},
              {"certified", st.certified},
              {"residual_norm", st.residual_norm},
              {"flat_residual", st.flat_residual},
              {"correction_norm", st.correction_norm},
              {"eps_flat", st.flat.eps},
              {"theta_flat", st.flat.phase.theta},
              {"eps1", st.eps1},
              {"tau1", st.tau1},
              {"weights", {{"xi", st.weights.xi}, {"eta", st.weights.eta}, {"tau", st.weights.tau}, {"eps", st.weights.eps}}},
              {"certificate", cert_json(st.cert)},
              {"table", table}};
}

json cplx_list(const std::vector<cplx>& v) {
  json a = json::array();
  for (const cplx& z : v) a.push_back(json::array({z.real(), z.imag()}));
  return a;
}

json cmd_stability(ConfigReader& cfg, json& meta) {
  const ModelParams p = resolve_params(cfg);
  const Grid g = pulse_grid(p, cfg.num("h", 0.02), cfg.integer("order", 8), cfg.num("margin", 40.0));
  meta["grid"] = grid_json(g);
  StabilityOptions so;
  so.critical_tol = cfg.num("critical_tol", so.critical_tol);
  so.throw_on_gap = cfg.flag("throw_on_gap", true);
  const bool certify = cfg.flag("certify", false);
  const bool expansion = cfg.flag("expansion", false);
  const StabilityRun run = stability_at(p, g, so, std::nullopt, certify);
  const StabilityReport& r = run.report;
  json out{{"params", params_json(r.params)},
           {"pulse_method", run.pulse.method},
           {"pulse_residual", run.pulse.residual_norm},
           {"classification", r.classification},
           {"M11", r.M11},
           {"M21", r.M21},
           {"M21_first_order", num(r.M21_first_order)},
           {"prediction", r.prediction},
           {"lambda_flat", r.lambda_flat},
           {"phase_residual", r.phase_residual},
           {"translation_residual", r.translation_residual},
           {"phase_in_subspace", r.phase_in_subspace},
           {"cluster_ratio", r.cluster_ratio},
           {"cluster_ok", r.cluster_ok},
           {"cluster_size", r.small.size()},
           {"spectrum_floor", r.spectrum_floor},
           {"shift", r.shift},
           {"iterations", r.iterations},
           {"small", cplx_list(r.small)},
           {"rest", cplx_list(r.rest)}};
  if (expansion) {
    const M11Expansion e = m11_expansion_check(run.pulse, r, g);
    out["expansion"] = json{{"M11_order0", e.M11_order0},       {"M11_order2", e.M11_order2},
                            {"M11_order2_formula", e.M11_order2_formula}, {"da_dL", e.da_dL},
                            {"da_dL_formula", e.da_dL_formula}, {"s_norm2", e.s_norm2}};
  }
  return out;
}

json cmd_alpha_c(ConfigReader& cfg, json& meta) {
  bool from_L = false;
  const double v = base_nu_or_L(cfg, from_L);
  const double L = from_L ? v : L_from_nu(v);
  AlphaCOptions opt;
  const Mu mu = cfg.mu();
  opt.p_exponent = cfg.num("p", opt.p_exponent);
  opt.scan_step = cfg.num("scan_step", opt.scan_step);
  opt.y_tol = cfg.num("y_tol", opt.y_tol);
  opt.h = cfg.num("h", opt.h);
  if (!(opt.scan_step > 0.0)) throw config_error("bad scan step", "scan_step must be positive");
  meta["grid"] = json{{"h", opt.h}, {"order", 8}};
  const AlphaCResult r = find_alpha_c(L, mu, opt);
  json scan = {{"y", json::array()}, {"eps", json::array()}, {"M11", json::array()}};
  for (const AlphaScanPoint& s : r.scan) {
    scan["y"].push_back(s.y);
    scan["eps"].push_back(num(s.eps));
    scan["M11"].push_back(num(s.M11));
  }
  return json{{"L", r.L},
              {"nu", r.nu},
              {"mu", mu.as_array()},
              {"found", r.found},
              {"sign_changes", r.sign_changes},
              {"y_c", num(r.found ? r.y_c : kNaN)},
              {"alpha_c_measured", num(r.found ? r.alpha_c_measured : kNaN)},
              {"alpha_c_formula", r.alpha_c_formula},
              {"normalized_gap", num(r.found ? r.normalized_gap : kNaN)},
              {"yc_ratio", num(r.found ? r.yc_ratio : kNaN)},
              {"M21_at_c", num(r.found ? r.M21_at_c : kNaN)},
              {"M21_first_order_at_c", num(r.found ? r.M21_first_order_at_c : kNaN)},
              {"theta1_flat", num(r.found ? r.theta1_flat : kNaN)},
              {"scan", scan}};
}

json cmd_chi(ConfigReader& cfg, json&) {
  const Mu mu = cfg.mu();
  const auto mu2 = cfg.opt_num("mu2");
  const auto mu3 = cfg.opt_num("mu3");
  const auto L = cfg.opt_num("L");
  const bool table_mode = cfg.has("mu2_values") || cfg.has("mu3_values");
  if (!table_mode) {
    const Mu m{mu.m0, mu.m1, mu2.value_or(mu.m2), mu3.value_or(mu.m3)};
    const ChiResult c = chi_criterion(m);
    json out{{"mu2", m.m2}, {"mu3", m.m3}, {"chi", c.chi}, {"denominator", c.denominator}};
    if (L) out["nu_c_ratio"] = c.nu_c_ratio(*L);
    return out;
  }
  if (mu2 || mu3) throw config_error("conflicting parameters", "use mu2/mu3 or mu2_values/mu3_values, not both");
  const std::vector<double> m2s = cfg.list("mu2_values", {mu.m2});
  const std::vector<double> m3s = cfg.list("mu3_values", {mu.m3});
  if (m2s.empty() || m3s.empty()) throw config_error("empty grid", "chi table needs at least one mu2 and one mu3");
  json table = {{"mu2", json::array()}, {"mu3", json::array()}, {"chi", json::array()}, {"nu_c_ratio", json::array()}};
  for (double a : m2s)
    for (double b : m3s) {
      double chi = kNaN;
      try {
        chi = chi_criterion(Mu{mu.m0, mu.m1, a, b}).chi;
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::Domain) throw;
      }
      table["mu2"].push_back(a);
      table["mu3"].push_back(b);
      table["chi"].push_back(num(chi));
      table["nu_c_ratio"].push_back(L ? num(2.0 * chi / (3.0 * *L * *L)) : json(nullptr));
    }
  return json{{"table", table}};
}

json history_table(const std::vector<DiagnosticSample>& h) {
  json t = {{"t", json::array()},
            {"amp_max", json::array()},
            {"half_width", json::array()},
            {"distance", json::array()},
            {"front", json::array()}};
  for (const DiagnosticSample& d : h) {
    t["t"].push_back(d.t);
    t["amp_max"].push_back(num(d.amp_max));
    t["half_width"].push_back(num(d.half_width));
    t["distance"].push_back(num(d.distance));
    t["front"].push_back(num(d.front));
  }
  return t;
}

json cmd_evolve(ConfigReader& cfg, json& meta) {
  const ModelParams p = resolve_params(cfg);
  StabilizationConfig sc;
  sc.delta = cfg.num("delta", sc.delta);
  sc.T = cfg.num("T", sc.T);
  sc.dt = cfg.num("dt", sc.dt);
  sc.cadence = cfg.num("cadence", sc.cadence);
  sc.N = cfg.integer("N", sc.N);
  sc.h = cfg.num("h_periodic", sc.h);
  sc.sign = cfg.num("sign", sc.sign);
  if (!(sc.T > 0.0 && sc.dt > 0.0 && sc.cadence > 0.0) || sc.N < 16)
    throw config_error("bad evolution config", "T, dt, cadence must be positive and N >= 16");
  meta["grid"] = json{{"N", sc.N}, {"h_periodic", sc.h}, {"W", sc.N * sc.h}};
  const StabilizationResult r = stabilization_experiment(p, sc);
  return json{{"params", params_json(r.params)},
              {"alpha", r.alpha},
              {"M11", r.M11},
              {"linear_class", r.linear_class},
              {"verdict", r.verdict},
              {"verdict_reason", r.reason},
              {"delta_abs", r.delta_abs},
              {"final_distance", num(r.final_distance)},
              {"width_ratio", num(r.width_ratio)},
              {"amp_ratio", num(r.amp_ratio)},
              {"decay_rate", num(r.decay_rate)},
              {"diverged", r.diverged},
              {"table", history_table(r.history)}};
}

json cmd_kink(ConfigReader& cfg, json& meta) {
  bool from_L = false;
  const double v = base_nu_or_L(cfg, from_L);
  const double nu = from_L ? nu_from_L(v) : v;
  const double alpha = cfg.num("alpha", 0.0);
  KinkConfig kc;
  kc.T = cfg.num("T", kc.T);
  kc.dt = cfg.num("dt", kc.dt);
  kc.N = cfg.integer("N", kc.N);
  kc.h = cfg.num("h_periodic", kc.h);
  kc.cadence = cfg.num("cadence", kc.cadence);
  if (!(kc.T > 0.0 && kc.dt > 0.0 && kc.cadence > 0.0) || kc.N < 16)
    throw config_error("bad evolution config", "T, dt, cadence must be positive and N >= 16");
  meta["grid"] = json{{"N", kc.N}, {"h_periodic", kc.h}, {"W", kc.N * kc.h}};
  const KinkSpeedResult r = kink_speed_experiment(nu, alpha, kc);
  json table = history_table(r.history);
  return json{{"nu", r.nu},
              {"alpha", r.alpha},
              {"c_measured", r.c_measured},
              {"c_formula", r.c_formula},
              {"c_printed", r.c_printed},
              {"relative_error", r.c_formula != 0.0 ? num(std::abs(r.c_measured / r.c_formula - 1.0)) : json(nullptr)},
              {"table", json{{"t", table["t"]}, {"front", table["front"]}}}};
}

json run_command(const std::string& command, ConfigReader& cfg, json& meta);

json cmd_sweep(ConfigReader& cfg, json& meta) {
  // the sweep block is validated here; base keys are validated per point
  const json spec = cfg.raw().value("sweep", json());
  if (!spec.is_object()) throw config_error("bad sweep", "sweep needs an object {command, grid}");
  for (const auto& [k, v] : spec.items())
    if (k != "command" && k != "grid") throw config_error("unknown key", "unknown sweep key: " + k);
  if (!spec.contains("command") || !spec["command"].is_string())
    throw config_error("bad sweep", "sweep.command must name a command");
  const std::string inner = spec["command"].get<std::string>();
  if (inner == "sweep" || std::find(commands().begin(), commands().end(), inner) == commands().end())
    throw config_error("bad sweep", "sweep.command '" + inner + "' is not a sweepable command");
  const json grid = spec.value("grid", json::object());
  if (!grid.is_object() || grid.empty()) throw config_error("empty grid", "sweep grid has no axes");

  std::vector<std::string> axes;
  std::vector<std::vector<json>> values;
  for (const auto& [k, v] : grid.items()) {
    if (k == "sweep") throw config_error("bad sweep", "cannot sweep over 'sweep'");
    if (!v.is_array() || v.empty()) throw config_error("empty grid", "sweep axis '" + k + "' has no values");
    axes.push_back(k);
    values.emplace_back(v.begin(), v.end());
  }
  std::vector<json> points(1, json::object());
  for (size_t a = 0; a < axes.size(); ++a) {
    std::vector<json> next;
    for (const json& pt : points)
      for (const json& val : values[a]) {
        json q = pt;
        q[axes[a]] = val;
        next.push_back(std::move(q));
      }
    points = std::move(next);
  }

  json base = cfg.raw();
  base.erase("sweep");
  std::vector<RunOutcome> outcomes(points.size());
  const int workers = std::min<int>(worker_count(), static_cast<int>(points.size()));
  std::atomic<size_t> next{0};
  auto work = [&] {
    for (size_t i = next++; i < points.size(); i = next++) {
      json c = base;
      for (const auto& [k, v] : points[i].items()) c[k] = v;
      outcomes[i] = run(inner, c);
    }
  };
  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (std::thread& t : pool) t.join();

  json results = json::array();
  int failed = 0;
  for (size_t i = 0; i < points.size(); ++i) {
    const RunOutcome& o = outcomes[i];
    if (o.exit_code != 0) ++failed;
    json entry{{"point", points[i]}, {"exit_code", o.exit_code}, {"status", o.result.value("status", "error")}};
    entry["reason"] = o.reason.empty() ? json(nullptr) : json(o.reason);
    entry["result"] = o.result.value("result", json(nullptr));
    entry["config"] = o.result.contains("meta") ? o.result["meta"].value("config", json(nullptr)) : json(nullptr);
    results.push_back(std::move(entry));
  }
  meta["sweep"] = json{{"command", inner}, {"axes", axes}, {"points", points.size()}};
  return json{{"command", inner}, {"axes", axes}, {"failed_points", failed}, {"points", results}};
}

json run_command(const std::string& command, ConfigReader& cfg, json& meta) {
  if (command == "profile") return cmd_profile(cfg, meta);
  if (command == "spectrum") return cmd_spectrum(cfg, meta);
  if (command == "phase") return cmd_phase(cfg, meta);
  if (command == "pulse") return cmd_pulse(cfg, meta);
  if (command == "stability") return cmd_stability(cfg, meta);
  if (command == "alpha-c") return cmd_alpha_c(cfg, meta);
  if (command == "chi") return cmd_chi(cfg, meta);
  if (command == "evolve") return cmd_evolve(cfg, meta);
  if (command == "kink") return cmd_kink(cfg, meta);
  if (command == "sweep") return cmd_sweep(cfg, meta);
  throw config_error("unknown command", "unknown command '" + command + "'");
}

json versions() {
  return json{{"cglpulse", kVersion},
              {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                            std::to_string(EIGEN_MINOR_VERSION)},
              {"fftw", std::string(fftw_version)},
              {"boost", BOOST_LIB_VERSION}};
}

}  // namespace

RunOutcome run(const std::string& command, const json& config) {
  RunOutcome out;
  json meta{{"command", command}, {"versions", versions()}};
  json result;
  std::string message;
  try {
    ConfigReader cfg(config);
    if (std::find(commands().begin(), commands().end(), command) == commands().end())
      throw config_error("unknown command", "unknown command '" + command + "'");
    check_keys(command, cfg.raw());
    result = run_command(command, cfg, meta);
    meta["config"] = command == "sweep" ? cfg.raw() : cfg.resolved();
  } catch (const Error& e) {
    out.exit_code = e.exit_code();
    out.reason = e.reason();
    message = e.what();
  } catch (const json::exception& e) {
    out.exit_code = 2;
    out.reason = "bad config";
    message = e.what();
  } catch (const std::exception& e) {
    out.exit_code = 1;
    out.reason = "internal error";
    message = e.what();
  }
  if (!meta.contains("config")) meta["config"] = config.is_object() ? config : json::object();
  out.result = json{{"meta", meta}, {"exit_code", out.exit_code}};
  if (out.exit_code == 0) {
    out.result["status"] = "ok";
    out.result["result"] = std::move(result);
  } else {
    out.result["status"] = "error";
    out.result["reason"] = out.reason;
    out.result["message"] = message;
  }
  return out;
}

namespace {

std::string csv_cell(const json& v) {
  if (v.is_null()) return "nan";
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_number()) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v.get<double>());
    return buf;
  }
  if (v.is_string()) return v.get<std::string>();
  return "nan";
}

// One-row summary columns per command, also used for sweep rows.
const std::vector<std::string>& summary_columns(const std::string& command) {
  static const std::map<std::string, std::vector<std::string>> cols = {
      {"profile", {"R0", "max_ode_residual", "max_energy_residual"}},
      {"spectrum", {"lambda", "lambda_over_nu", "mu2", "mu2_ratio", "kernel_residual_A", "kernel_residual_B"}},
      {"phase", {"theta", "theta_prediction", "theta1", "theta1_scaled", "residual"}},
      {"pulse", {"method", "certified", "residual_norm", "flat_residual", "correction_norm", "eps_flat"}},
      {"stability", {"classification", "M11", "M21", "M21_first_order", "prediction", "phase_residual",
                     "translation_residual", "cluster_ratio", "cluster_size", "spectrum_floor"}},
      {"alpha-c", {"L", "nu", "y_c", "alpha_c_measured", "alpha_c_formula", "normalized_gap"}},
      {"chi", {"mu2", "mu3", "chi", "nu_c_ratio"}},
      {"evolve", {"alpha", "M11", "linear_class", "verdict", "final_distance", "width_ratio", "amp_ratio",
                  "decay_rate"}},
      {"kink", {"nu", "alpha", "c_measured", "c_formula", "c_printed", "relative_error"}},
  };
  static const std::vector<std::string> none;
  const auto it = cols.find(command);
  return it == cols.end() ? none : it->second;
}

// params-derived columns shared by every point-wise command
const std::vector<std::string>& param_columns() {
  static const std::vector<std::string> c = {"nu", "L", "y", "alpha", "eps", "tau", "kappa"};
  return c;
}

bool has_params(const std::string& command) {
  return command == "profile" || command == "spectrum" || command == "phase" || command == "pulse" ||
         command == "stability" || command == "evolve";
}

void summary_row(const std::string& command, const json& r, std::vector<std::string>& header,
                 std::vector<std::string>& row) {
  auto is_taken = [&](const std::string& c) { return std::find(header.begin(), header.end(), c) != header.end(); };
  if (has_params(command))
    for (const std::string& c : param_columns()) {
      if (is_taken(c)) continue;
      header.push_back(c);
      row.push_back(csv_cell(r.is_object() && r.contains("params") ? r["params"].value(c, json()) : json()));
    }
  for (const std::string& c : summary_columns(command)) {
    if (is_taken(c)) continue;
    header.push_back(c);
    row.push_back(csv_cell(r.is_object() ? r.value(c, json()) : json()));
  }
}

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + v[i];
  return s + "\n";
}

}  // namespace

std::string to_csv(const std::string& command, const json& doc) {
  if (doc.value("status", "") != "ok") return join({"status", "exit_code", "reason"}) +
                                               join({"error", csv_cell(doc.value("exit_code", json())),
                                                     csv_cell(doc.value("reason", json()))});
  const json& r = doc.at("result");
  if (command == "sweep") {
    const std::string inner = r.at("command").get<std::string>();
    const std::vector<std::string> axes = r.at("axes").get<std::vector<std::string>>();
    std::string out;
    bool first = true;
    for (const json& p : r.at("points")) {
      std::vector<std::string> header(axes.begin(), axes.end()), row;
      for (const std::string& a : axes) row.push_back(csv_cell(p["point"][a]));
      header.push_back("exit_code");
      row.push_back(csv_cell(p["exit_code"]));
      summary_row(inner, p["result"], header, row);
      if (first) out += join(header);
      first = false;
      out += join(row);
    }
    return out;
  }
  if (r.contains("table")) {
    const json& t = r.at("table");
    std::vector<std::string> header;
    for (const auto& [k, v] : t.items()) header.push_back(k);
    // x or t first, the rest alphabetical
    for (const char* lead : {"t", "x", "mu3", "mu2"}) {
      auto it = std::find(header.begin(), header.end(), lead);
      if (it != header.end()) std::rotate(header.begin(), it, it + 1);
    }
    std::string out = join(header);
    const size_t rows = t.at(header.front()).size();
    for (size_t i = 0; i < rows; ++i) {
      std::vector<std::string> row;
      for (const std::string& h : header) row.push_back(csv_cell(t[h][i]));
      out += join(row);
    }
    return out;
  }
  std::vector<std::string> header, row;
  summary_row(command, r, header, row);
  return join(header) + join(row);
}

}  // namespace cgl
