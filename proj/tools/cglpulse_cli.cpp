// Command-line front end. Every subcommand builds a flat JSON configuration
// (config file first, flags override) and hands it to cgl::run.
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cglpulse/runner.hpp"

namespace {

using cgl::json;

struct Common {
  std::string config_path;
  std::string out_path;
  std::string csv_path;
  std::string format = "json";
  std::map<std::string, std::optional<double>> numbers;
  std::map<std::string, std::optional<int>> integers;
  std::map<std::string, std::optional<bool>> flags;
  std::vector<double> mu;
};

void add_number(CLI::App* app, Common& c, const std::string& key, const std::string& help) {
  app->add_option("--" + key, c.numbers[key], help);
}
void add_integer(CLI::App* app, Common& c, const std::string& key, const std::string& help) {
  app->add_option("--" + key, c.integers[key], help);
}
void add_flag(CLI::App* app, Common& c, const std::string& key, const std::string& help) {
  app->add_option("--" + key, c.flags[key], help + " (true/false)");
}

void add_params(CLI::App* app, Common& c, bool with_alpha = true) {
  add_number(app, c, "nu", "distance from the heteroclinic threshold, in (0,1)");
  add_number(app, c, "L", "shelf half-width, alternative to --nu");
  add_number(app, c, "y", "ansatz shift y >= 0");
  if (with_alpha) add_number(app, c, "alpha", "skew coefficient; mapped to y on the rising branch");
  add_number(app, c, "p", "regime exponent, y <= L^p");
  app->add_option("--mu", c.mu, "coefficients mu0 mu1 mu2 mu3")->expected(4);
}

void add_fd_grid(CLI::App* app, Common& c) {
  add_number(app, c, "X", "mesh half-width");
  add_number(app, c, "h", "mesh spacing bound");
  add_integer(app, c, "order", "finite-difference order (2, 4, 6, 8)");
}

void add_output(CLI::App* app, Common& c) {
  app->add_option("--config", c.config_path, "JSON configuration file")->check(CLI::ExistingFile);
  app->add_option("--out", c.out_path, "write the JSON result here instead of stdout");
  app->add_option("--csv", c.csv_path, "also write CSV columns here");
  app->add_option("--format", c.format, "stdout format when --out is absent")
      ->check(CLI::IsMember({"json", "csv"}));
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return json::parse(in);
}

json build_config(const Common& c) {
  json cfg = c.config_path.empty() ? json::object() : read_json_file(c.config_path);
  if (!cfg.is_object()) throw std::runtime_error("configuration file must hold a JSON object");
  for (const auto& [k, v] : c.numbers)
    if (v) cfg[k] = *v;
  for (const auto& [k, v] : c.integers)
    if (v) cfg[k] = *v;
  for (const auto& [k, v] : c.flags)
    if (v) cfg[k] = *v;
  if (!c.mu.empty()) cfg["mu"] = c.mu;
  return cfg;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

int emit(const std::string& command, const json& doc, const Common& c) {
  const std::string text = doc.dump(2) + "\n";
  if (!c.out_path.empty())
    write_text(c.out_path, text);
  else if (c.format == "csv")
    std::cout << cgl::to_csv(command, doc);
  else
    std::cout << text;
  if (!c.csv_path.empty()) write_text(c.csv_path, cgl::to_csv(command, doc));
  return doc.value("exit_code", 0);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pulses of the cubic-quintic complex Ginzburg-Landau equation: construction, stability, dynamics"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string("cglpulse ") + cgl::kVersion);

  app.set_help_flag("-h,--help", "print this help and exit");
  std::map<std::string, Common> common;
  auto sub = [&](const std::string& name, const std::string& help) {
    CLI::App* s = app.add_subcommand(name, help);
    s->set_help_flag("--help", "print this help and exit");  // -h would clash with --h
    add_output(s, common[name]);
    return s;
  };

  {
    CLI::App* s = sub("profile", "tables of R, r, sigma, V, W on a mesh");
    Common& c = common["profile"];
    add_params(s, c, false);
    add_fd_grid(s, c);
    add_integer(s, c, "stride", "keep every stride-th row");
  }
  {
    CLI::App* s = sub("spectrum", "low eigenvalues of A and B with asymptotic ratios");
    Common& c = common["spectrum"];
    add_params(s, c, false);
    add_fd_grid(s, c);
    add_integer(s, c, "k", "eigenvalues per operator");
  }
  {
    CLI::App* s = sub("phase", "theta and the phase tables q, phi, phi'");
    Common& c = common["phase"];
    add_params(s, c, false);
    add_fd_grid(s, c);
    add_integer(s, c, "stride", "keep every stride-th row");
  }
  {
    CLI::App* s = sub("pulse", "certified pulse solve");
    Common& c = common["pulse"];
    add_params(s, c);
    add_number(s, c, "h", "mesh spacing bound");
    add_integer(s, c, "order", "finite-difference order");
    add_number(s, c, "margin", "mesh margin beyond L + y");
    add_number(s, c, "newton_tol", "chord step tolerance");
    add_number(s, c, "residual_tol", "final residual bound");
    add_flag(s, c, "require_certificate", "fail when the Newton hypothesis cannot be verified");
    add_integer(s, c, "stride", "keep every stride-th row");
  }
  {
    CLI::App* s = sub("stability", "small spectrum of the linearization at one point");
    Common& c = common["stability"];
    add_params(s, c);
    add_number(s, c, "h", "mesh spacing bound");
    add_integer(s, c, "order", "finite-difference order");
    add_number(s, c, "margin", "mesh margin beyond L + y");
    add_number(s, c, "critical_tol", "|M11| below this is reported critical");
    add_flag(s, c, "throw_on_gap", "fail when the small cluster is not separated");
    add_flag(s, c, "certify", "certify the pulse before the eigen-solve");
    add_flag(s, c, "expansion", "add the M11 expansion check");
  }
  {
    CLI::App* s = sub("alpha-c", "bisection for the stabilization threshold");
    Common& c = common["alpha-c"];
    add_number(s, c, "nu", "distance from the heteroclinic threshold");
    add_number(s, c, "L", "shelf half-width");
    add_number(s, c, "p", "scan y over [0, L^p]");
    add_number(s, c, "scan_step", "coarse scan step in y");
    add_number(s, c, "y_tol", "bisection tolerance in y");
    add_number(s, c, "h", "mesh spacing bound");
    s->add_option("--mu", c.mu, "coefficients mu0 mu1 mu2 mu3")->expected(4);
  }
  {
    CLI::App* s = sub("chi", "general-coefficient stabilization criterion");
    Common& c = common["chi"];
    add_number(s, c, "mu2", "cubic skew coefficient");
    add_number(s, c, "mu3", "quintic skew coefficient");
    add_number(s, c, "L", "report nu_c/nu at this L");
    s->add_option("--mu", c.mu, "coefficients mu0 mu1 mu2 mu3")->expected(4);
  }
  {
    CLI::App* s = sub("evolve", "perturbed pulse evolution and stability verdict");
    Common& c = common["evolve"];
    add_params(s, c);
    add_number(s, c, "delta", "kick size relative to the pulse L2 norm");
    add_number(s, c, "T", "final time");
    add_number(s, c, "dt", "time step");
    add_number(s, c, "cadence", "diagnostic interval");
    add_integer(s, c, "N", "periodic grid points");
    add_number(s, c, "h_periodic", "periodic grid spacing");
    add_number(s, c, "sign", "direction of the kick (+1 or -1)");
  }
  {
    CLI::App* s = sub("kink", "front speed between the zero and the plateau state");
    Common& c = common["kink"];
    add_number(s, c, "nu", "distance from the heteroclinic threshold");
    add_number(s, c, "L", "shelf half-width");
    add_number(s, c, "alpha", "skew coefficient");
    add_number(s, c, "T", "final time");
    add_number(s, c, "dt", "time step");
    add_number(s, c, "cadence", "diagnostic interval");
    add_integer(s, c, "N", "periodic grid points");
    add_number(s, c, "h_periodic", "periodic grid spacing");
  }
  sub("sweep", "any command over a parameter grid; needs --config with a sweep block");

  std::string reemit_in;
  Common reemit_opts;
  {
    CLI::App* s = app.add_subcommand("reemit", "read a result file and write it again");
    s->add_option("input", reemit_in, "result JSON file")->required()->check(CLI::ExistingFile);
    s->add_option("--out", reemit_opts.out_path, "write here instead of stdout");
    s->add_option("--csv", reemit_opts.csv_path, "also write CSV columns here");
    s->add_option("--format", reemit_opts.format, "stdout format")->check(CLI::IsMember({"json", "csv"}));
  }

  CLI11_PARSE(app, argc, argv);

  try {
    for (CLI::App* s : app.get_subcommands()) {
      const std::string name = s->get_name();
      if (name == "reemit") {
        const json doc = read_json_file(reemit_in);
        const std::string cmd = doc.contains("meta") ? doc["meta"].value("command", "") : "";
        return emit(cmd, doc, reemit_opts);
      }
      const Common& c = common.at(name);
      const cgl::RunOutcome o = cgl::run(name, build_config(c));
      if (o.exit_code != 0) std::cerr << "cglpulse " << name << ": " << o.reason << ": "
                                      << o.result.value("message", "") << "\n";
      emit(name, o.result, c);
      return o.exit_code;
    }
  } catch (const std::exception& e) {
    json doc{{"status", "error"}, {"exit_code", 2}, {"reason", "bad config"}, {"message", e.what()}};
    std::cerr << "cglpulse: " << e.what() << "\n";
    std::cout << doc.dump(2) << "\n";
    return 2;
  }
  return 0;
}
