#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "cglpulse/params.hpp"

namespace cgl {

using json = nlohmann::json;

inline constexpr const char* kVersion = "1.0.0";

// Flat configuration keys; run() rejects keys a command does not take.
//   nu | L, y | alpha, mu = [μ₀, μ₁, μ₂, μ₃], p
//   X, h, order                        finite-difference mesh
//   dt, T, delta, N, h_periodic, sign  evolution
//   k                                  number of eigenvalues (spectrum)
//   stride                             row decimation of tables
//   mu2_values, mu3_values             chi table
//   sweep = {command, grid: {key: [values]}}
class ConfigReader {
public:
  explicit ConfigReader(json j);
  bool has(const std::string& key) const;
  double num(const std::string& key, double def);
  std::optional<double> opt_num(const std::string& key);
  int integer(const std::string& key, int def);
  bool flag(const std::string& key, bool def);
  std::vector<double> list(const std::string& key, const std::vector<double>& def);
  Mu mu();
  // Every key read, with defaults filled in.
  const json& resolved() const { return resolved_; }
  const json& raw() const { return j_; }

private:
  json j_;
  json resolved_ = json::object();
};

struct RunOutcome {
  int exit_code = 0;
  std::string reason;  // empty on success
  json result;         // includes "meta" and "status"
};

// Runs one command; never throws. Exit codes: 0 success, 1 numeric failure,
// 2 configuration or domain error, 3 regime violation.
RunOutcome run(const std::string& command, const json& config);

// Known command names.
const std::vector<std::string>& commands();

// Stable columns per command, one header line then rows.
std::string to_csv(const std::string& command, const json& result);

// Worker threads for sweeps: CGLPULSE_WORKERS if set, else hardware threads.
int worker_count();

// Parameters for a config; alpha is mapped to y on the rising branch of α(y).
ModelParams resolve_params(ConfigReader& cfg);

}  // namespace cgl
