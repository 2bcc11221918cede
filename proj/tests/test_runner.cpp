#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "cglpulse/runner.hpp"

using namespace cgl;

namespace {

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::vector<std::string> cells(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  for (std::string c; std::getline(in, c, ',');) out.push_back(c);
  return out;
}

}  // namespace

TEST_SUITE("runner") {

TEST_CASE("spectrum reports the flat ground state") {
  const RunOutcome o = run("spectrum", json{{"L", 4.0}});
  REQUIRE(o.exit_code == 0);
  CHECK(o.result["status"] == "ok");
  const json& r = o.result["result"];
  CHECK(r["lambda_over_nu"].get<double>() == doctest::Approx(-1.5).epsilon(0.1));
  CHECK(r["kernel_residual_A"].get<double>() <= 1e-8);
  CHECK(r["A"]["parity"].size() == 4);
  // defaults land in the resolved config
  CHECK(o.result["meta"]["config"]["h"] == 0.02);
  CHECK(o.result["meta"]["config"]["k"] == 4);
}

TEST_CASE("chi at a single point and as a table") {
  const RunOutcome o = run("chi", json{{"mu2", 1.0}, {"mu3", 0.0}});
  REQUIRE(o.exit_code == 0);
  CHECK(o.result["result"]["chi"].get<double>() == doctest::Approx(0.6168502750680849).epsilon(1e-14));

  const RunOutcome t = run("chi", json{{"mu2_values", {0.5, 1.0}}, {"mu3_values", {0.0, 0.2, 0.4}}});
  REQUIRE(t.exit_code == 0);
  const std::vector<std::string> csv = lines(to_csv("chi", t.result));
  REQUIRE(csv.size() == 7);
  CHECK(cells(csv[0]).front() == "mu2");
  CHECK(cells(csv[0])[1] == "mu3");
  CHECK(cells(csv[1])[0] == "0.5");
  CHECK(cells(csv[3])[1] == "0.40000000000000002");
}

TEST_CASE("configuration errors exit with 2") {
  const RunOutcome unknown = run("chi", json{{"mu2", 1.0}, {"bogus", 3}});
  CHECK(unknown.exit_code == 2);
  CHECK(unknown.reason == "unknown key");
  CHECK(unknown.result["status"] == "error");

  const RunOutcome empty = run("sweep", json{{"sweep", {{"command", "chi"}, {"grid", json::object()}}}});
  CHECK(empty.exit_code == 2);
  CHECK(empty.reason == "empty grid");
  const RunOutcome empty_axis = run("sweep", json{{"sweep", {{"command", "chi"}, {"grid", {{"mu2", json::array()}}}}}});
  CHECK(empty_axis.exit_code == 2);
  CHECK(empty_axis.reason == "empty grid");

  CHECK(run("spectrum", json{{"L", 4.0}, {"nu", 1e-3}}).exit_code == 2);
  CHECK(run("spectrum", json::array({1, 2})).exit_code == 2);
  CHECK(run("nope", json::object()).exit_code == 2);
  CHECK(run("sweep", json{{"sweep", {{"command", "sweep"}, {"grid", {{"L", {3.0}}}}}}}).exit_code == 2);
}

TEST_CASE("alpha beyond the ansatz branch is a regime error") {
  const RunOutcome o = run("profile", json{{"L", 3.0}, {"alpha", 0.5}, {"h", 0.05}});
  CHECK(o.exit_code == 3);
  CHECK(o.reason == "alpha out of range");
}

TEST_CASE("output is deterministic") {
  const json cfg{{"L", 3.5}, {"y", 0.5}, {"stride", 50}};
  const std::string a = run("phase", cfg).result["result"].dump();
  const std::string b = run("phase", cfg).result["result"].dump();
  CHECK(a == b);
}

TEST_CASE("sweeps keep grid order and match single runs") {
  const json cfg{{"sweep", {{"command", "chi"}, {"grid", {{"mu2", {0.5, 1.0, 2.0}}, {"mu3", {0.0, 0.1}}}}}}};
  const RunOutcome o = run("sweep", cfg);
  REQUIRE(o.exit_code == 0);
  const json& pts = o.result["result"]["points"];
  REQUIRE(pts.size() == 6);
  CHECK(o.result["result"]["failed_points"] == 0);
  size_t i = 0;
  for (double m2 : {0.5, 1.0, 2.0})
    for (double m3 : {0.0, 0.1}) {
      CHECK(pts[i]["point"]["mu2"] == m2);
      CHECK(pts[i]["point"]["mu3"] == m3);
      const RunOutcome single = run("chi", json{{"mu2", m2}, {"mu3", m3}});
      CHECK(pts[i]["result"]["chi"] == single.result["result"]["chi"]);
      ++i;
    }
  const std::vector<std::string> csv = lines(to_csv("sweep", o.result));
  REQUIRE(csv.size() == 7);
  const std::vector<std::string> header = cells(csv[0]);
  CHECK(header[0] == "mu2");
  CHECK(header[1] == "mu3");
  CHECK(header[2] == "exit_code");
  CHECK(std::find(header.begin(), header.end(), "chi") != header.end());
}

TEST_CASE("a failing sweep point does not stop the others") {
  const json cfg{{"h", 0.05}, {"sweep", {{"command", "spectrum"}, {"grid", {{"L", {3.0, -1.0}}}}}}};
  const RunOutcome o = run("sweep", cfg);
  REQUIRE(o.exit_code == 0);
  const json& pts = o.result["result"]["points"];
  CHECK(pts[0]["exit_code"] == 0);
  CHECK(pts[1]["exit_code"] == 2);
  CHECK(o.result["result"]["failed_points"] == 1);
}

TEST_CASE("csv from a reparsed document is unchanged") {
  const RunOutcome o = run("spectrum", json{{"L", 3.0}, {"h", 0.05}});
  REQUIRE(o.exit_code == 0);
  const json back = json::parse(o.result.dump());
  CHECK(to_csv("spectrum", back) == to_csv("spectrum", o.result));
  const std::vector<std::string> csv = lines(to_csv("spectrum", o.result));
  REQUIRE(csv.size() == 2);
  const std::vector<std::string> header = cells(csv[0]);
  const std::vector<std::string> expect = {"nu",     "L",           "y",        "alpha",     "eps",
                                           "tau",    "kappa",       "lambda",   "lambda_over_nu",
                                           "mu2",    "mu2_ratio",   "kernel_residual_A", "kernel_residual_B"};
  CHECK(header == expect);
  CHECK(cells(csv[1]).size() == expect.size());

  const std::vector<std::string> err = lines(to_csv("chi", run("chi", json{{"bogus", 1}}).result));
  REQUIRE(err.size() == 2);
  CHECK(err[0] == "status,exit_code,reason");
  CHECK(err[1] == "error,2,unknown key");
}

TEST_CASE("profile table columns") {
  const RunOutcome o = run("profile", json{{"L", 3.0}, {"stride", 100}});
  REQUIRE(o.exit_code == 0);
  const std::vector<std::string> csv = lines(to_csv("profile", o.result));
  CHECK(cells(csv[0]).front() == "x");
  CHECK(csv.size() == o.result["result"]["table"]["x"].size() + 1);
  CHECK(o.result["result"]["max_ode_residual"].get<double>() <= 1e-12);
}

}  // TEST_SUITE
