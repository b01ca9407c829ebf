/*
 * Copyright 2026 The ensdiv Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */


#include <doctest.h>

#include <fstream>
#include <iterator>
#include <sstream>

#include <json.hpp>

#include "ensdiv/cli.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using ensdiv::RunCli;

namespace {

int Run(std::vector<std::string> args) {
  args.insert(args.begin(), "ensdiv");
  return RunCli(args);
}

std::string Slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), {});
}

// Column `name` of a CSV file as numbers.
std::vector<double> Column(const fs::path& p, const std::string& name) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  std::vector<std::string> header;
  std::stringstream hs(line);
  for (std::string cell; std::getline(hs, cell, ',');) header.push_back(cell);
  const auto at = std::find(header.begin(), header.end(), name) - header.begin();
  std::vector<double> out;
  while (std::getline(in, line)) {
    std::stringstream ls(line);
    std::string cell;
    for (long i = 0; i <= at; ++i) std::getline(ls, cell, ',');
    out.push_back(std::stod(cell));
  }
  return out;
}

struct Fixture {
  fs::path root = oracle::TempDir("cli");
  fs::path sim = root / "sim";
  fs::path manifest = sim / "manifest.json";

  explicit Fixture(const std::string& noise = "1.0") {
    REQUIRE(Run({"simulate", "--out", sim.string(), "--points", "300", "--models", "6",
                 "--group-size", "3", "--classes", "4", "--noise", noise, "--shift", "0.5",
                 "--seed", "2"}) == 0);
  }
  ~Fixture() { fs::remove_all(root); }
};

}  // namespace

TEST_CASE("argument and input errors exit with 1") {
  Fixture f;
  CHECK(Run({}) == 1);
  CHECK(Run({"decompose", "--out", (f.root / "x").string()}) == 1);
  CHECK(Run({"decompose", "--manifest", (f.root / "none.json").string(), "--out",
             (f.root / "x").string()}) == 1);
  CHECK(Run({"decompose", "--manifest", f.manifest.string(), "--out", (f.root / "x").string(),
             "--family", "bogus"}) == 1);
  CHECK(Run({"decompose", "--manifest", f.manifest.string(), "--out", (f.root / "y").string(),
             "--members", "nope,other"}) == 1);
  // Output directory already holds the simulated store.
  CHECK(Run({"gp-demo", "--out", f.sim.string()}) == 1);
}

TEST_CASE("zero-noise members decompose to zero diversity") {
  Fixture f("0");
  const fs::path out = f.root / "dec";
  REQUIRE(Run({"decompose", "--manifest", f.manifest.string(), "--out", out.string()}) == 0);
  for (const char* fam : {"quadratic_variance", "entropy_jsd", "brier_gap", "nll_gap"}) {
    for (const double d : Column(out / (std::string("decompose_ind_") + fam + ".csv"), "diversity")) {
      CHECK(std::abs(d) < 1e-12);
    }
  }
  // Identical models leave no InD spread for a trend fit.
  CHECK(Run({"trends", "--manifest", f.manifest.string(), "--out", (f.root / "tr").string()}) == 2);
}

TEST_CASE("decompose residuals") {
  Fixture f;
  const fs::path out = f.root / "dec";
  REQUIRE(Run({"decompose", "--manifest", f.manifest.string(), "--out", out.string(), "--base2"}) == 0);
  const auto j = nlohmann::json::parse(Slurp(out / "decompose.json"));
  for (const auto& [ds, rec] : j.at("results").items()) {
    for (const auto& [fam, fr] : rec.at("families").items()) {
      CHECK(fr.at("max_abs_residual").get<double>() < 1e-10);
    }
  }
}

TEST_CASE("conditional output does not depend on the worker count") {
  Fixture f;
  const fs::path a = f.root / "c1";
  const fs::path b = f.root / "c3";
  const std::vector<std::string> common = {"conditional", "--manifest", f.manifest.string(),
                                           "--surrogates", "20", "--seed", "9", "--no-timestamp"};
  auto with = [&](const fs::path& out, const std::string& workers) {
    auto args = common;
    args.insert(args.end(), {"--out", out.string(), "--workers", workers});
    return Run(args);
  };
  REQUIRE(with(a, "1") == 0);
  REQUIRE(with(b, "3") == 0);
  for (const auto& entry : fs::directory_iterator(a)) {
    CHECK(Slurp(entry.path()) == Slurp(b / entry.path().filename()));
  }
  const auto j = nlohmann::json::parse(Slurp(a / "dstat.json"));
  CHECK(j.contains("seed"));
}

TEST_CASE("report indexes a full run directory") {
  Fixture f;
  const fs::path run = f.root / "run";
  REQUIRE(Run({"decompose", "--manifest", f.manifest.string(), "--out", (run / "decompose").string()}) == 0);
  REQUIRE(Run({"trends", "--manifest", f.manifest.string(), "--out", (run / "trends").string(),
               "--metric", "01", "--metric", "brier", "--ensemble-size", "2", "--hetero-bins", "2"}) == 0);
  REQUIRE(Run({"improve", "--manifest", f.manifest.string(), "--out", (run / "improve").string(),
               "--base", "g00_s00", "--alt-a", "g00_s01+g00_s02", "--alt-b", "g01_s00+g01_s01",
               "--control", "g01_s02", "--metric", "brier"}) == 0);
  REQUIRE(Run({"gp-demo", "--out", (run / "gp").string(), "--seed", "1"}) == 0);
  REQUIRE(Run({"report", "--out", run.string()}) == 0);

  const auto index = nlohmann::json::parse(Slurp(run / "index.json"));
  for (const char* key : {"decompose/decompose.json", "trends/trends.json", "improve/improve.json",
                          "gp/gp.json"}) {
    CHECK(index.at("results").contains(key));
  }
  CHECK(fs::exists(run / "trends" / "trends.csv"));
  CHECK(fs::exists(run / "gp" / "gp.svg"));
}
