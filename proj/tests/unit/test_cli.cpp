#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "doctest.h"
#include "json.hpp"
#include "nirvar/io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = nirvar::cli::run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path workdir(const std::string& name) {
  const fs::path dir = fs::path(NIRVAR_CLI_WORKDIR) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json load(const fs::path& p) { return json::parse(slurp(p)); }

}  // namespace

TEST_CASE("simulate writes files that parse back") {
  const auto dir = workdir("sim_small");
  const auto r = run({"simulate", "--out", dir.string(), "--set", "N=4", "--set", "K=2", "--set", "T=30", "--seed", "5"});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("realised spectral radius") != std::string::npos);
  const auto panel = nirvar::io::read_panel_csv(dir / "panel.csv");
  CHECK(panel.series() == 4);
  CHECK(panel.length() == 30);
  const auto truth = nirvar::io::read_ground_truth(dir / "truth.json");
  CHECK(truth.n == 4);
  CHECK(truth.rho == doctest::Approx(0.9));
  const auto cfg = load(dir / "simulate.config.json");
  CHECK(cfg.at("N") == 4);
  CHECK(cfg.at("seed") == 5);
}

TEST_CASE("simulation is byte-identical for a repeated seed") {
  const auto a = workdir("sim_a"), b = workdir("sim_b");
  REQUIRE(run({"simulate", "--out", a.string(), "--set", "N=10", "--set", "T=100", "--seed", "9"}).code == 0);
  REQUIRE(run({"simulate", "--out", b.string(), "--set", "N=10", "--set", "T=100", "--seed", "9"}).code == 0);
  CHECK(slurp(a / "panel.csv") == slurp(b / "panel.csv"));
  CHECK(slurp(a / "truth.json") == slurp(b / "truth.json"));
}

TEST_CASE("configuration errors exit with code 2") {
  const auto dir = workdir("errors");
  CHECK(run({"simulate", "--out", dir.string(), "--set", "rho=1.2"}).code == 2);
  CHECK(run({"simulate", "--out", dir.string(), "--set", "bogus=1"}).code == 2);
  CHECK(run({"simulate", "--out", dir.string(), "--set", "N=abc"}).code == 2);
  CHECK(run({"estimate", "--out", dir.string(), "--set", "panel=" + (dir / "missing.csv").string()}).code == 2);
  CHECK(run({"frobnicate"}).code == 2);
  std::ofstream(dir / "cfg.json") << R"({"N": 10, "unknown_key": 3})";
  const auto r = run({"simulate", "--config", (dir / "cfg.json").string(), "--out", dir.string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("unknown_key") != std::string::npos);
  std::ofstream(dir / "typed.json") << R"({"N": "ten"})";
  CHECK(run({"simulate", "--config", (dir / "typed.json").string(), "--out", dir.string()}).code == 2);
}

TEST_CASE("config file values apply and flags override them") {
  const auto dir = workdir("cfg");
  std::ofstream(dir / "cfg.json") << R"({"N": 6, "T": 40, "K": 3})";
  REQUIRE(run({"simulate", "--config", (dir / "cfg.json").string(), "--set", "T=50", "--out", dir.string()}).code == 0);
  const auto p = nirvar::io::read_panel_csv(dir / "panel.csv");
  CHECK(p.series() == 6);
  CHECK(p.length() == 50);
}

TEST_CASE("estimate on simulated data reports ARI and is idempotent") {
  const auto dir = workdir("est");
  REQUIRE(run({"simulate", "--out", dir.string(), "--set", "N=60", "--set", "K=3", "--set", "T=1500", "--seed", "3"})
              .code == 0);
  const std::vector<std::string> args{"estimate",  "--out",
                                      (dir / "a").string(), "--set",
                                      "panel=" + (dir / "panel.csv").string(), "--set",
                                      "truth=" + (dir / "truth.json").string(), "--set",
                                      "K=3",       "--seed",
                                      "1"};
  const auto r = run(args);
  REQUIRE(r.code == 0);
  CHECK(r.out.find("ARI vs truth") != std::string::npos);
  const auto cmp = load(dir / "a" / "comparison.json");
  CHECK(cmp.at("ari")[0].get<double>() >= 0.9);
  for (const char* f : {"model.json", "clusters.csv", "embedding.csv", "eigen.json", "estimate.config.json"})
    CHECK(fs::exists(dir / "a" / f));

  auto again = args;
  again[2] = (dir / "b").string();
  REQUIRE(run(again).code == 0);
  for (const char* f : {"model.json", "clusters.csv", "embedding.csv", "eigen.json", "comparison.json"})
    CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));

  // eval on the model against the truth gives the same comparison
  const auto e = run({"eval", "--out", (dir / "e").string(), "--set", "model=" + (dir / "a" / "model.json").string(),
                      "--set", "truth=" + (dir / "truth.json").string()});
  REQUIRE(e.code == 0);
  CHECK(load(dir / "e" / "comparison.json") == cmp);
}

TEST_CASE("precision mode with N > T is a clean error") {
  const auto dir = workdir("prec");
  REQUIRE(run({"simulate", "--out", dir.string(), "--set", "N=30", "--set", "T=20"}).code == 0);
  const auto r = run({"estimate", "--out", dir.string(), "--set", "panel=" + (dir / "panel.csv").string(), "--set",
                      "mode=precision"});
  CHECK(r.code == 2);
  CHECK_FALSE(r.err.empty());
}

TEST_CASE("backtest and eval of a model against itself") {
  const auto dir = workdir("bt");
  REQUIRE(run({"simulate", "--out", dir.string(), "--set", "N=20", "--set", "T=400", "--seed", "4"}).code == 0);
  const auto r = run({"backtest", "--out", dir.string(), "--set", "panel=" + (dir / "panel.csv").string(), "--set",
                      "window=300", "--set", "refit_every=10", "--set", "recluster_every=50", "--set",
                      "baselines=true"});
  REQUIRE(r.code == 0);
  for (const char* f : {"predictions.csv", "metrics.csv", "mse.csv", "report.json"}) CHECK(fs::exists(dir / f));
  const auto report = load(dir / "report.json");
  CHECK(report.at("steps") == 100);
  CHECK(report.at("clusters").size() == 2);

  const std::string pred = (dir / "predictions.csv").string();
  const auto e = run({"eval", "--out", (dir / "eval").string(), "--set", "predictions=" + pred + "," + pred, "--set",
                      "names=a,b"});
  REQUIRE(e.code == 0);
  std::ifstream in(dir / "eval" / "mse.csv");
  std::string line;
  std::getline(in, line);
  int rows = 0;
  while (std::getline(in, line)) {
    CHECK(line.substr(line.rfind(',') + 1) == "1");
    ++rows;
  }
  CHECK(rows == 200);
}

TEST_CASE("mpfit recovers the noise scale of a white-noise panel") {
  const auto dir = workdir("mp");
  REQUIRE(run({"simulate", "--out", dir.string(), "--set", "N=200", "--set", "T=1000", "--set", "rho=0", "--set",
               "sigma2=2", "--seed", "6"})
              .code == 0);
  const auto r = run({"mpfit", "--out", dir.string(), "--set", "panel=" + (dir / "panel.csv").string()});
  REQUIRE(r.code == 0);
  const double s2 = load(dir / "mpfit.json").at("features")[0].at("sigma2").get<double>();
  CHECK(std::abs(s2 - 2.0) < 0.2);
}

TEST_CASE("missing input files give a nonzero exit") {
  const auto dir = workdir("missing");
  CHECK(run({"backtest", "--out", dir.string(), "--set", "panel=" + (dir / "nope.csv").string()}).code != 0);
  CHECK(run({"mpfit", "--out", dir.string(), "--set", "panel=" + (dir / "nope.csv").string()}).code != 0);
  CHECK(run({"eval", "--out", dir.string(), "--set", "predictions=" + (dir / "nope.csv").string()}).code != 0);
}
