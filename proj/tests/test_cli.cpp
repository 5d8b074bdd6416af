#include "dfa/cli.hpp"
#include "dfa/io.hpp"

#include <catch_amalgamated.hpp>

#include <sstream>

using namespace dfa;
using io::Json;
namespace fs = std::filesystem;
using Catch::Matchers::ContainsSubstring;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "dfa");
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("dfa_test_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string s(const fs::path& p) { return p.string(); }

// 10 x 3 direct-mode dataset on a line.
fs::path write_minimal_dataset(const fs::path& dir) {
  Json j;
  j["mode"] = "direct";
  j["items"] = Json::array();
  j["A"] = Json::array();
  for (int i = 0; i < 10; ++i) {
    j["items"].push_back({i * 0.1, (i % 3) * 0.2});
    j["A"].push_back({i % 2, (i / 3) % 2, i == 4 ? Json(nullptr) : Json(i % 3 == 0 ? 1 : 0)});
  }
  io::write_json(dir / "data.json", j);
  return dir / "data.json";
}

}  // namespace

TEST_CASE("fit smoke run writes a manifest with diagnostics", "[cli]") {
  const auto dir = scratch("fit");
  const auto data = write_minimal_dataset(dir);
  const std::vector<std::string> args{"fit", "--data", s(data), "--output", s(dir / "out"),
                                      "--k", "3", "--warmup", "200", "--draws", "200",
                                      "--chains", "2", "--seed", "11"};
  const auto r = run(args);
  REQUIRE(r.code == kExitOk);
  const Json m = io::read_json(dir / "out" / "manifest.json");
  CHECK(m["diagnostics"].contains("max_rhat"));
  CHECK(m["diagnostics"]["params"].size() == 10 + 3 + 2 + 3 + 3 + 1);
  CHECK(m["inputs"]["data"]["hash"] == io::file_hash(data));
  CHECK(m["seeds"]["master"] == 11);
  CHECK(m["config"]["sampler"]["draws"] == 200);
  CHECK(m["config"]["epsilon"] == 0.01);
  for (const char* f : {"samples.csv", "delta_summary.csv", "fitted_probs.csv", "covariates.csv",
                        "graph_edges.csv"})
    CHECK(fs::exists(dir / "out" / f));
  CHECK(io::read_samples_csv(dir / "out" / "samples.csv").n_draws() == 400);

  // Byte-identical outputs on a rerun; only the manifest carries a timestamp.
  auto again = args;
  again[4] = s(dir / "again");
  REQUIRE(run(again).code == kExitOk);
  for (const char* f : {"samples.csv", "delta_summary.csv", "fitted_probs.csv"})
    CHECK(io::read_text(dir / "out" / f) == io::read_text(dir / "again" / f));
  Json m2 = io::read_json(dir / "again" / "manifest.json");
  m2["created"] = m["created"];
  m2["config"]["output"] = m["config"]["output"];
  CHECK(m2 == m);
}

TEST_CASE("configuration handling", "[cli]") {
  const auto dir = scratch("config");
  const auto r = run({"fit", "--output", s(dir / "dry"), "--shards", "14", "--chains", "4",
                      "--draws", "5000", "--warmup", "10000", "--k", "10", "--dry-run"});
  REQUIRE(r.code == kExitOk);
  const Json m = io::read_json(dir / "dry" / "manifest.json");
  CHECK(m["config"]["shards"] == 14);
  CHECK(m["config"]["k"] == 10);
  CHECK(m["config"]["sampler"]["chains"] == 4);
  CHECK(m["config"]["sampler"]["draws"] == 5000);
  CHECK(m["config"]["sampler"]["warmup"] == 10000);
  CHECK(Json::parse(r.out)["config"] == m["config"]);

  // Flags override the file.
  io::write_json(dir / "cfg.json", Json{{"k", 4}, {"sampler", {{"draws", 7}}}, {"seed", 5}});
  const auto o = run({"fit", "--config", s(dir / "cfg.json"), "--k", "6", "--output",
                      s(dir / "dry2"), "--dry-run"});
  REQUIRE(o.code == kExitOk);
  const Json c = io::read_json(dir / "dry2" / "manifest.json")["config"];
  CHECK(c["k"] == 6);
  CHECK(c["sampler"]["draws"] == 7);
  CHECK(c["seed"] == 5);

  io::write_json(dir / "bad.json", Json{{"sampler", {{"chains", 2}}}, {"burnin", 100}});
  const auto bad = run({"fit", "--config", s(dir / "bad.json"), "--output", s(dir / "x")});
  CHECK(bad.code == kExitConfig);
  const Json err = Json::parse(bad.err);
  CHECK(err["error"]["category"] == "config_error");
  CHECK_THAT(err["error"]["message"].get<std::string>(), ContainsSubstring("burnin"));

  CHECK(run({"fit", "--bogus-flag"}).code == kExitConfig);
  CHECK(run({"fit", "--k", "0", "--output", s(dir / "x")}).code == kExitConfig);
  CHECK(run({"fit", "--output", s(dir / "x")}).code == kExitConfig);  // no data
  CHECK(run({"fit", "--data", s(dir / "none.json"), "--output", s(dir / "x")}).code == kExitData);
  CHECK(run({}).code == kExitConfig);
}

TEST_CASE("data and sampler failures map to exit codes", "[cli]") {
  const auto dir = scratch("errors");
  io::write_json(dir / "bad.json", Json{{"items", {{0.0}, {1.0}}}, {"A", {{1}, {3}}}});
  const auto r = run({"fit", "--data", s(dir / "bad.json"), "--output", s(dir / "o")});
  CHECK(r.code == kExitData);
  CHECK(Json::parse(r.err)["error"]["module"] == "io");

  // Too few items for the requested neighbors.
  const auto data = write_minimal_dataset(dir);
  const auto k = run({"fit", "--data", s(data), "--k", "12", "--output", s(dir / "o")});
  CHECK(k.code == kExitData);
}

TEST_CASE("simulate-fdr smoke run", "[cli]") {
  const auto dir = scratch("fdr");
  const auto r = run({"simulate-fdr", "--replications", "2", "--items", "40", "--conditions",
                      "5", "--k", "5", "--warmup", "150", "--draws", "150", "--output",
                      s(dir / "out")});
  REQUIRE(r.code == kExitOk);
  const Json agg = io::read_json(dir / "out" / "fdr_aggregate.json");
  REQUIRE(agg["replications"].size() == 2);
  for (const auto& rep : agg["replications"]) {
    CHECK(rep["model_fdr"].get<double>() >= 0.0);
    CHECK(rep["oracle_fdr"].get<double>() <= 1.0);
    CHECK(rep["masked"] == 40);
  }
  CHECK(io::read_numeric_csv(dir / "out" / "fdr_histogram.csv").values.rows() == 4);
  CHECK(io::read_numeric_csv(dir / "out" / "lambda_pairs.csv").values.rows() == 80);
  CHECK(io::read_numeric_csv(dir / "out" / "fdr_replications.csv").values.rows() == 2);
}

TEST_CASE("shards, combination and prediction", "[cli]") {
  const auto dir = scratch("shards");
  REQUIRE(run({"generate-data", "--items", "36", "--conditions", "3", "--k", "4", "--seed", "2",
               "--output", s(dir / "gen")})
              .code == kExitOk);
  const auto data = s(dir / "gen" / "dataset.json");
  const std::vector<std::string> common{"--data", data, "--k", "4", "--warmup", "150",
                                        "--draws", "100", "--chains", "2",
                                        "--delta-covariance", "diagonal"};
  auto fit = [&](const std::string& out, const std::string& shards) {
    std::vector<std::string> a{"fit", "--output", s(dir / out), "--shards", shards};
    a.insert(a.end(), common.begin(), common.end());
    return run(a).code;
  };
  REQUIRE(fit("one", "1") == kExitOk);
  REQUIRE(fit("three", "3") == kExitOk);

  // combine-shards over a single shard reproduces the input samples.
  REQUIRE(run({"combine-shards", "--input", s(dir / "one"), "--output", s(dir / "c1")}).code ==
          kExitOk);
  CHECK(io::read_text(dir / "c1" / "samples.csv") == io::read_text(dir / "one" / "samples.csv"));

  // Re-merging the per-shard outputs reproduces the fit's merged samples.
  REQUIRE(run({"combine-shards", "--input", s(dir / "three"), "--output", s(dir / "c3")}).code ==
          kExitOk);
  CHECK(io::read_text(dir / "c3" / "samples.csv") ==
        io::read_text(dir / "three" / "samples.csv"));
  const Json cm = io::read_json(dir / "c3" / "manifest.json");
  CHECK(cm["shards"].size() == 3);
  const auto merged = io::read_samples_csv(dir / "three" / "samples.csv");
  CHECK(merged.columns_with_prefix("phi").size() == 36);

  // Predicting a training duplicate reproduces its fitted probabilities.
  const Mat cov = io::read_covariates_csv(dir / "one" / "covariates.csv");
  io::write_covariates_csv(dir / "new.csv", cov.middleRows(7, 2));
  REQUIRE(run({"predict", "--manifest", s(dir / "one" / "manifest.json"), "--new-items",
               s(dir / "new.csv"), "--output", s(dir / "pred")})
              .code == kExitOk);
  const Mat pred = io::read_numeric_csv(dir / "pred" / "predictions.csv").values;
  const Mat fitted = io::read_numeric_csv(dir / "one" / "fitted_probs.csv").values;
  for (Index j = 0; j < 2; ++j)
    for (Index c = 0; c < 3; ++c) {
      const Index pr = j * 3 + c, fr = (7 + j) * 3 + c;
      CHECK(pred.row(pr).tail(3) == fitted.row(fr).tail(3));
    }
  const Mat phi = io::read_numeric_csv(dir / "pred" / "phi_draws.csv").values;
  const auto samples = io::read_samples_csv(dir / "one" / "samples.csv");
  CHECK(phi.col(0) == samples.draws.col(samples.column("phi[7]")));
}

TEST_CASE("dynamic and drug-mode commands", "[cli]") {
  const auto dir = scratch("dynamic");
  REQUIRE(run({"generate-data", "--kind", "dynamic", "--items", "20", "--conditions", "2",
               "--visits", "3", "--k", "3", "--output", s(dir / "gen")})
              .code == kExitOk);
  const auto r = run({"fit-dynamic", "--data", s(dir / "gen" / "dataset.json"), "--k", "3",
                      "--warmup", "100", "--draws", "50", "--chains", "2", "--output",
                      s(dir / "fit")});
  REQUIRE(r.code == kExitOk);
  const Json m = io::read_json(dir / "fit" / "manifest.json");
  CHECK(m["model"]["kind"] == "dynamic");
  CHECK(io::read_samples_csv(dir / "fit" / "samples.csv").has("rho_ou"));

  REQUIRE(run({"generate-data", "--kind", "drug", "--items", "30", "--conditions", "4",
               "--anchors", "2", "--k", "4", "--output", s(dir / "drug")})
              .code == kExitOk);
  const Json d = io::read_json(dir / "drug" / "dataset.json");
  CHECK(d["mode"] == "drug");
  REQUIRE(run({"fit", "--data", s(dir / "drug" / "dataset.json"), "--k", "4", "--warmup", "100",
               "--draws", "50", "--chains", "2", "--output", s(dir / "dfit")})
              .code == kExitOk);
  const Mat probs = io::read_numeric_csv(dir / "dfit" / "condition_probs.csv").values;
  CHECK(probs.rows() == 30 * 4);
  CHECK(probs.col(2).minCoeff() >= 0.0);
  CHECK(probs.col(2).maxCoeff() <= 1.0);
}
