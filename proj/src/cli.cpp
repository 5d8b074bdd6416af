#include "dfa/cli.hpp"

#include "dfa/consensus.hpp"
#include "dfa/io.hpp"
#include "dfa/parallel.hpp"
#include "dfa/predict.hpp"
#include "dfa/schema.hpp"
#include "dfa/simulate.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <ctime>
#include <fstream>
#include <numeric>
#include <optional>
#include <ostream>

namespace dfa {

namespace {

using io::Json;
namespace fs = std::filesystem;

constexpr const char* kVersion = "0.1.0";
// Stream of the master seed that draws the shard partition.
constexpr std::uint64_t kPlanStream = 1u << 20;

struct Flags {
  std::optional<std::string> config, data, covariates, a_csv, output, mode, delta_covariance;
  std::optional<double> epsilon;
  std::optional<int> k, shards, workers;
  std::optional<std::uint64_t> seed;
  std::optional<int> chains, warmup, draws, max_depth;
  std::optional<double> target_accept;
  std::optional<std::string> kind;
  std::optional<int> items, conditions, replications, anchors, visits;
  std::optional<double> tau_s, tau_u, sigma_delta, mask_fraction, rho_ou, sigma_ou, miss_prob;
  std::optional<std::string> manifest, new_items, input;
  std::optional<double> level;
  bool dry_run = false;
};

void add_common(CLI::App* sub, Flags& f) {
  sub->add_option("--config", f.config, "JSON run configuration; flags override it");
  sub->add_option("--output", f.output, "Output directory");
  sub->add_option("--seed", f.seed, "Master seed");
  sub->add_option("--workers", f.workers, "Worker threads (default: DFA_WORKERS or all cores)");
  sub->add_flag("--dry-run", f.dry_run, "Resolve and record the configuration without running");
}

void add_model(CLI::App* sub, Flags& f) {
  sub->add_option("--data", f.data, "Dataset JSON");
  sub->add_option("--covariates", f.covariates, "Covariate CSV (with --a-csv)");
  sub->add_option("--a-csv", f.a_csv, "Condition matrix CSV, empty cells missing");
  sub->add_option("--mode", f.mode, "direct or drug");
  sub->add_option("--delta-covariance", f.delta_covariance, "diagonal or lowrank");
  sub->add_option("--epsilon", f.epsilon, "Off-indication drug probability");
  sub->add_option("--k", f.k, "Neighbors per item");
}

void add_sampler(CLI::App* sub, Flags& f) {
  sub->add_option("--chains", f.chains, "Number of chains");
  sub->add_option("--warmup", f.warmup, "Warmup iterations per chain");
  sub->add_option("--draws", f.draws, "Kept draws per chain");
  sub->add_option("--target-accept", f.target_accept, "Step-size adaptation target");
  sub->add_option("--max-depth", f.max_depth, "Maximum tree depth");
}

void add_simulation(CLI::App* sub, Flags& f) {
  sub->add_option("--kind", f.kind, "static, drug or dynamic");
  sub->add_option("--items", f.items, "Number of items");
  sub->add_option("--conditions", f.conditions, "Number of conditions");
  sub->add_option("--replications", f.replications, "FDR replications");
  sub->add_option("--anchors", f.anchors, "Single-drug conditions");
  sub->add_option("--visits", f.visits, "Visits per item (dynamic)");
  sub->add_option("--tau-s", f.tau_s, "Structured spatial precision");
  sub->add_option("--tau-u", f.tau_u, "Unstructured precision");
  sub->add_option("--sigma-delta", f.sigma_delta, "Condition effect scale");
  sub->add_option("--mask-fraction", f.mask_fraction, "Fraction of observed cells masked");
  sub->add_option("--rho-ou", f.rho_ou, "OU persistence per unit time");
  sub->add_option("--sigma-ou", f.sigma_ou, "OU stationary scale");
  sub->add_option("--miss-prob", f.miss_prob, "Probability of missing a visit");
}

template <class T>
void put(Json& j, const char* key, const std::optional<T>& v) {
  if (v) j[key] = *v;
}

// Config file overlaid with the flags that were given.
Json merge_config(const std::string& command, const Flags& f) {
  Json j = Json::object();
  if (f.config) {
    j = io::read_json(*f.config);
    if (!j.is_object()) throw ConfigError("cli", "config file must hold a JSON object");
  }
  if (j.contains("command") && j["command"] != command)
    throw ConfigError("cli", "config is for command " + j["command"].dump() + ", not '" +
                                 command + "'");
  j["command"] = command;
  put(j, "data", f.data);
  put(j, "covariates", f.covariates);
  put(j, "a_csv", f.a_csv);
  put(j, "output", f.output);
  put(j, "mode", f.mode);
  put(j, "delta_covariance", f.delta_covariance);
  put(j, "epsilon", f.epsilon);
  put(j, "k", f.k);
  put(j, "seed", f.seed);
  put(j, "shards", f.shards);
  put(j, "workers", f.workers);
  Json s = j.value("sampler", Json::object());
  put(s, "chains", f.chains);
  put(s, "warmup", f.warmup);
  put(s, "draws", f.draws);
  put(s, "target_accept", f.target_accept);
  put(s, "max_depth", f.max_depth);
  if (!s.empty()) j["sampler"] = s;
  Json sim = j.value("simulation", Json::object());
  put(sim, "kind", f.kind);
  put(sim, "items", f.items);
  put(sim, "conditions", f.conditions);
  put(sim, "replications", f.replications);
  put(sim, "anchors", f.anchors);
  put(sim, "visits", f.visits);
  put(sim, "tau_s", f.tau_s);
  put(sim, "tau_u", f.tau_u);
  put(sim, "sigma_delta", f.sigma_delta);
  put(sim, "mask_fraction", f.mask_fraction);
  put(sim, "rho_ou", f.rho_ou);
  put(sim, "sigma_ou", f.sigma_ou);
  put(sim, "miss_prob", f.miss_prob);
  if (!sim.empty()) j["simulation"] = sim;
  Json p = j.value("predict", Json::object());
  put(p, "manifest", f.manifest);
  put(p, "new_items", f.new_items);
  put(p, "level", f.level);
  if (!p.empty()) j["predict"] = p;
  Json c = j.value("combine", Json::object());
  put(c, "input", f.input);
  if (!c.empty()) j["combine"] = c;
  return j;
}

// Fills every default so the manifest records the full configuration.
Json resolve(const Json& raw) {
  Json r = raw;
  const std::string cmd = r["command"];
  const bool sim = cmd == "simulate-fdr" || cmd == "generate-data";
  auto def = [](Json& j, const char* key, Json v) {
    if (!j.contains(key)) j[key] = std::move(v);
  };
  def(r, "seed", 1);
  def(r, "epsilon", 0.01);
  if (cmd != "predict") def(r, "k", 10);
  def(r, "delta_covariance", sim ? "diagonal" : "lowrank");
  if (cmd == "fit") def(r, "shards", 1);
  if (cmd == "fit-dynamic") def(r, "spatial_potential", true);
  if (cmd == "fit" || cmd == "fit-dynamic" || cmd == "simulate-fdr") {
    Json s = r.value("sampler", Json::object());
    def(s, "chains", 4);
    def(s, "warmup", cmd == "simulate-fdr" ? 500 : 1000);
    def(s, "draws", cmd == "simulate-fdr" ? 500 : 1000);
    def(s, "target_accept", 0.8);
    def(s, "max_depth", 10);
    r["sampler"] = s;
  }
  if (sim) {
    const SimConfig d;
    Json s = r.value("simulation", Json::object());
    def(s, "kind", "static");
    def(s, "items", d.n_items);
    def(s, "conditions", d.n_conditions);
    def(s, "covariates", d.n_covariates);
    def(s, "tau_s", d.tau_s);
    def(s, "tau_u", d.tau_u);
    def(s, "sigma_delta", d.sigma_delta);
    def(s, "mask_fraction", d.mask_fraction);
    def(s, "replications", d.replications);
    def(s, "anchors", std::min(d.n_anchor, s["conditions"].get<int>()));
    def(s, "min_drugs", d.min_drugs);
    def(s, "max_drugs", d.max_drugs);
    def(s, "visits", d.n_visits);
    def(s, "rho_ou", d.ou.rho_ou);
    def(s, "sigma_ou", d.ou.sigma_ou);
    def(s, "visit_interval", d.visit_interval);
    def(s, "miss_prob", d.miss_prob);
    r["simulation"] = s;
  }
  if (cmd == "predict") {
    Json p = r.value("predict", Json::object());
    def(p, "level", 0.95);
    r["predict"] = p;
  }
  return r;
}

std::string require_string(const Json& j, const char* key, const std::string& what) {
  if (!j.contains(key)) throw ConfigError("cli", what + " needs '" + key + "'");
  return j[key].get<std::string>();
}

DeltaCovariance delta_mode(const Json& r) {
  return r["delta_covariance"] == "diagonal" ? DeltaCovariance::Diagonal : DeltaCovariance::LowRank;
}

SamplerConfig sampler_config(const Json& r) {
  const Json& s = r["sampler"];
  SamplerConfig c;
  c.chains = s["chains"];
  c.warmup = s["warmup"];
  c.draws = s["draws"];
  c.target_accept = s["target_accept"];
  c.max_depth = s["max_depth"];
  c.seed = r["seed"];
  return c;
}

int workers_of(const Json& r) {
  const int w = r.value("workers", 0);
  return w > 0 ? w : default_workers();
}

std::string timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

Json base_manifest(const Json& resolved) {
  Json m;
  m["command"] = resolved["command"];
  m["version"] = kVersion;
  m["created"] = timestamp();
  m["config"] = resolved;
  m["inputs"] = Json::object();
  return m;
}

void record_input(Json& manifest, const std::string& role, const fs::path& path) {
  Json e{{"path", path.string()}};
  if (fs::exists(path)) e["hash"] = io::file_hash(path);
  manifest["inputs"][role] = e;
}

// JSON has no infinities; those are written as strings.
Json number(double x) { return std::isfinite(x) ? Json(x) : Json(io::format_double(x)); }

Json diagnostics_json(const Diagnostics& d) {
  Json params = Json::array();
  for (const auto& p : d.params)
    params.push_back({{"name", p.name}, {"rhat", number(p.rhat)},
                      {"ess_bulk", number(p.ess_bulk)}});
  return {{"max_rhat", number(d.max_rhat)},
          {"min_ess_bulk", number(d.min_ess_bulk)},
          {"divergences", d.divergences},
          {"params", params}};
}

Json chains_json(const std::vector<ChainStats>& chains) {
  Json out = Json::array();
  for (const auto& c : chains)
    out.push_back({{"chain", c.chain},
                   {"seed", c.seed},
                   {"step_size", c.step_size},
                   {"divergences", c.divergences},
                   {"warmup_divergences", c.warmup_divergences},
                   {"mean_accept", c.mean_accept},
                   {"mean_tree_depth", c.mean_tree_depth},
                   {"n_leapfrog", c.n_leapfrog}});
  return out;
}

Dataset load_dataset(const Json& r, Json& manifest) {
  Dataset d;
  if (r.contains("data")) {
    const fs::path p = r["data"].get<std::string>();
    record_input(manifest, "data", p);
    d = io::dataset_from_json(io::read_json(p));
  } else if (r.contains("covariates") && r.contains("a_csv")) {
    const fs::path cp = r["covariates"].get<std::string>(), ap = r["a_csv"].get<std::string>();
    record_input(manifest, "covariates", cp);
    record_input(manifest, "a_csv", ap);
    d.covariates = io::read_covariates_csv(cp);
    d.a_obs = io::read_a_csv(ap);
    d.validate();
  } else {
    throw ConfigError("cli", "give 'data' (JSON) or both 'covariates' and 'a_csv'");
  }
  if (r.contains("mode")) {
    const auto m = r["mode"] == "drug" ? LikelihoodMode::Drug : LikelihoodMode::Direct;
    if (m != d.mode)
      throw ConfigError("cli", "config mode " + r["mode"].dump() + " does not match the dataset");
  }
  return d;
}

void write_fitted_probs(const fs::path& path, const PosteriorSamples& s, Index n_items) {
  const Mat delta = s.block("delta");
  Mat table(n_items * delta.cols(), 5);
  Index row = 0;
  for (Index i = 0; i < n_items; ++i) {
    const Vec phi = s.draws.col(s.column("phi[" + std::to_string(i) + "]"));
    const auto p = summarize_probabilities(delta.colwise() + phi);
    for (Index c = 0; c < delta.cols(); ++c)
      table.row(row++) << double(i), double(c), p.mean[c], p.lo[c], p.hi[c];
  }
  io::write_numeric_csv(path, {"item", "condition", "mean", "lo", "hi"}, table);
}

Json items_json(const std::vector<int>& items) { return Json(items); }

void print_manifest(std::ostream& out, const Json& m) { out << m.dump(2) << "\n"; }

// ------------------------------------------------------------------ commands

int cmd_fit(const Json& r, bool dry_run, std::ostream& out) {
  const fs::path dir = require_string(r, "output", "fit");
  Json manifest = base_manifest(r);
  if (dry_run) {
    for (const char* key : {"data", "covariates", "a_csv"})
      if (r.contains(key)) record_input(manifest, key, r[key].get<std::string>());
    manifest["dry_run"] = true;
    io::write_json(dir / "manifest.json", manifest);
    print_manifest(out, manifest);
    return kExitOk;
  }
  const Dataset data = load_dataset(r, manifest);
  FitConfig fc;
  fc.model = {delta_mode(r), r["epsilon"]};
  fc.k = r["k"];
  fc.sampler = sampler_config(r);
  const std::uint64_t master = r["seed"];
  const int m = r["shards"];
  const int workers = workers_of(r);

  const std::uint64_t plan_seed = derive_seed(master, kPlanStream);
  const auto plan = make_shards(data.covariates, m, fc.k, plan_seed);
  const auto subs = run_shards(data, plan, fc, workers);
  PosteriorSamples merged = wasserstein_barycenter(subs, master);
  merged.seed = master;

  Json seeds{{"master", master}, {"plan", plan_seed}, {"shards", Json::array()}};
  Json shards = Json::array();
  int divergences = 0;
  for (const auto& sub : subs) {
    seeds["shards"].push_back({{"shard", sub.shard},
                               {"seed", shard_seed(master, sub.shard)},
                               {"chains", Json::array()}});
    for (const auto& c : sub.chains) seeds["shards"].back()["chains"].push_back(c.seed);
    divergences += sub.diagnostics.divergences;
    if (m > 1) {
      const fs::path sd = dir / ("shard_" + std::to_string(sub.shard));
      io::write_samples_csv(sd / "samples.csv", sub.samples);
      std::ofstream edges(sd / "graph_edges.csv");
      write_edge_list_csv(plan.graphs[sub.shard], edges);
      Json sm = base_manifest(r);
      sm["inputs"] = manifest["inputs"];
      sm["model"] = {{"kind", "static"}, {"n_items", sub.items.size()}};
      sm["samples"] = "samples.csv";
      sm["shard"] = {{"id", sub.shard}, {"items", items_json(sub.items)}};
      sm["seeds"] = {{"master", master}, {"shard", shard_seed(master, sub.shard)}};
      sm["diagnostics"] = diagnostics_json(sub.diagnostics);
      sm["chains"] = chains_json(sub.chains);
      io::write_json(sd / "manifest.json", sm);
    }
    shards.push_back({{"id", sub.shard},
                      {"n_items", sub.items.size()},
                      {"max_rhat", number(sub.diagnostics.max_rhat)},
                      {"divergences", sub.diagnostics.divergences}});
  }

  io::write_samples_csv(dir / "samples.csv", merged);
  io::write_covariates_csv(dir / "covariates.csv", data.covariates);
  io::write_delta_summary_csv(dir / "delta_summary.csv", merged);
  write_fitted_probs(dir / "fitted_probs.csv", merged, data.n_items());
  if (m == 1) {
    std::ofstream edges(dir / "graph_edges.csv");
    write_edge_list_csv(plan.graphs[0], edges);
  }
  if (data.mode == LikelihoodMode::Drug)
    io::write_probability_csv(dir / "condition_probs.csv",
                              posterior_condition_prob(merged, CellLikelihood(data, fc.model.epsilon)));

  manifest["model"] = {{"kind", "static"},
                       {"mode", data.mode == LikelihoodMode::Drug ? "drug" : "direct"},
                       {"n_items", data.n_items()},
                       {"n_conditions", data.n_conditions()},
                       {"k", fc.k},
                       {"metric", "euclidean"}};
  manifest["samples"] = "samples.csv";
  manifest["covariates"] = "covariates.csv";
  manifest["seeds"] = seeds;
  std::vector<int> all(static_cast<std::size_t>(data.n_items()));
  std::iota(all.begin(), all.end(), 0);
  if (m == 1) {
    manifest["shard"] = {{"id", 0}, {"items", items_json(all)}};
    manifest["diagnostics"] = diagnostics_json(subs[0].diagnostics);
    manifest["chains"] = chains_json(subs[0].chains);
  } else {
    manifest["shards"] = shards;
    manifest["diagnostics"] = diagnostics_json(diagnose(merged, divergences));
  }
  io::write_json(dir / "manifest.json", manifest);
  out << "wrote " << (dir / "manifest.json").string() << "\n";
  return kExitOk;
}

int cmd_fit_dynamic(const Json& r, bool dry_run, std::ostream& out) {
  const fs::path dir = require_string(r, "output", "fit-dynamic");
  Json manifest = base_manifest(r);
  const fs::path data_path = require_string(r, "data", "fit-dynamic");
  record_input(manifest, "data", data_path);
  if (dry_run) {
    manifest["dry_run"] = true;
    io::write_json(dir / "manifest.json", manifest);
    print_manifest(out, manifest);
    return kExitOk;
  }
  if (r.value("shards", 1) != 1) throw ConfigError("cli", "fit-dynamic does not shard");
  const auto data = io::longitudinal_from_json(io::read_json(data_path));
  DynamicFitConfig fc;
  fc.model = {delta_mode(r), r["epsilon"], r["spatial_potential"]};
  fc.k = r["k"];
  fc.sampler = sampler_config(r);
  const auto fit = fit_dynamic(data, fc, workers_of(r));

  io::write_samples_csv(dir / "samples.csv", fit.samples);
  io::write_covariates_csv(dir / "covariates.csv", data.covariates);
  io::write_delta_summary_csv(dir / "delta_summary.csv", fit.samples);
  manifest["model"] = {{"kind", "dynamic"},
                       {"mode", data.mode == LikelihoodMode::Drug ? "drug" : "direct"},
                       {"n_items", data.n_items()},
                       {"n_visits", data.n_visits()},
                       {"n_conditions", data.n_conditions()},
                       {"k", fc.k},
                       {"metric", "euclidean"}};
  manifest["samples"] = "samples.csv";
  manifest["covariates"] = "covariates.csv";
  Json chain_seeds = Json::array();
  for (const auto& c : fit.chains) chain_seeds.push_back(c.seed);
  const std::uint64_t master = r["seed"];
  manifest["seeds"] = {{"master", master}, {"fit", shard_seed(master, 0)}, {"chains", chain_seeds}};
  manifest["diagnostics"] = diagnostics_json(fit.diagnostics);
  manifest["chains"] = chains_json(fit.chains);
  io::write_json(dir / "manifest.json", manifest);
  out << "wrote " << (dir / "manifest.json").string() << "\n";
  return kExitOk;
}

int cmd_predict(const Json& r, bool dry_run, std::ostream& out) {
  const fs::path dir = require_string(r, "output", "predict");
  const Json& p = r["predict"];
  const fs::path manifest_path = require_string(p, "manifest", "predict");
  const fs::path new_path = require_string(p, "new_items", "predict");
  Json manifest = base_manifest(r);
  record_input(manifest, "fit_manifest", manifest_path);
  record_input(manifest, "new_items", new_path);
  if (dry_run) {
    manifest["dry_run"] = true;
    io::write_json(dir / "manifest.json", manifest);
    print_manifest(out, manifest);
    return kExitOk;
  }
  const Json fit = io::read_json(manifest_path);
  if (!fit.contains("model") || fit["model"].value("kind", "") != "static")
    throw DataError("cli", manifest_path.string() + " is not a static fit manifest");
  const fs::path base = manifest_path.parent_path();
  const fs::path samples_path = base / fit["samples"].get<std::string>();
  const fs::path cov_path = base / fit["covariates"].get<std::string>();
  record_input(manifest, "samples", samples_path);
  const auto samples = io::read_samples_csv(samples_path);
  const Mat train = io::read_covariates_csv(cov_path);
  const Mat queries = io::read_covariates_csv(new_path);
  const int k = r.contains("k") ? r["k"].get<int>() : fit["model"]["k"].get<int>();
  const double level = p["level"];
  const auto pred = predict_new_items(samples, train, queries, k, Metric::euclidean(), level);

  Mat table(pred.prob_mean.size(), 5);
  Index row = 0;
  for (Index j = 0; j < pred.prob_mean.rows(); ++j)
    for (Index c = 0; c < pred.prob_mean.cols(); ++c)
      table.row(row++) << double(j), double(c), pred.prob_mean(j, c), pred.prob_lo(j, c),
          pred.prob_hi(j, c);
  io::write_numeric_csv(dir / "predictions.csv", {"item", "condition", "mean", "lo", "hi"}, table);
  std::vector<std::string> names;
  for (Index j = 0; j < pred.phi.cols(); ++j) names.push_back("phi_new[" + std::to_string(j) + "]");
  io::write_numeric_csv(dir / "phi_draws.csv", names, pred.phi);
  manifest["k"] = k;
  manifest["level"] = level;
  io::write_json(dir / "manifest.json", manifest);
  out << "wrote " << (dir / "predictions.csv").string() << "\n";
  return kExitOk;
}

SimConfig sim_config(const Json& r) {
  const Json& s = r["simulation"];
  SimConfig c;
  c.n_items = s["items"];
  c.n_conditions = s["conditions"];
  c.n_covariates = s["covariates"];
  c.k = r["k"];
  c.tau_s = s["tau_s"];
  c.tau_u = s["tau_u"];
  c.delta_covariance = delta_mode(r);
  c.sigma_delta = s["sigma_delta"];
  c.mask_fraction = s["mask_fraction"];
  c.replications = s["replications"];
  c.seed = r["seed"];
  c.epsilon = r["epsilon"];
  c.n_anchor = s["anchors"];
  c.min_drugs = s["min_drugs"];
  c.max_drugs = s["max_drugs"];
  c.n_visits = s["visits"];
  c.ou = {s["rho_ou"], s["sigma_ou"]};
  c.visit_interval = s["visit_interval"];
  c.miss_prob = s["miss_prob"];
  if (r.contains("sampler")) c.sampler = sampler_config(r);
  c.validate();
  return c;
}

int cmd_simulate_fdr(const Json& r, bool dry_run, std::ostream& out) {
  const fs::path dir = require_string(r, "output", "simulate-fdr");
  Json manifest = base_manifest(r);
  const SimConfig cfg = sim_config(r);
  if (r["simulation"]["kind"] != "static")
    throw ConfigError("cli", "simulate-fdr uses the static generator");
  if (dry_run) {
    manifest["dry_run"] = true;
    io::write_json(dir / "manifest.json", manifest);
    print_manifest(out, manifest);
    return kExitOk;
  }
  const auto report = fdr_study(cfg, workers_of(r));

  Mat reps(static_cast<Index>(report.replications.size()), 12);
  Json entries = Json::array();
  Mat hist(2 * reps.rows(), 3);
  for (std::size_t i = 0; i < report.replications.size(); ++i) {
    const auto& x = report.replications[i];
    reps.row(i) << x.replication, x.masked, x.model.discoveries, x.model.false_discoveries,
        x.model.fdr, double(x.model.none), x.oracle.discoveries, x.oracle.false_discoveries,
        x.oracle.fdr, double(x.oracle.none), x.correlation, x.max_rhat;
    hist.row(2 * i) << x.replication, 0.0, x.model.fdr;
    hist.row(2 * i + 1) << x.replication, 1.0, x.oracle.fdr;
    entries.push_back({{"replication", x.replication},
                       {"seed", x.seed},
                       {"masked", x.masked},
                       {"positives", x.model.positives},
                       {"model_fdr", x.model.fdr},
                       {"model_discoveries", x.model.discoveries},
                       {"model_zero_discoveries", x.model.none},
                       {"oracle_fdr", x.oracle.fdr},
                       {"oracle_discoveries", x.oracle.discoveries},
                       {"oracle_zero_discoveries", x.oracle.none},
                       {"correlation", x.correlation},
                       {"max_rhat", number(x.max_rhat)}});
  }
  io::write_numeric_csv(dir / "fdr_replications.csv",
                        {"replication", "masked", "model_discoveries", "model_false",
                         "model_fdr", "model_zero_discoveries", "oracle_discoveries",
                         "oracle_false", "oracle_fdr", "oracle_zero_discoveries", "correlation",
                         "max_rhat"},
                        reps);
  // source 0 = model, 1 = oracle
  io::write_numeric_csv(dir / "fdr_histogram.csv", {"replication", "source", "fdr"}, hist);
  Mat pairs(static_cast<Index>(report.lambda_pairs.size()), 3);
  for (std::size_t i = 0; i < report.lambda_pairs.size(); ++i)
    pairs.row(i) << report.lambda_pairs[i].replication, report.lambda_pairs[i].truth,
        report.lambda_pairs[i].estimate;
  io::write_numeric_csv(dir / "lambda_pairs.csv",
                        {"replication", "true_lambda", "posterior_mean_lambda"}, pairs);
  const Json aggregate{{"replications", entries},
                       {"mean_model_fdr", report.mean_model_fdr},
                       {"mean_oracle_fdr", report.mean_oracle_fdr},
                       {"fdr_gap", report.mean_model_fdr - report.mean_oracle_fdr},
                       {"mean_correlation", report.mean_correlation}};
  io::write_json(dir / "fdr_aggregate.json", aggregate);
  manifest["seeds"] = {{"master", cfg.seed}};
  io::write_json(dir / "manifest.json", manifest);
  out << "mean model FDR " << report.mean_model_fdr << ", oracle FDR " << report.mean_oracle_fdr
      << "\n";
  return kExitOk;
}

int cmd_generate_data(const Json& r, bool dry_run, std::ostream& out) {
  const fs::path dir = require_string(r, "output", "generate-data");
  Json manifest = base_manifest(r);
  const SimConfig cfg = sim_config(r);
  const std::string kind = r["simulation"]["kind"];
  if (dry_run) {
    manifest["dry_run"] = true;
    io::write_json(dir / "manifest.json", manifest);
    print_manifest(out, manifest);
    return kExitOk;
  }
  Json truth;
  const ItemGraph* graph = nullptr;
  SimulatedData flat;
  SimulatedLongitudinal longi;
  if (kind == "dynamic") {
    longi = generate_dynamic(cfg, cfg.seed);
    io::write_json(dir / "dataset.json", io::longitudinal_to_json(longi.data));
    truth["delta"] = std::vector<double>(longi.truth.delta.begin(), longi.truth.delta.end());
    truth["phi"] = Json::array();
    for (Index i = 0; i < longi.truth.phi.rows(); ++i) {
      const Vec row = longi.truth.phi.row(i);
      truth["phi"].push_back(std::vector<double>(row.begin(), row.end()));
    }
    graph = &longi.truth.graph;
  } else {
    flat = kind == "drug" ? generate_polypharmacy(cfg, cfg.seed) : generate_static(cfg, cfg.seed);
    io::write_json(dir / "dataset.json", io::dataset_to_json(flat.data));
    truth["phi"] = std::vector<double>(flat.truth.phi.begin(), flat.truth.phi.end());
    truth["delta"] = std::vector<double>(flat.truth.delta.begin(), flat.truth.delta.end());
    truth["A"] = Json::array();
    for (Index i = 0; i < flat.truth.a.rows(); ++i) {
      const Eigen::VectorXi row = flat.truth.a.row(i);
      truth["A"].push_back(std::vector<int>(row.begin(), row.end()));
    }
    graph = &flat.truth.graph;
  }
  io::write_json(dir / "truth.json", truth);
  {
    std::ofstream edges(dir / "graph_edges.csv");
    write_edge_list_csv(*graph, edges);
  }
  manifest["seeds"] = {{"master", cfg.seed}};
  manifest["outputs"] = {{"dataset", {{"path", "dataset.json"},
                                      {"hash", io::file_hash(dir / "dataset.json")}}}};
  io::write_json(dir / "manifest.json", manifest);
  out << "wrote " << (dir / "dataset.json").string() << "\n";
  return kExitOk;
}

int cmd_combine(const Json& r, const Json& raw, bool dry_run, std::ostream& out) {
  const fs::path dir = require_string(r, "output", "combine-shards");
  const fs::path input = require_string(r.value("combine", Json::object()), "input",
                                        "combine-shards");
  if (!fs::is_directory(input)) throw DataError("cli", input.string() + " is not a directory");
  std::vector<fs::path> shard_dirs;
  auto is_shard = [](const fs::path& d) {
    return fs::exists(d / "manifest.json") && io::read_json(d / "manifest.json").contains("shard");
  };
  if (is_shard(input)) {
    shard_dirs.push_back(input);
  } else {
    for (const auto& e : fs::directory_iterator(input))
      if (e.is_directory() && is_shard(e.path())) shard_dirs.push_back(e.path());
    std::sort(shard_dirs.begin(), shard_dirs.end());
  }
  if (shard_dirs.empty()) throw DataError("cli", "no shard manifests under " + input.string());

  Json manifest = base_manifest(r);
  std::vector<SubPosterior> subs;
  std::optional<std::uint64_t> recorded_master;
  Json provenance = Json::array();
  for (const auto& sd : shard_dirs) {
    const Json sm = io::read_json(sd / "manifest.json");
    if (!sm.contains("shard") || !sm.contains("samples"))
      throw DataError("cli", (sd / "manifest.json").string() + " has no shard record");
    SubPosterior sub;
    sub.shard = sm["shard"]["id"];
    sub.items = sm["shard"]["items"].get<std::vector<int>>();
    const fs::path sp = sd / sm["samples"].get<std::string>();
    sub.samples = io::read_samples_csv(sp);
    if (!recorded_master && sm.contains("seeds") && sm["seeds"].contains("master"))
      recorded_master = sm["seeds"]["master"].get<std::uint64_t>();
    provenance.push_back({{"shard", sub.shard},
                          {"manifest", (sd / "manifest.json").string()},
                          {"samples", sp.string()},
                          {"samples_hash", io::file_hash(sp)},
                          {"n_items", sub.items.size()},
                          {"n_draws", sub.samples.n_draws()}});
    subs.push_back(std::move(sub));
  }
  std::sort(subs.begin(), subs.end(),
            [](const SubPosterior& a, const SubPosterior& b) { return a.shard < b.shard; });
  const std::uint64_t seed = raw.contains("seed") || !recorded_master
                                 ? r["seed"].get<std::uint64_t>()
                                 : *recorded_master;
  manifest["shards"] = provenance;
  manifest["seeds"] = {{"master", seed}};
  if (dry_run) {
    manifest["dry_run"] = true;
    io::write_json(dir / "manifest.json", manifest);
    print_manifest(out, manifest);
    return kExitOk;
  }
  const auto merged = wasserstein_barycenter(subs, seed);
  io::write_samples_csv(dir / "samples.csv", merged);
  if (merged.block("delta").cols() > 0)
    io::write_delta_summary_csv(dir / "delta_summary.csv", merged);
  manifest["samples"] = "samples.csv";
  manifest["diagnostics"] = diagnostics_json(diagnose(merged, 0));
  io::write_json(dir / "manifest.json", manifest);
  out << "wrote " << (dir / "samples.csv").string() << "\n";
  return kExitOk;
}

void print_error(std::ostream& err, const std::string& category, const std::string& module,
                 const std::string& message, int code) {
  const Json j{{"error",
                {{"category", category}, {"module", module}, {"message", message},
                 {"exit_code", code}}}};
  err << j.dump() << "\n";
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Spatial latent-factor models for binary item-by-condition data", "dfa"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);
  Flags f;
  const std::vector<std::pair<const char*, const char*>> commands{
      {"fit", "Fit the static model (optionally sharded)"},
      {"fit-dynamic", "Fit the longitudinal model"},
      {"predict", "Predict conditions for new items from a static fit"},
      {"simulate-fdr", "Run the masking FDR study on simulated data"},
      {"generate-data", "Write a simulated dataset and its ground truth"},
      {"combine-shards", "Merge per-shard samples by Wasserstein barycenter"}};
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    add_common(sub, f);
    const std::string n = name;
    if (n == "fit" || n == "fit-dynamic") {
      add_model(sub, f);
      add_sampler(sub, f);
      if (n == "fit") sub->add_option("--shards", f.shards, "Number of shards");
    } else if (n == "predict") {
      sub->add_option("--manifest", f.manifest, "Manifest of a static fit");
      sub->add_option("--new-items", f.new_items, "Covariate CSV of the new items");
      sub->add_option("--k", f.k, "Neighbors (default: the fit's k)");
      sub->add_option("--level", f.level, "Credible interval level");
    } else if (n == "simulate-fdr" || n == "generate-data") {
      add_simulation(sub, f);
      sub->add_option("--k", f.k, "Neighbors per item");
      sub->add_option("--epsilon", f.epsilon, "Off-indication drug probability");
      sub->add_option("--delta-covariance", f.delta_covariance, "diagonal or lowrank");
      if (n == "simulate-fdr") add_sampler(sub, f);
    } else {
      sub->add_option("--input", f.input, "Directory of shard outputs");
    }
  }

  std::vector<std::string> rev(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << "\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    print_error(err, "config_error", "cli", e.what(), kExitConfig);
    return kExitConfig;
  }
  const std::string command = app.get_subcommands().front()->get_name();
  try {
    const Json raw = merge_config(command, f);
    validate_json(raw, run_config_schema());
    const Json r = resolve(raw);
    if (command == "fit") return cmd_fit(r, f.dry_run, out);
    if (command == "fit-dynamic") return cmd_fit_dynamic(r, f.dry_run, out);
    if (command == "predict") return cmd_predict(r, f.dry_run, out);
    if (command == "simulate-fdr") return cmd_simulate_fdr(r, f.dry_run, out);
    if (command == "generate-data") return cmd_generate_data(r, f.dry_run, out);
    return cmd_combine(r, raw, f.dry_run, out);
  } catch (const ConfigError& e) {
    print_error(err, "config_error", e.module(), e.what(), kExitConfig);
    return kExitConfig;
  } catch (const DataError& e) {
    print_error(err, "data_error", e.module(), e.what(), kExitData);
    return kExitData;
  } catch (const SamplerError& e) {
    print_error(err, "sampler_error", e.module(), e.what(), kExitSampler);
    return kExitSampler;
  } catch (const Json::exception& e) {
    print_error(err, "config_error", "cli", e.what(), kExitConfig);
    return kExitConfig;
  } catch (const fs::filesystem_error& e) {
    print_error(err, "data_error", "io", e.what(), kExitData);
    return kExitData;
  }
}

}  // namespace dfa
