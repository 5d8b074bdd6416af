#include "dfa/cli.hpp"
#include "dfa/fit.hpp"
#include "dfa/graph.hpp"
#include "dfa/io.hpp"
#include "dfa/predict.hpp"
#include "dfa/simulate.hpp"

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

namespace py = pybind11;
using namespace dfa;

namespace {

DeltaCovariance parse_delta(const std::string& s) {
  if (s == "diagonal") return DeltaCovariance::Diagonal;
  if (s == "lowrank") return DeltaCovariance::LowRank;
  throw ConfigError("python", "delta_covariance must be 'diagonal' or 'lowrank'");
}

Dataset direct_dataset(const Mat& covariates, const IntMat& a) {
  Dataset d;
  d.covariates = covariates;
  d.a_obs = a;
  d.validate();
  return d;
}

py::dict truth_dict(const GroundTruth& t) {
  py::dict out;
  out["phi"] = t.phi;
  out["delta"] = t.delta;
  out["lambda"] = t.lambda;
  out["A"] = t.a;
  out["edges"] = t.graph.edges();
  return out;
}

}  // namespace

PYBIND11_MODULE(_dfa, m) {
  m.doc() = "Spatial disease factor model: simulation, fitting and prediction.";
  m.attr("MISSING") = kMissing;

  static py::exception<ConfigError> config_error(m, "ConfigError", PyExc_ValueError);
  static py::exception<DataError> data_error(m, "DataError", PyExc_ValueError);
  static py::exception<SamplerError> sampler_error(m, "SamplerError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ConfigError& e) {
      config_error(e.what());
    } catch (const DataError& e) {
      data_error(e.what());
    } catch (const SamplerError& e) {
      sampler_error(e.what());
    }
  });

  m.def(
      "run_cli",
      [](std::vector<std::string> args) {
        args.insert(args.begin(), "dfa");
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          code = run_cli(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs a dfa subcommand; returns (exit_code, stdout, stderr).");

  m.def("derive_seed", &derive_seed, py::arg("parent"), py::arg("stream"));

  m.def(
      "knn_edges",
      [](const Mat& points, int k) { return build_knn_graph(points, k).edges(); },
      py::arg("points"), py::arg("k"));
  m.def(
      "laplacian",
      [](const Mat& points, int k) { return Mat(laplacian(build_knn_graph(points, k))); },
      py::arg("points"), py::arg("k"), "Dense graph Laplacian of the k-NN graph.");

  m.def(
      "generate_static",
      [](Index items, Index conditions, int k, std::uint64_t seed, double tau_s, double tau_u) {
        SimConfig cfg;
        cfg.n_items = items;
        cfg.n_conditions = conditions;
        cfg.k = k;
        cfg.tau_s = tau_s;
        cfg.tau_u = tau_u;
        cfg.n_anchor = std::min<int>(cfg.n_anchor, conditions);
        const auto sim = generate_static(cfg, seed);
        py::dict out = truth_dict(sim.truth);
        out["covariates"] = sim.data.covariates;
        return out;
      },
      py::arg("items"), py::arg("conditions"), py::arg("k") = 10, py::arg("seed") = 1,
      py::arg("tau_s") = 2.0, py::arg("tau_u") = 2.0);

  m.def(
      "mask_entries",
      [](const IntMat& a, double fraction, std::uint64_t seed) {
        auto masked = mask_entries(a, fraction, seed);
        return py::make_tuple(masked.a_obs, masked.cells);
      },
      py::arg("A"), py::arg("fraction"), py::arg("seed"));

  m.def(
      "count_discoveries",
      [](const IntMat& truth, const Mat& lambda, const std::vector<Index>& cells) {
        const auto d = count_discoveries(truth, lambda, cells);
        py::dict out;
        out["discoveries"] = d.discoveries;
        out["false_discoveries"] = d.false_discoveries;
        out["positives"] = d.positives;
        out["fdr"] = d.fdr;
        out["none"] = d.none;
        return out;
      },
      py::arg("truth"), py::arg("lambda_"), py::arg("cells"));

  m.def(
      "fit",
      [](const Mat& covariates, const IntMat& a, int k, int chains, int warmup, int draws,
         std::uint64_t seed, const std::string& delta_covariance, double epsilon) {
        FitConfig cfg;
        cfg.k = k;
        cfg.model = {parse_delta(delta_covariance), epsilon};
        cfg.sampler.chains = chains;
        cfg.sampler.warmup = warmup;
        cfg.sampler.draws = draws;
        cfg.sampler.seed = seed;
        const Dataset data = direct_dataset(covariates, a);
        FitResult fit;
        {
          py::gil_scoped_release release;
          fit = fit_static(data, cfg, 0);
        }
        py::dict out;
        out["names"] = fit.samples.names;
        out["draws"] = fit.samples.draws;
        out["chain"] = fit.samples.chain;
        out["max_rhat"] = fit.diagnostics.max_rhat;
        out["min_ess_bulk"] = fit.diagnostics.min_ess_bulk;
        out["divergences"] = fit.diagnostics.divergences;
        out["lambda_mean"] = posterior_mean_lambda(fit.samples);
        return out;
      },
      py::arg("covariates"), py::arg("A"), py::arg("k") = 10, py::arg("chains") = 4,
      py::arg("warmup") = 1000, py::arg("draws") = 1000, py::arg("seed") = 1,
      py::arg("delta_covariance") = "lowrank", py::arg("epsilon") = 0.01);

  m.def("interpolation_weights", &interpolation_weights, py::arg("distances"));

  m.def(
      "predict",
      [](const std::vector<std::string>& names, const Mat& draws, const Mat& train_covariates,
         const Mat& new_covariates, int k, double level) {
        PosteriorSamples s;
        s.names = names;
        s.draws = draws;
        s.chain.assign(draws.rows(), 0);
        const auto p = predict_new_items(s, train_covariates, new_covariates, k,
                                         Metric::euclidean(), level);
        py::dict out;
        out["phi"] = p.phi;
        out["mean"] = p.prob_mean;
        out["lo"] = p.prob_lo;
        out["hi"] = p.prob_hi;
        std::vector<std::vector<int>> nbrs;
        for (const auto& row : p.neighbors) {
          auto& r = nbrs.emplace_back();
          for (const auto& n : row) r.push_back(n.index);
        }
        out["neighbors"] = nbrs;
        return out;
      },
      py::arg("names"), py::arg("draws"), py::arg("train_covariates"), py::arg("new_covariates"),
      py::arg("k") = 10, py::arg("level") = 0.95);

  m.def("git_blob_hash", [](const std::string& bytes) { return io::git_blob_hash(bytes); },
        py::arg("data"));
}
