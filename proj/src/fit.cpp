#include "dfa/fit.hpp"

namespace dfa {

Target make_target(std::shared_ptr<const StaticModel> model) {
  Target t;
  t.names = model->param_names();
  t.transforms = model->transforms();
  t.log_density = [model](const Vec& x, Vec* g) { return model->log_posterior(x, g); };
  return t;
}

Target make_target(std::shared_ptr<const DynamicModel> model) {
  Target t;
  t.names = model->param_names();
  t.transforms = model->transforms();
  t.log_density = [model](const Vec& x, Vec* g) { return model->log_posterior(x, g); };
  return t;
}

FitResult fit_model(std::shared_ptr<const StaticModel> model, const SamplerConfig& cfg,
                    int workers) {
  return run_chains(make_target(std::move(model)), cfg, workers);
}

FitResult fit_model(std::shared_ptr<const DynamicModel> model, const SamplerConfig& cfg,
                    int workers) {
  return run_chains(make_target(std::move(model)), cfg, workers);
}

FitResult fit_static(const Dataset& data, const FitConfig& cfg, int workers,
                     const Metric& metric) {
  cfg.sampler.validate();
  auto model = std::make_shared<const StaticModel>(
      StaticModel::from_dataset(data, cfg.k, cfg.model, metric));
  SamplerConfig s = cfg.sampler;
  s.seed = shard_seed(cfg.sampler.seed, 0);
  return fit_model(std::move(model), s, workers);
}

FitResult fit_dynamic(const LongitudinalDataset& data, const DynamicFitConfig& cfg, int workers,
                      const Metric& metric) {
  cfg.sampler.validate();
  auto model = std::make_shared<const DynamicModel>(
      DynamicModel::from_dataset(data, cfg.k, cfg.model, metric));
  SamplerConfig s = cfg.sampler;
  s.seed = shard_seed(cfg.sampler.seed, 0);
  return fit_model(std::move(model), s, workers);
}

Mat posterior_mean_lambda(const PosteriorSamples& samples) {
  if (samples.n_draws() == 0) throw DataError("model", "no posterior draws");
  const Vec phi = samples.block("phi").colwise().mean();
  const Vec delta = samples.block("delta").colwise().mean();
  return logit_surface(phi, delta);
}

}  // namespace dfa
