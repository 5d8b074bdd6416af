#include "dfa/sampler.hpp"

#include "dfa/parallel.hpp"

#include <algorithm>
#include <thread>

namespace dfa {

void SamplerConfig::validate() const {
  if (warmup < 0) throw ConfigError("sampler", "warmup must be non-negative");
  if (draws < 1) throw ConfigError("sampler", "draws must be positive");
  if (chains < 1) throw ConfigError("sampler", "chains must be positive");
  if (max_depth < 1) throw ConfigError("sampler", "max_depth must be positive");
  if (!(target_accept > 0 && target_accept < 1))
    throw ConfigError("sampler", "target_accept must lie in (0, 1)");
}

double unconstrained_log_density(const Target& target, const Vec& u, Vec& grad) {
  const Vec x = target.transforms.constrain(u);
  Vec gx;
  const double lp = target.log_density(x, &gx);
  if (!std::isfinite(lp) || gx.size() != u.size() || !gx.allFinite()) {
    grad = Vec::Zero(u.size());
    return kNegInf;
  }
  grad = target.transforms.chain_gradient(u, x, gx);
  const double value = lp + target.transforms.log_jacobian(u);
  if (!std::isfinite(value) || !grad.allFinite()) return kNegInf;
  return value;
}

LeapfrogResult leapfrog(const PhasePoint& z, double step, const Vec& inv_mass, const GradFn& f) {
  LeapfrogResult r;
  PhasePoint& out = r.point;
  out.p = z.p + 0.5 * step * z.grad;
  out.q = z.q + step * inv_mass.cwiseProduct(out.p);
  out.log_density = f(out.q, out.grad);
  if (!std::isfinite(out.log_density) || !out.grad.allFinite()) {
    r.divergent = true;
    out.log_density = kNegInf;
    out.grad = Vec::Zero(z.q.size());
    return r;
  }
  out.p += 0.5 * step * out.grad;
  return r;
}

double hamiltonian(const PhasePoint& z, const Vec& inv_mass) {
  return -z.log_density + 0.5 * z.p.dot(inv_mass.cwiseProduct(z.p));
}

namespace {

constexpr double kMaxEnergyError = 1000.0;

class DualAveraging {
 public:
  DualAveraging(double delta, double gamma = 0.05, double t0 = 10.0, double kappa = 0.75)
      : delta_(delta), gamma_(gamma), t0_(t0), kappa_(kappa) {}

  void restart(double step) {
    counter_ = 0;
    s_bar_ = 0;
    x_bar_ = 0;
    mu_ = std::log(10.0 * step);
  }

  double learn(double accept) {
    ++counter_;
    accept = std::min(1.0, accept);
    const double eta = 1.0 / (counter_ + t0_);
    s_bar_ = (1.0 - eta) * s_bar_ + eta * (delta_ - accept);
    const double x = mu_ - s_bar_ * std::sqrt(static_cast<double>(counter_)) / gamma_;
    const double x_eta = std::pow(static_cast<double>(counter_), -kappa_);
    x_bar_ = (1.0 - x_eta) * x_bar_ + x_eta * x;
    return std::exp(x);
  }

  double final_step() const { return std::exp(x_bar_); }

 private:
  double delta_, gamma_, t0_, kappa_;
  long counter_ = 0;
  double s_bar_ = 0, x_bar_ = 0, mu_ = 0;
};

bool no_u_turn(const Vec& p_sharp_minus, const Vec& p_sharp_plus, const Vec& rho) {
  return p_sharp_plus.dot(rho) > 0 && p_sharp_minus.dot(rho) > 0;
}

class Nuts {
 public:
  Nuts(const GradFn& f, Index dim, Rng& rng, int max_depth)
      : f_(f), rng_(rng), max_depth_(max_depth), inv_mass_(Vec::Ones(dim)) {}

  double step = 1.0;
  Vec& inv_mass() { return inv_mass_; }

  struct Transition {
    PhasePoint z;
    double accept = 0.0;
    bool divergent = false;
    int depth = 0;
    int n_leapfrog = 0;
  };

  void sample_momentum(PhasePoint& z) {
    std::normal_distribution<double> normal;
    z.p.resize(z.q.size());
    for (Index i = 0; i < z.q.size(); ++i) z.p[i] = normal(rng_) / std::sqrt(inv_mass_[i]);
  }

  Transition transition(const PhasePoint& start) {
    PhasePoint z0 = start;
    sample_momentum(z0);
    const double h0 = hamiltonian(z0, inv_mass_);

    PhasePoint z_fwd = z0, z_bck = z0, z_sample = z0, z_propose = z0;
    Vec p_fwd_fwd = z0.p, p_fwd_bck = z0.p, p_bck_fwd = z0.p, p_bck_bck = z0.p;
    const Vec p_sharp0 = inv_mass_.cwiseProduct(z0.p);
    Vec ps_fwd_fwd = p_sharp0, ps_fwd_bck = p_sharp0, ps_bck_fwd = p_sharp0,
        ps_bck_bck = p_sharp0;
    Vec rho = z0.p;
    double log_sum_weight = 0.0;

    divergent_ = false;
    n_leapfrog_ = 0;
    sum_metro_ = 0.0;
    int depth = 0;
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    while (depth < max_depth_) {
      Vec rho_fwd = Vec::Zero(rho.size()), rho_bck = Vec::Zero(rho.size());
      bool valid = false;
      double lsw_subtree = kNegInf;
      if (unif(rng_) > 0.5) {
        rho_bck = rho;
        p_bck_fwd = p_fwd_bck;
        ps_bck_fwd = ps_fwd_bck;
        valid = build_tree(depth, z_fwd, z_propose, ps_fwd_bck, ps_fwd_fwd, rho_fwd, p_fwd_bck,
                           p_fwd_fwd, h0, 1.0, lsw_subtree);
      } else {
        rho_fwd = rho;
        p_fwd_bck = p_bck_fwd;
        ps_fwd_bck = ps_bck_fwd;
        valid = build_tree(depth, z_bck, z_propose, ps_bck_fwd, ps_bck_bck, rho_bck, p_bck_fwd,
                           p_bck_bck, h0, -1.0, lsw_subtree);
      }
      if (!valid) break;
      ++depth;

      if (lsw_subtree > log_sum_weight) {
        z_sample = z_propose;
      } else if (unif(rng_) < std::exp(lsw_subtree - log_sum_weight)) {
        z_sample = z_propose;
      }
      log_sum_weight = log_sum_exp(log_sum_weight, lsw_subtree);

      rho = rho_bck + rho_fwd;
      bool persist = no_u_turn(ps_bck_bck, ps_fwd_fwd, rho);
      persist = persist && no_u_turn(ps_bck_bck, ps_fwd_bck, rho_bck + p_fwd_bck);
      persist = persist && no_u_turn(ps_bck_fwd, ps_fwd_fwd, rho_fwd + p_bck_fwd);
      if (!persist) break;
    }

    Transition t;
    t.z = z_sample;
    t.depth = depth;
    t.n_leapfrog = n_leapfrog_;
    t.divergent = divergent_;
    t.accept = n_leapfrog_ > 0 ? sum_metro_ / n_leapfrog_ : 0.0;
    return t;
  }

  // Doubles the step size until the one-step acceptance crosses 0.8.
  void init_step_size(const PhasePoint& start) {
    PhasePoint z = start;
    sample_momentum(z);
    double h0 = hamiltonian(z, inv_mass_);
    auto one_step = [&](const PhasePoint& from) {
      const auto r = leapfrog(from, step, inv_mass_, f_);
      const double h = r.divergent ? std::numeric_limits<double>::infinity()
                                   : hamiltonian(r.point, inv_mass_);
      return h0 - h;
    };
    double delta_h = one_step(z);
    const int direction = delta_h > std::log(0.8) ? 1 : -1;
    for (int iter = 0; iter < 100; ++iter) {
      z = start;
      sample_momentum(z);
      h0 = hamiltonian(z, inv_mass_);
      delta_h = one_step(z);
      if (direction == 1 && !(delta_h > std::log(0.8))) break;
      if (direction == -1 && !(delta_h < std::log(0.8))) break;
      step = direction == 1 ? 2.0 * step : 0.5 * step;
      if (step > 1e7) throw SamplerError("sampler", "step size diverged during initialization");
      if (step < 1e-12) throw SamplerError("sampler", "step size collapsed during initialization");
    }
  }

 private:
  bool build_tree(int depth, PhasePoint& z, PhasePoint& z_propose, Vec& ps_beg, Vec& ps_end,
                  Vec& rho, Vec& p_beg, Vec& p_end, double h0, double sign,
                  double& log_sum_weight) {
    if (depth == 0) {
      auto r = leapfrog(z, sign * step, inv_mass_, f_);
      ++n_leapfrog_;
      z = std::move(r.point);
      double h = r.divergent ? std::numeric_limits<double>::infinity() : hamiltonian(z, inv_mass_);
      if (std::isnan(h)) h = std::numeric_limits<double>::infinity();
      if (h - h0 > kMaxEnergyError) divergent_ = true;
      log_sum_weight = log_sum_exp(log_sum_weight, h0 - h);
      sum_metro_ += h0 - h > 0 ? 1.0 : std::exp(h0 - h);
      z_propose = z;
      ps_beg = inv_mass_.cwiseProduct(z.p);
      ps_end = ps_beg;
      rho += z.p;
      p_beg = z.p;
      p_end = z.p;
      return !divergent_;
    }

    const Index n = z.q.size();
    Vec p_init_end(n), ps_init_end(n), rho_init = Vec::Zero(n);
    double lsw_init = kNegInf;
    if (!build_tree(depth - 1, z, z_propose, ps_beg, ps_init_end, rho_init, p_beg, p_init_end,
                    h0, sign, lsw_init))
      return false;

    PhasePoint z_propose_final = z;
    Vec p_final_beg(n), ps_final_beg(n), rho_final = Vec::Zero(n);
    double lsw_final = kNegInf;
    if (!build_tree(depth - 1, z, z_propose_final, ps_final_beg, ps_end, rho_final, p_final_beg,
                    p_end, h0, sign, lsw_final))
      return false;

    const double lsw_subtree = log_sum_exp(lsw_init, lsw_final);
    log_sum_weight = log_sum_exp(log_sum_weight, lsw_subtree);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    if (lsw_final > lsw_subtree) {
      z_propose = z_propose_final;
    } else if (unif(rng_) < std::exp(lsw_final - lsw_subtree)) {
      z_propose = z_propose_final;
    }

    const Vec rho_subtree = rho_init + rho_final;
    rho += rho_subtree;
    bool persist = no_u_turn(ps_beg, ps_end, rho_subtree);
    persist = persist && no_u_turn(ps_beg, ps_final_beg, rho_init + p_final_beg);
    persist = persist && no_u_turn(ps_init_end, ps_end, rho_final + p_init_end);
    return persist;
  }

  const GradFn& f_;
  Rng& rng_;
  int max_depth_;
  Vec inv_mass_;
  bool divergent_ = false;
  int n_leapfrog_ = 0;
  double sum_metro_ = 0.0;
};

PhasePoint initial_point(const GradFn& f, Index dim, Rng& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  PhasePoint z;
  for (int attempt = 0; attempt < 100; ++attempt) {
    z.q.resize(dim);
    for (Index i = 0; i < dim; ++i) z.q[i] = u(rng);
    z.log_density = f(z.q, z.grad);
    if (std::isfinite(z.log_density) && z.grad.allFinite()) return z;
  }
  throw SamplerError("sampler", "no finite starting point after 100 attempts");
}

}  // namespace

ChainOutput run_chain(const Target& target, const SamplerConfig& cfg, int chain) {
  cfg.validate();
  const Index dim = target.dim();
  const std::uint64_t seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(chain));
  Rng rng(seed);
  const GradFn f = [&target](const Vec& u, Vec& g) {
    return unconstrained_log_density(target, u, g);
  };

  PhasePoint z = initial_point(f, dim, rng);
  Nuts nuts(f, dim, rng, cfg.max_depth);
  nuts.init_step_size(z);
  DualAveraging da(cfg.target_accept);
  da.restart(nuts.step);

  // Warmup: step size only for the first quarter, mass estimation on the
  // middle half, then step size again with the new metric.
  const int w = cfg.warmup;
  const int window_begin = w / 4;
  const int window_end = w - w / 4;
  Vec mean = Vec::Zero(dim), m2 = Vec::Zero(dim);
  long n_window = 0;
  int warmup_divergent = 0;

  for (int it = 0; it < w; ++it) {
    auto t = nuts.transition(z);
    z = std::move(t.z);
    if (t.divergent) ++warmup_divergent;
    nuts.step = da.learn(t.accept);
    if (it >= window_begin && it < window_end) {
      ++n_window;
      const Vec delta = z.q - mean;
      mean += delta / static_cast<double>(n_window);
      m2 += delta.cwiseProduct(z.q - mean);
    }
    if (it + 1 == window_end && n_window >= 2) {
      const double n = static_cast<double>(n_window);
      Vec var = m2 / (n - 1.0);
      var = (n / (n + 5.0)) * var.array() + 1e-3 * (5.0 / (n + 5.0));
      nuts.inv_mass() = var;
      nuts.init_step_size(z);
      da.restart(nuts.step);
    }
  }
  if (w > 0) nuts.step = da.final_step();
  if (w > 0 && warmup_divergent == w)
    throw SamplerError("sampler", "every warmup transition of chain " + std::to_string(chain) +
                                      " diverged");

  ChainOutput out;
  out.draws.resize(cfg.draws, dim);
  auto& s = out.stats;
  s.chain = chain;
  s.seed = seed;
  s.step_size = nuts.step;
  s.inv_mass = nuts.inv_mass();
  s.warmup_divergences = warmup_divergent;
  double accept_sum = 0.0, depth_sum = 0.0;
  for (int it = 0; it < cfg.draws; ++it) {
    auto t = nuts.transition(z);
    z = std::move(t.z);
    if (t.divergent) ++s.divergences;
    accept_sum += t.accept;
    depth_sum += t.depth;
    s.n_leapfrog += t.n_leapfrog;
    out.draws.row(it) = target.transforms.constrain(z.q).transpose();
  }
  s.mean_accept = accept_sum / cfg.draws;
  s.mean_tree_depth = depth_sum / cfg.draws;
  if (s.divergences == cfg.draws)
    throw SamplerError("sampler", "every transition of chain " + std::to_string(chain) +
                                      " diverged");
  return out;
}

FitResult run_chains(const Target& target, const SamplerConfig& cfg, int workers) {
  cfg.validate();
  if (workers <= 0)
    workers = std::max(1, std::min<int>(cfg.chains, std::thread::hardware_concurrency()));
  std::vector<ChainOutput> outs(static_cast<std::size_t>(cfg.chains));
  parallel_for(cfg.chains, workers, [&](int c) { outs[c] = run_chain(target, cfg, c); });

  FitResult r;
  auto& s = r.samples;
  s.names = target.names;
  s.seed = cfg.seed;
  s.draws.resize(static_cast<Index>(cfg.chains) * cfg.draws, target.dim());
  int divergences = 0;
  for (int c = 0; c < cfg.chains; ++c) {
    s.draws.middleRows(static_cast<Index>(c) * cfg.draws, cfg.draws) = outs[c].draws;
    s.chain.insert(s.chain.end(), cfg.draws, c);
    divergences += outs[c].stats.divergences;
    r.chains.push_back(outs[c].stats);
  }
  r.diagnostics = diagnose(s, divergences);
  return r;
}

}  // namespace dfa
