#include "dfa/model.hpp"
#include "dfa/sampler.hpp"

#include "test_support.hpp"

#include <catch_amalgamated.hpp>

#include <algorithm>

using namespace dfa;
using Catch::Matchers::WithinAbs;
namespace t = dfa::testing;

namespace {

Target normal_target(Index dim) {
  Target tg;
  for (Index i = 0; i < dim; ++i) tg.names.push_back("x[" + std::to_string(i) + "]");
  tg.transforms.add(Constraint::Real, dim);
  tg.log_density = [](const Vec& x, Vec* g) {
    if (g) *g = -x;
    return -0.5 * x.squaredNorm();
  };
  return tg;
}

// Curved Gaussian: x ~ N(0, 1), y | x ~ N(b (x^2 - 1), 0.5^2).
Target banana_target(double b = 0.5) {
  Target tg;
  tg.names = {"x", "y"};
  tg.transforms.add(Constraint::Real, 2);
  tg.log_density = [b](const Vec& v, Vec* g) {
    const double x = v[0], r = v[1] - b * (x * x - 1.0);
    if (g) {
      g->resize(2);
      (*g)[0] = -x + r / 0.25 * 2.0 * b * x;
      (*g)[1] = -r / 0.25;
    }
    return -0.5 * x * x - 0.5 * r * r / 0.25;
  };
  return tg;
}

double standard_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

}  // namespace

TEST_CASE("leapfrog basics", "[sampler]") {
  const GradFn flat = [](const Vec& q, Vec& g) {
    g = Vec::Zero(q.size());
    return 0.0;
  };
  PhasePoint z{Vec{{0.3, -1.2}}, Vec::Zero(2), Vec::Zero(2), 0.0};
  const auto r = leapfrog(z, 0.1, Vec::Ones(2), flat);
  CHECK(r.point.q == z.q);
  CHECK_FALSE(r.divergent);

  const GradFn normal = [](const Vec& q, Vec& g) {
    g = -q;
    return -0.5 * q.squaredNorm();
  };
  Rng rng(41);
  for (int trial = 0; trial < 10; ++trial) {
    PhasePoint s;
    s.q = t::random_normal(3, rng);
    s.p = t::random_normal(3, rng);
    s.log_density = normal(s.q, s.grad);
    const Vec inv_mass = Vec{{1.0, 0.5, 2.0}};
    PhasePoint cur = s;
    for (int k = 0; k < 20; ++k) cur = leapfrog(cur, 0.13, inv_mass, normal).point;
    cur.p = -cur.p;
    for (int k = 0; k < 20; ++k) cur = leapfrog(cur, 0.13, inv_mass, normal).point;
    CHECK((cur.q - s.q).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((cur.p + s.p).cwiseAbs().maxCoeff() < 1e-10);
  }

  const GradFn broken = [](const Vec& q, Vec& g) {
    g = Vec::Constant(q.size(), std::nan(""));
    return 0.0;
  };
  CHECK(leapfrog(z, 0.1, Vec::Ones(2), broken).divergent);
}

TEST_CASE("leapfrog energy error is second order", "[sampler]") {
  const GradFn normal = [](const Vec& q, Vec& g) {
    g = -q;
    return -0.5 * q.squaredNorm();
  };
  const Vec inv_mass = Vec::Ones(1);
  auto energy_error = [&](double h) {
    PhasePoint z;
    z.q = Vec::Constant(1, 1.0);
    z.p = Vec::Constant(1, 0.5);
    z.log_density = normal(z.q, z.grad);
    const double h0 = hamiltonian(z, inv_mass);
    double worst = 0.0;
    const int steps = static_cast<int>(std::lround(1.0 / h));
    for (int k = 0; k < steps; ++k) {
      z = leapfrog(z, h, inv_mass, normal).point;
      worst = std::max(worst, std::abs(hamiltonian(z, inv_mass) - h0));
    }
    return worst;
  };
  const double e1 = energy_error(0.1), e2 = energy_error(0.05), e3 = energy_error(0.025);
  CHECK(e1 / e2 > 3.5);
  CHECK(e1 / e2 < 4.5);
  CHECK(e2 / e3 > 3.5);
  CHECK(e2 / e3 < 4.5);
}

TEST_CASE("NUTS recovers a 2D standard normal", "[sampler][montecarlo]") {
  SamplerConfig cfg;
  cfg.warmup = 1000;
  cfg.draws = 2000;
  cfg.chains = 4;
  cfg.seed = 2024;
  const auto fit = run_chains(normal_target(2), cfg);
  const Mat& d = fit.samples.draws;
  REQUIRE(d.rows() == 8000);
  for (Index j = 0; j < 2; ++j) {
    const double mean = d.col(j).mean();
    const double var = (d.col(j).array() - mean).square().mean();
    CHECK(std::abs(mean) < 0.05);
    CHECK(std::abs(var - 1.0) < 0.1);
  }
  CHECK(fit.diagnostics.max_rhat < 1.01);
  CHECK(fit.diagnostics.divergences == 0);

  const auto again = run_chains(normal_target(2), cfg);
  CHECK(again.samples.draws == fit.samples.draws);
  cfg.seed = 2025;
  CHECK(run_chains(normal_target(2), cfg).samples.draws != fit.samples.draws);
}

TEST_CASE("NUTS mixes on a banana-shaped target", "[sampler][montecarlo]") {
  SamplerConfig cfg;
  cfg.warmup = 1000;
  cfg.draws = 4000;
  cfg.chains = 4;
  cfg.seed = 7;
  const auto fit = run_chains(banana_target(), cfg);
  CHECK(fit.diagnostics.max_rhat < 1.01);
  CHECK(std::abs(fit.samples.draws.col(0).mean()) < 0.1);
  CHECK(std::abs(fit.samples.draws.col(1).mean()) < 0.1);
}

TEST_CASE("NUTS draws pass a Kolmogorov-Smirnov check", "[sampler][montecarlo]") {
  SamplerConfig cfg;
  cfg.warmup = 1000;
  cfg.draws = 12500;
  cfg.chains = 4;
  cfg.seed = 99;
  const auto fit = run_chains(normal_target(1), cfg);
  std::vector<double> x(fit.samples.draws.data(),
                        fit.samples.draws.data() + fit.samples.draws.size());
  REQUIRE(x.size() == 50000);
  std::sort(x.begin(), x.end());
  double ks = 0.0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = standard_normal_cdf(x[i]);
    ks = std::max({ks, std::abs(f - i / n), std::abs(f - (i + 1) / n)});
  }
  CHECK(ks < 0.01);
}

TEST_CASE("log transform reproduces the Half-Cauchy median", "[sampler][montecarlo]") {
  Target tg;
  tg.names = {"tau"};
  tg.transforms.add(Constraint::Positive, 1);
  tg.log_density = [](const Vec& x, Vec* g) {
    double d = 0.0;
    const double v = prior::half_cauchy(x[0], 2.0, &d);
    if (g) *g = Vec::Constant(1, d);
    return v;
  };
  SamplerConfig cfg;
  cfg.warmup = 1000;
  cfg.draws = 12500;
  cfg.chains = 4;
  cfg.seed = 5;
  const auto fit = run_chains(tg, cfg);
  std::vector<double> x(fit.samples.draws.data(),
                        fit.samples.draws.data() + fit.samples.draws.size());
  std::nth_element(x.begin(), x.begin() + x.size() / 2, x.end());
  CHECK(std::abs(x[x.size() / 2] - 2.0) < 0.1);
  CHECK(*std::min_element(x.begin(), x.end()) > 0.0);
}

TEST_CASE("convergence diagnostics", "[sampler]") {
  Rng rng(43);
  const Vec iid = t::random_normal(1000, rng);
  Mat same(1000, 2);
  same << iid, iid;
  CHECK_THAT(split_rhat(same), WithinAbs(1.0, 0.01));

  Mat stuck(100, 2);
  stuck.col(0).setConstant(0.0);
  stuck.col(1).setConstant(1.0);
  CHECK(split_rhat(stuck) > 1.1);

  Mat four(1000, 4);
  for (Index c = 0; c < 4; ++c) four.col(c) = t::random_normal(1000, rng);
  CHECK(std::abs(ess_bulk(four) / 4000.0 - 1.0) < 0.2);
  CHECK(split_rhat(four) < 1.01);

  // Strongly autocorrelated AR(1) chains have far fewer effective draws.
  Mat ar(1000, 4);
  std::normal_distribution<double> z;
  for (Index c = 0; c < 4; ++c) {
    double x = 0.0;
    for (Index i = 0; i < 1000; ++i) ar(i, c) = x = 0.95 * x + z(rng);
  }
  CHECK(ess_bulk(ar) < 400.0);
  CHECK_THROWS_AS(split_rhat(Mat(3, 2)), DataError);
}

TEST_CASE("sampler failures are reported", "[sampler]") {
  Target tg;
  tg.names = {"x"};
  tg.transforms.add(Constraint::Real, 1);
  tg.log_density = [](const Vec&, Vec* g) {
    if (g) *g = Vec::Zero(1);
    return kNegInf;
  };
  SamplerConfig cfg;
  cfg.warmup = 10;
  cfg.draws = 10;
  cfg.chains = 1;
  CHECK_THROWS_AS(run_chains(tg, cfg), SamplerError);

  cfg.draws = 0;
  CHECK_THROWS_AS(run_chains(normal_target(1), cfg), ConfigError);
}

TEST_CASE("chains merge by index regardless of worker count", "[sampler]") {
  SamplerConfig cfg;
  cfg.warmup = 100;
  cfg.draws = 50;
  cfg.chains = 3;
  const auto serial = run_chains(banana_target(), cfg, 1);
  const auto threaded = run_chains(banana_target(), cfg, 3);
  CHECK(serial.samples.draws == threaded.samples.draws);
  CHECK(serial.samples.chain == threaded.samples.chain);
  CHECK(serial.samples.chain.front() == 0);
  CHECK(serial.samples.chain.back() == 2);
}
