#include "dfa/model.hpp"

#include "test_support.hpp"

#include <catch_amalgamated.hpp>

#include <set>

using namespace dfa;
using Catch::Matchers::WithinAbs;
namespace t = dfa::testing;

namespace {

Dataset direct_dataset(Index n, Index c, Rng& rng, double missing = 0.2) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Dataset d;
  d.covariates = t::random_points(n, 2, rng);
  d.a_obs.resize(n, c);
  for (Index i = 0; i < d.a_obs.size(); ++i)
    d.a_obs.data()[i] = u(rng) < missing ? kMissing : (u(rng) < 0.4 ? 1 : 0);
  return d;
}

Dataset drug_dataset(Index n, Index c, Index n_drugs, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Dataset d;
  d.mode = LikelihoodMode::Drug;
  d.covariates = t::random_points(n, 2, rng);
  d.drug_condition = IntMat::Zero(n_drugs, c);
  for (Index j = 0; j < c; ++j) {
    d.drug_condition(j % n_drugs, j) = 1;
    for (Index k = 0; k < n_drugs; ++k)
      if (u(rng) < 0.3) d.drug_condition(k, j) = 1;
  }
  d.drug_sets.resize(n);
  for (auto& set : d.drug_sets)
    for (int k = 0; k < n_drugs; ++k)
      if (u(rng) < 0.35) set.push_back(k);
  return d;
}

StaticParams random_params(Index n, Index c, DeltaCovariance mode, Rng& rng) {
  std::uniform_real_distribution<double> pos(0.5, 3.0), sym(-0.6, 0.6);
  StaticParams p;
  p.phi = t::random_normal(n, rng);
  p.delta = t::random_normal(c, rng);
  p.tau_s = pos(rng);
  p.tau_u = pos(rng);
  if (mode == DeltaCovariance::Diagonal) {
    p.sigma = Vec::Constant(1, pos(rng));
  } else {
    p.sigma.resize(c);
    p.rho.resize(c);
    for (Index j = 0; j < c; ++j) {
      p.sigma[j] = pos(rng);
      p.rho[j] = sym(rng);
    }
    p.xi = sym(rng);
  }
  return p;
}

// Independent two-term enumeration of the drug-cell marginal.
double drug_cell_oracle(int n_c, int m, double eps, double p) {
  const double q1 = (1 - eps) / n_c, q0 = eps;
  const double l1 = std::pow(q1, m) * std::pow(1 - q1, n_c - m);
  const double l0 = std::pow(q0, m) * std::pow(1 - q0, n_c - m);
  return std::log(p * l1 + (1 - p) * l0);
}

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

TEST_CASE("logit surface", "[model]") {
  CHECK(logit_surface(Vec::Zero(3), Vec::Zero(2)).isZero());
  CHECK(logit_surface(Vec::Constant(1, 1.0), Vec::Constant(1, -1.0))(0, 0) == 0.0);
  const Mat s = logit_surface(Vec{{0.3, -0.2}}, Vec::Constant(1, 1.0));
  CHECK_THAT(s(0, 0), WithinAbs(1.3, 1e-15));
  CHECK_THAT(s(1, 0), WithinAbs(0.8, 1e-15));
}

TEST_CASE("low-rank condition covariance", "[model]") {
  const auto diag = lowrank_sigma(Vec{{0.5, 2.0, 1.5}}, Vec{{0.3, -0.2, 0.9}}, 0.0);
  Mat expected = Mat::Zero(3, 3);
  expected.diagonal() << 0.25, 4.0, 2.25;
  CHECK(diag.matrix() == expected);

  const auto two = lowrank_sigma(Vec{{1.0, 1.0}}, Vec{{0.5, 0.5}}, 0.99999999);
  CHECK_THAT(two.matrix()(0, 1), WithinAbs(0.25, 1e-8));
  CHECK_THAT(two.matrix()(0, 0), WithinAbs(1.0, 1e-15));

  Rng rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const auto p = random_params(1, 3, DeltaCovariance::LowRank, rng);
    const auto cov = lowrank_sigma(p.sigma, p.rho, p.xi);
    CHECK(t::min_eigenvalue(cov.matrix()) > 0.0);
    CHECK(cov.jitter() == 0.0);
    CHECK_THAT(cov.logdet(), WithinAbs(std::log(cov.matrix().determinant()), 1e-10));
    const Vec x = t::random_normal(3, rng);
    CHECK_THAT(cov.logpdf(x), WithinAbs(t::mvn_logpdf_dense(x, cov.matrix()), 1e-10));
  }

  CHECK_THROWS_AS(lowrank_sigma(Vec{{1.0, -1.0}}, Vec{{0.0, 0.0}}, 0.0), DataError);
  CHECK_THROWS_AS(lowrank_sigma(Vec{{1.0, 1.0}}, Vec{{0.0, 0.0}}, 1.0), DataError);
}

TEST_CASE("low-rank covariance gradient", "[model]") {
  Rng rng(22);
  for (int trial = 0; trial < 5; ++trial) {
    const auto p = random_params(1, 4, DeltaCovariance::LowRank, rng);
    const Vec delta = t::random_normal(4, rng);
    LowRankCov::Grad g;
    lowrank_sigma(p.sigma, p.rho, p.xi).logpdf_grad(delta, g);

    Vec x(13), analytic(13);
    x << delta, p.sigma, p.rho, p.xi;
    analytic << g.delta, g.sigma, g.rho, g.xi;
    const Vec fd = t::finite_difference(
        [](const Vec& v) {
          return lowrank_sigma(v.segment(4, 4), v.segment(8, 4), v[12]).logpdf(v.head(4));
        },
        x);
    CHECK(t::relative_error(analytic, fd) < 1e-5);
  }
}

TEST_CASE("bernoulli likelihood", "[model]") {
  CHECK_THAT(bernoulli_loglik(IntMat::Ones(1, 1), Mat::Zero(1, 1)), WithinAbs(-0.69314718, 1e-8));
  CHECK(bernoulli_loglik(IntMat::Constant(2, 3, kMissing), Mat::Random(2, 3)) == 0.0);

  Rng rng(23);
  const Dataset d = direct_dataset(3, 2, rng, 0.0);
  const Mat lam = Mat::Random(3, 2) * 3.0;
  double prod = 1.0;
  for (Index i = 0; i < 3; ++i)
    for (Index c = 0; c < 2; ++c) {
      const double p = logistic(lam(i, c));
      prod *= d.a_obs(i, c) == 1 ? p : 1 - p;
    }
  CHECK_THAT(bernoulli_loglik(d.a_obs, lam), WithinAbs(std::log(prod), 1e-12));

  CHECK(std::isfinite(bernoulli_loglik(IntMat::Zero(1, 1), Mat::Constant(1, 1, 800.0))));
}

TEST_CASE("bernoulli likelihood is monotone in the logit", "[model][property]") {
  const Vec grid = Vec::LinSpaced(41, -20.0, 20.0);
  for (Index k = 1; k < grid.size(); ++k) {
    const Mat lo = Mat::Constant(1, 1, grid[k - 1]), hi = Mat::Constant(1, 1, grid[k]);
    CHECK(bernoulli_loglik(IntMat::Ones(1, 1), hi) > bernoulli_loglik(IntMat::Ones(1, 1), lo));
    CHECK(bernoulli_loglik(IntMat::Zero(1, 1), hi) < bernoulli_loglik(IntMat::Zero(1, 1), lo));
  }
}

TEST_CASE("drug cell marginal likelihood", "[model]") {
  IntMat b(2, 1);
  b << 1, 1;
  const auto ev = drug_evidence(2, 1, 0.01);
  CHECK_THAT(std::exp(ev.log_l1), WithinAbs(0.249975, 1e-12));
  CHECK_THAT(std::exp(ev.log_l0), WithinAbs(0.0099, 1e-12));
  CHECK_THAT(drug_cell_loglik(0, {0}, b, 0.0, 0.01), WithinAbs(std::log(0.1299375), 1e-12));
  CHECK_THAT(drug_cell_loglik(0, {0}, b, 0.0, 0.01), WithinAbs(-2.0408, 1e-4));
  CHECK_THAT(drug_cell_loglik(0, {0}, b, 40.0, 0.01), WithinAbs(ev.log_l1, 1e-12));

  // Drugs not indicated for the condition do not enter its factor.
  IntMat b2(3, 1);
  b2 << 1, 1, 0;
  CHECK(drug_cell_loglik(0, {0, 2}, b2, 0.3, 0.01) == drug_cell_loglik(0, {0}, b2, 0.3, 0.01));

  Rng rng(24);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const int n_c = 1 + static_cast<int>(rng() % 5);
    const int m = static_cast<int>(rng() % (n_c + 1));
    const double eps = 0.001 + 0.2 * u(rng), lam = 6.0 * u(rng) - 3.0;
    IntMat bb = IntMat::Ones(n_c, 1);
    std::vector<int> set;
    for (int k = 0; k < m; ++k) set.push_back(k);
    CHECK_THAT(drug_cell_loglik(0, set, bb, lam, eps),
               WithinAbs(drug_cell_oracle(n_c, m, eps, logistic(lam)), 1e-12));
  }
  CHECK_THROWS_AS(drug_evidence(0, 0, 0.01), DataError);
}

TEST_CASE("posterior condition probability", "[model]") {
  Dataset d;
  d.mode = LikelihoodMode::Drug;
  d.covariates = Mat::Zero(1, 1);
  d.drug_condition = IntMat::Ones(1, 1);
  d.drug_sets = {{0}};
  CellLikelihood lik(d, 0.01);
  CHECK_THAT(lik.posterior_prob(0, 0, 0.0), WithinAbs(0.99, 1e-12));
  CellLikelihood tight(d, 1e-12);
  CHECK(tight.posterior_prob(0, 0, 0.0) > 1 - 1e-10);
  Rng rng(30);
  CHECK_THAT(CellLikelihood(direct_dataset(1, 1, rng), 0.01).posterior_prob(0, 0, 0.4),
             WithinAbs(logistic(0.4), 1e-15));

  // Averaging over draws.
  d.covariates = Mat::Zero(2, 1);
  d.drug_sets = {{0}, {}};
  StaticModel model(d, SpMat(2, 2), {DeltaCovariance::Diagonal, 0.01});
  PosteriorSamples s;
  s.names = model.param_names();
  s.draws = Mat::Zero(2, model.dim());
  s.chain = {0, 0};
  s.draws(1, model.layout().phi) = 1.0;
  const Mat prob = posterior_condition_prob(s, model);
  const double expected = 0.5 * (lik.posterior_prob(0, 0, 0.0) + lik.posterior_prob(0, 0, 1.0));
  CHECK_THAT(prob(0, 0), WithinAbs(expected, 1e-12));
  CHECK(prob(1, 0) < 0.5);
}

TEST_CASE("joint log-posterior decomposition", "[model]") {
  Rng rng(25);
  Dataset d = direct_dataset(8, 3, rng);
  d.a_obs.setConstant(kMissing);
  const auto g = build_knn_graph(d.covariates, 3);
  for (auto mode : {DeltaCovariance::Diagonal, DeltaCovariance::LowRank}) {
    const auto p = random_params(8, 3, mode, rng);
    const auto lp = joint_logpost(p, d, g, {mode, 0.01});
    CHECK_THAT(lp.value, WithinAbs(log_prior(p, laplacian(g), mode), 1e-10));
  }

  // Explicit prior oracle for the low-rank mode.
  const auto p = random_params(8, 3, DeltaCovariance::LowRank, rng);
  const SpMat lap = laplacian(g);
  const Mat q = t::dense(lap) * p.tau_s + p.tau_u * Mat::Identity(8, 8);
  const auto hc = [](double x) { return std::log(2.0 / (M_PI * 2.0 * (1 + x * x / 4.0))); };
  const auto hn = [](double x) { return std::log(std::sqrt(2.0 / M_PI)) - 0.5 * x * x; };
  const auto tn = [](double x) {
    return -0.5 * std::log(2 * M_PI * 0.01) - 0.5 * x * x / 0.01 - std::log(std::erf(10.0 / std::sqrt(2.0)));
  };
  double oracle = hc(p.tau_s) + hc(p.tau_u) + t::mvn_logpdf_dense(p.phi, q.inverse()) +
                  std::log(0.5);
  Mat sig(3, 3);
  for (Index a = 0; a < 3; ++a) {
    oracle += hn(p.sigma[a]) + tn(p.rho[a]);
    for (Index b = 0; b < 3; ++b)
      sig(a, b) = a == b ? p.sigma[a] * p.sigma[a]
                         : p.xi * p.rho[a] * p.rho[b] * p.sigma[a] * p.sigma[b];
  }
  oracle += t::mvn_logpdf_dense(p.delta, sig);
  CHECK_THAT(log_prior(p, lap, DeltaCovariance::LowRank), WithinAbs(oracle, 1e-9));

  // Diagonal mode: Half-Cauchy(2) on sigma_delta.
  auto pd = random_params(8, 3, DeltaCovariance::Diagonal, rng);
  const double s = pd.sigma[0];
  const double oracle_d = hc(pd.tau_s) + hc(pd.tau_u) + t::mvn_logpdf_dense(pd.phi,
                          (t::dense(lap) * pd.tau_s + pd.tau_u * Mat::Identity(8, 8)).inverse()) +
                          hc(s) + t::mvn_logpdf_dense(pd.delta, s * s * Mat::Identity(3, 3));
  CHECK_THAT(log_prior(pd, lap, DeltaCovariance::Diagonal), WithinAbs(oracle_d, 1e-9));
}

TEST_CASE("joint gradient matches finite differences", "[model][property]") {
  Rng rng(26);
  for (auto lik_mode : {LikelihoodMode::Direct, LikelihoodMode::Drug}) {
    for (auto mode : {DeltaCovariance::Diagonal, DeltaCovariance::LowRank}) {
      const Dataset d = lik_mode == LikelihoodMode::Direct ? direct_dataset(8, 3, rng)
                                                           : drug_dataset(8, 3, 5, rng);
      const auto model = StaticModel::from_dataset(d, 3, {mode, 0.01});
      for (int point = 0; point < 5; ++point) {
        const Vec x = model.flatten(random_params(8, 3, mode, rng));
        Vec grad;
        const double v = model.log_posterior(x, &grad);
        REQUIRE(std::isfinite(v));
        CHECK(v == model.log_posterior(x));
        const Vec fd = t::finite_difference([&](const Vec& y) { return model.log_posterior(y); }, x);
        CHECK(t::relative_error(grad, fd) < 1e-5);
      }
    }
  }
}

TEST_CASE("likelihood is invariant under a level shift", "[model][property]") {
  Rng rng(27);
  for (auto lik_mode : {LikelihoodMode::Direct, LikelihoodMode::Drug}) {
    const Dataset d = lik_mode == LikelihoodMode::Direct ? direct_dataset(10, 4, rng)
                                                         : drug_dataset(10, 4, 6, rng);
    const auto model = StaticModel::from_dataset(d, 3, {DeltaCovariance::LowRank, 0.01});
    const auto p = random_params(10, 4, DeltaCovariance::LowRank, rng);
    const double base = model.log_likelihood(p);
    for (double kappa : {-3.0, 0.7, 10.0}) {
      auto shifted = p;
      shifted.phi.array() += kappa;
      shifted.delta.array() -= kappa;
      CHECK_THAT(model.log_likelihood(shifted), WithinAbs(base, 1e-9 * std::abs(base)));
      CHECK(model.log_prior(shifted) != model.log_prior(p));
    }
  }
}

TEST_CASE("model parameter layout", "[model]") {
  Rng rng(28);
  const auto model =
      StaticModel::from_dataset(direct_dataset(5, 2, rng), 2, {DeltaCovariance::LowRank, 0.01});
  const auto names = model.param_names();
  CHECK(static_cast<Index>(names.size()) == model.dim());
  CHECK(names.front() == "phi[0]");
  CHECK(names[5] == "delta[0]");
  CHECK(names.back() == "xi");
  CHECK(std::set<std::string>(names.begin(), names.end()).size() == names.size());

  const auto p = random_params(5, 2, DeltaCovariance::LowRank, rng);
  const Vec x = model.flatten(p);
  CHECK(model.flatten(model.unflatten(x)) == x);
  CHECK(model.transforms().dim() == model.dim());

  auto bad = p;
  bad.tau_s = -1.0;
  CHECK(model.log_posterior(model.flatten(bad)) == kNegInf);
  bad = p;
  bad.xi = 1.0;
  CHECK(model.log_posterior(model.flatten(bad)) == kNegInf);

  const auto diag =
      StaticModel::from_dataset(direct_dataset(5, 2, rng), 2, {DeltaCovariance::Diagonal, 0.01});
  CHECK(diag.param_names().back() == "sigma_delta");
}

TEST_CASE("dataset validation", "[model]") {
  Rng rng(29);
  Dataset d = drug_dataset(4, 2, 3, rng);
  CHECK_NOTHROW(d.validate());
  d.drug_condition.col(1).setZero();
  CHECK_THROWS_AS(d.validate(), DataError);

  Dataset e = direct_dataset(4, 2, rng);
  e.a_obs(0, 0) = 2;
  CHECK_THROWS_AS(e.validate(), DataError);

  Dataset f = drug_dataset(4, 2, 3, rng);
  f.drug_sets[2].push_back(7);
  CHECK_THROWS_AS(f.validate(), DataError);

  const Dataset g = direct_dataset(6, 2, rng).subset({4, 1});
  CHECK(g.n_items() == 2);
}
