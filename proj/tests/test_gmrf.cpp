#include "dfa/gmrf.hpp"

#include "test_support.hpp"

#include <catch_amalgamated.hpp>

using namespace dfa;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;
namespace t = dfa::testing;

namespace {

SpMat path3_laplacian() {
  Mat pts(3, 1);
  pts << 0, 1, 2;
  return laplacian(build_knn_graph(pts, 1));
}

SpMat random_laplacian(Index n, int k, Rng& rng) {
  return laplacian(build_knn_graph(t::random_points(n, 2, rng), k));
}

}  // namespace

TEST_CASE("bym precision assembly", "[gmrf]") {
  const SpMat lap = path3_laplacian();

  const auto iid = bym_precision(lap, {0.0, 2.0});
  CHECK(t::dense(iid.matrix()) == 2.0 * Mat::Identity(3, 3));
  CHECK(iid.matrix().nonZeros() == 3);

  Mat expected(3, 3);
  expected << 2, -1, 0, -1, 3, -1, 0, -1, 2;
  CHECK(t::dense(bym_precision(lap, {1.0, 1.0}).matrix()) == expected);

  Rng rng(20);
  const SpMat l20 = random_laplacian(20, 3, rng);
  const auto q = bym_precision(l20, {2.5, 0.3});
  CHECK(q.positive_definite());
  CHECK(t::min_eigenvalue(t::dense(q.matrix())) >= 0.3 - 1e-9);

  CHECK_THROWS_AS(bym_precision(lap, {-1.0, 1.0}), DataError);
}

TEST_CASE("gmrf log density", "[gmrf]") {
  const auto one = PrecisionMatrix::from_dense(Mat::Identity(1, 1));
  CHECK_THAT(gmrf_logpdf(Vec::Zero(1), one), WithinAbs(-0.91893853, 1e-8));
  const auto two = PrecisionMatrix::from_dense(Mat::Identity(2, 2));
  CHECK_THAT(gmrf_logpdf(Vec::Zero(2), two), WithinAbs(-1.83787707, 1e-8));

  Rng rng(1);
  for (int trial = 0; trial < 5; ++trial) {
    const Mat qd = t::random_spd(5, rng);
    const Vec x = t::random_normal(5, rng);
    const auto q = PrecisionMatrix::from_dense(qd);
    CHECK_THAT(gmrf_logpdf(x, q), WithinAbs(t::mvn_logpdf_dense(x, qd.inverse()), 1e-10));
  }
  CHECK_THROWS_AS(gmrf_logpdf(Vec::Zero(3), two), DataError);
}

TEST_CASE("gmrf log density minus quadratic form is constant", "[gmrf][property]") {
  Rng rng(2);
  const auto q = bym_precision(random_laplacian(15, 3, rng), {1.3, 0.7});
  const Vec x0 = t::random_normal(15, rng);
  const double c0 = gmrf_logpdf(x0, q) + 0.5 * x0.dot(q.matrix() * x0);
  for (int trial = 0; trial < 10; ++trial) {
    const Vec x = t::random_normal(15, rng, 3.0);
    CHECK_THAT(gmrf_logpdf(x, q) + 0.5 * x.dot(q.matrix() * x), WithinAbs(c0, 1e-9));
  }
}

TEST_CASE("gmrf gradient", "[gmrf]") {
  const auto eye = PrecisionMatrix::from_dense(Mat::Identity(2, 2));
  CHECK(gmrf_grad(Vec::Zero(2), eye).isZero());
  CHECK(gmrf_grad(Vec{{1.0, -2.0}}, eye) == Vec{{-1.0, 2.0}});

  Rng rng(3);
  const auto q = bym_precision(random_laplacian(12, 3, rng), {2.0, 0.5});
  const Vec x = t::random_normal(12, rng);
  const Vec fd = t::finite_difference([&](const Vec& v) { return gmrf_logpdf(v, q); }, x);
  CHECK(t::relative_error(gmrf_grad(x, q), fd) < 1e-6);
  CHECK_THROWS_AS(gmrf_grad(Vec::Zero(3), eye), DataError);
}

TEST_CASE("gmrf sampling", "[gmrf]") {
  SECTION("scalar variance") {
    const auto q = PrecisionMatrix::from_dense(Mat::Constant(1, 1, 4.0));
    Rng rng(4);
    const int n = 100000;
    double s = 0, ss = 0;
    for (int i = 0; i < n; ++i) {
      const double x = gmrf_sample(q, rng)[0];
      s += x;
      ss += x * x;
    }
    const double var = ss / n - (s / n) * (s / n);
    CHECK_THAT(var, WithinAbs(0.25, 0.005));
  }
  SECTION("seed determinism") {
    const auto q = bym_precision(path3_laplacian(), {1.0, 1.0});
    Rng a(99), b(99);
    CHECK(gmrf_sample(q, a) == gmrf_sample(q, b));
  }
  SECTION("path-3 covariance matches the dense inverse") {
    const auto q = bym_precision(path3_laplacian(), {1.0, 1.0});
    const Mat cov = t::dense(q.matrix()).inverse();
    Rng rng(5);
    const int n = 200000;
    Mat acc = Mat::Zero(3, 3);
    Vec mean = Vec::Zero(3);
    for (int i = 0; i < n; ++i) {
      const Vec x = gmrf_sample(q, rng);
      acc += x * x.transpose();
      mean += x;
    }
    mean /= n;
    const Mat emp = acc / n - mean * mean.transpose();
    CHECK((emp - cov).cwiseAbs().maxCoeff() < 0.01);
  }
  SECTION("iid precision gives marginal variance 1/tau_u") {
    const double tau_u = 2.5;
    const auto q = bym_precision(path3_laplacian(), {0.0, tau_u});
    Rng rng(6);
    const int n = 40000;
    Vec ss = Vec::Zero(3);
    for (int i = 0; i < n; ++i) ss += gmrf_sample(q, rng).cwiseAbs2();
    const double target = 1.0 / tau_u;
    const double se = target * std::sqrt(2.0 / n);
    for (Index j = 0; j < 3; ++j) CHECK(std::abs(ss[j] / n - target) < 3 * se);
  }
}

TEST_CASE("selected inverse matches the dense inverse", "[gmrf]") {
  Rng rng(7);
  for (int trial = 0; trial < 5; ++trial) {
    const SpMat lap = random_laplacian(30, 4, rng);
    const auto q = bym_precision(lap, {1.7, 0.4});
    const Mat inv = t::dense(q.matrix()).inverse();
    CHECK((q.inverse_diagonal() - inv.diagonal()).cwiseAbs().maxCoeff() < 1e-10);
    CHECK_THAT(q.trace_inverse_times(lap), WithinAbs((inv * t::dense(lap)).trace(), 1e-9));
    const Vec b = t::random_normal(30, rng);
    CHECK((q.solve(b) - inv * b).cwiseAbs().maxCoeff() < 1e-10);
    CHECK_THAT(q.logdet(), WithinAbs(std::log(t::dense(q.matrix()).determinant()), 1e-9));
  }
}

TEST_CASE("bym precision is positive definite for any positive precisions", "[gmrf][property]") {
  Rng rng(8);
  std::uniform_real_distribution<double> logu(-3.0, 3.0);
  for (int trial = 0; trial < 50; ++trial) {
    const Index n = 5 + static_cast<Index>(rng() % 40);
    const SpMat lap = random_laplacian(n, 1 + static_cast<int>(rng() % 4), rng);
    const double ts = std::pow(10.0, logu(rng)), tu = std::pow(10.0, logu(rng));
    const auto q = bym_precision(lap, {ts, tu});
    CHECK(q.positive_definite());
    CHECK(t::min_eigenvalue(t::dense(q.matrix())) > 0.0);
  }
}

TEST_CASE("joint validity check", "[gmrf]") {
  const SpMat lap = path3_laplacian();
  const auto q_delta = PrecisionMatrix::from_dense(Mat::Identity(4, 4) * 2.0);

  const auto ok = check_valid_joint(bym_precision(lap, {1.0, 1.0}), q_delta);
  CHECK(ok.valid);
  CHECK(ok.min_pivot > 0.0);

  const auto icar = check_valid_joint(bym_precision(lap, {1.0, 0.0}), q_delta);
  CHECK_FALSE(icar.valid);
  CHECK(icar.failed_block == "phi");
  CHECK(std::abs(icar.min_pivot) < 1e-12);

  Mat neg = Mat::Identity(3, 3);
  neg(1, 1) = -0.5;
  const auto bad = check_valid_joint(bym_precision(lap, {1.0, 1.0}),
                                     PrecisionMatrix::from_dense(neg));
  CHECK_FALSE(bad.valid);
  CHECK(bad.failed_block == "delta");
  CHECK(bad.min_pivot < 0.0);
  CHECK_THROWS_AS(PrecisionMatrix::from_dense(neg).logdet(), DataError);
}
