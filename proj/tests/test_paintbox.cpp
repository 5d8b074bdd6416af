#include "dfa/paintbox.hpp"

#include "test_support.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <catch_amalgamated.hpp>

#include <sstream>

using namespace dfa;
using Catch::Matchers::WithinAbs;

namespace {

// Interval-intersection oracle over sorted disjoint interval lists.
std::vector<Interval> intersect(const std::vector<Interval>& a, const std::vector<Interval>& b) {
  std::vector<Interval> out;
  for (const auto& x : a)
    for (const auto& y : b) {
      const double lo = std::max(x.lo, y.lo), hi = std::min(x.hi, y.hi);
      if (hi > lo) out.push_back({lo, hi});
    }
  return out;
}

double total_length(const std::vector<Interval>& s) {
  double m = 0.0;
  for (const auto& iv : s) m += iv.hi - iv.lo;
  return m;
}

std::vector<double> random_frequencies(int m, Rng& rng) {
  std::uniform_real_distribution<double> u(0.01, 0.99);
  std::vector<double> p(m);
  for (auto& v : p) v = u(rng);
  return p;
}

}  // namespace

TEST_CASE("paintbox construction examples", "[paintbox]") {
  const auto one = build_paintbox({0.5});
  REQUIRE(one.feature_set(0).size() == 1);
  CHECK(one.feature_set(0)[0].lo == 0.0);
  CHECK(one.feature_set(0)[0].hi == 0.5);

  const auto two = build_paintbox({0.5, 0.5});
  const auto& c2 = two.feature_set(1);
  REQUIRE(c2.size() == 2);
  CHECK(c2[0].lo == 0.0);
  CHECK(c2[0].hi == 0.25);
  CHECK(c2[1].lo == 0.5);
  CHECK(c2[1].hi == 0.75);

  const auto pb = build_paintbox({0.3, 0.6});
  CHECK_THAT(total_length(intersect(pb.feature_set(0), pb.feature_set(1))),
             WithinAbs(0.18, 1e-12));

  CHECK_THROWS_AS(build_paintbox({0.5, 1.0}), DataError);
  CHECK_THROWS_AS(build_paintbox({0.0}), DataError);
  CHECK_THROWS_AS(build_paintbox({}), DataError);
}

TEST_CASE("paintbox measures and independence", "[paintbox][property]") {
  Rng rng(12);
  for (int trial = 0; trial < 100; ++trial) {
    const int m = 1 + static_cast<int>(rng() % 6);
    const auto p = random_frequencies(m, rng);
    const auto pb = build_paintbox(p);
    for (int c = 0; c < m; ++c) {
      CHECK_THAT(pb.measure(c), WithinAbs(p[c], 1e-12));
      CHECK(pb.feature_set(c).size() <= (std::size_t{1} << c));
      const auto& s = pb.feature_set(c);
      for (std::size_t j = 1; j < s.size(); ++j) CHECK(s[j - 1].hi <= s[j].lo);
    }
    // Every non-empty subset of features.
    for (unsigned mask = 1; mask < (1u << m); ++mask) {
      std::vector<Interval> acc{{0.0, 1.0}};
      double prod = 1.0;
      for (int c = 0; c < m; ++c)
        if (mask & (1u << c)) {
          acc = intersect(acc, pb.feature_set(c));
          prod *= p[c];
        }
      CHECK_THAT(total_length(acc), WithinAbs(prod, 1e-12));
    }
  }
}

TEST_CASE("allocation boundary cases", "[paintbox]") {
  const auto pb = build_paintbox({0.5, 0.5, 0.2});
  const IntMat a = allocate(pb, Vec::Zero(1));
  CHECK(a.sum() == 3);

  const auto half = build_paintbox({0.5, 0.5});
  const IntMat b = allocate(half, Vec::Constant(1, 1.0 - 1e-9));
  CHECK(b.sum() == 0);

  CHECK_THROWS_AS(allocate(half, Vec::Constant(1, 1.0)), DataError);
}

TEST_CASE("allocation marginals and correlation", "[paintbox][montecarlo]") {
  const auto pb = build_paintbox({0.3, 0.6});
  Rng rng(13);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int n = 100000;
  Vec draws(n);
  for (int i = 0; i < n; ++i) draws[i] = u(rng);
  const IntMat a = allocate(pb, draws);
  const Vec x = a.col(0).cast<double>(), y = a.col(1).cast<double>();
  const double mx = x.mean(), my = y.mean();
  CHECK(std::abs(mx - 0.3) < 3 * std::sqrt(0.3 * 0.7 / n));
  CHECK(std::abs(my - 0.6) < 3 * std::sqrt(0.6 * 0.4 / n));
  const double cov = (x.array() - mx).matrix().dot((y.array() - my).matrix()) / n;
  const double r = cov / std::sqrt(mx * (1 - mx) * my * (1 - my));
  CHECK(std::abs(r) < 0.02);
}

TEST_CASE("allocation matches independent Bernoulli sampling", "[paintbox][montecarlo]") {
  // Two-sample chi-square homogeneity test on the 2^4 joint patterns.
  const std::vector<double> p{0.2, 0.45, 0.7, 0.9};
  const auto pb = build_paintbox(p);
  Rng rng(14);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int n = 100000;
  std::vector<double> from_paintbox(16, 0.0), from_bernoulli(16, 0.0);
  Vec draws(n);
  for (int i = 0; i < n; ++i) draws[i] = u(rng);
  const IntMat a = allocate(pb, draws);
  for (int i = 0; i < n; ++i) {
    int pa = 0, pbn = 0;
    for (int c = 0; c < 4; ++c) {
      pa |= a(i, c) << c;
      pbn |= (u(rng) < p[c] ? 1 : 0) << c;
    }
    from_paintbox[pa] += 1;
    from_bernoulli[pbn] += 1;
  }
  double stat = 0.0;
  int cells = 0;
  for (int k = 0; k < 16; ++k) {
    const double tot = from_paintbox[k] + from_bernoulli[k];
    if (tot == 0) continue;
    ++cells;
    const double e = tot / 2.0;
    stat += (from_paintbox[k] - e) * (from_paintbox[k] - e) / e +
            (from_bernoulli[k] - e) * (from_bernoulli[k] - e) / e;
  }
  boost::math::chi_squared dist(cells - 1);
  const double pvalue = 1.0 - boost::math::cdf(dist, stat);
  CHECK(pvalue > 0.001);
}

TEST_CASE("embedded surface lookup", "[paintbox]") {
  CHECK(embed_surface(Mat::Constant(1, 1, 2.0)).query(0.5, 0.5) == 2.0);

  Mat lam(2, 2);
  lam << 1.0, 2.0, 3.0, 4.0;
  CHECK(embed_surface(lam).query(0.25, 0.75) == 2.0);

  Rng rng(15);
  const Mat r = Mat::Random(5, 4);
  const auto s = embed_surface(r);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int q = 0; q < 1000; ++q) {
    const double x = u(rng), y = u(rng);
    CHECK(s.query(x, y) == r(static_cast<Index>(x * 5), static_cast<Index>(y * 4)));
  }
  CHECK_THROWS_AS(s.query(1.0, 0.5), DataError);
  CHECK_THROWS_AS(s.query(0.5, -0.1), DataError);

  const auto reordered = embed_surface(lam, {1, 0});
  CHECK(reordered.query(0.25, 0.25) == 3.0);
  CHECK_THROWS_AS(embed_surface(lam, {0, 0}), DataError);
}

TEST_CASE("paintbox json export", "[paintbox]") {
  std::ostringstream out;
  build_paintbox({0.5, 0.5}).write_json(out);
  CHECK(out.str().find("\"intervals\"") != std::string::npos);
  CHECK(out.str().find("0.75") != std::string::npos);
}
