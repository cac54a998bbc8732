// SPDX-License-Identifier: Apache-2.0
#include "catch_amalgamated.hpp"

#include <algorithm>
#include <random>

#include "itrlhf/metrics.hpp"
#include "itrlhf/rng.hpp"

using namespace itrlhf;
using Catch::Matchers::WithinAbs;

namespace {

Eigen::VectorXd normal_vector(Rng& rng, Eigen::Index n, double mu = 0.0, double sd = 1.0) {
  std::normal_distribution<double> d(mu, sd);
  Eigen::VectorXd v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

// Two explicit loops over the three terms.
double naive_mmd(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double h) {
  const auto n = a.size();
  double saa = 0, sbb = 0, sab = 0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i != j) {
        saa += se_kernel(a(i), a(j), h);
        sbb += se_kernel(b(i), b(j), h);
      }
      sab += se_kernel(a(i), b(j), h);
    }
  const double dn = static_cast<double>(n);
  return (saa + sbb) / (dn * (dn - 1)) - 2 * sab / (dn * dn);
}

// Materialize every pairwise distance of the pool and take the median of the non-zero ones.
double naive_median(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  std::vector<double> pool(a.data(), a.data() + a.size());
  pool.insert(pool.end(), b.data(), b.data() + b.size());
  std::vector<double> d;
  for (std::size_t i = 0; i < pool.size(); ++i)
    for (std::size_t j = i + 1; j < pool.size(); ++j)
      if (pool[i] != pool[j]) d.push_back(std::abs(pool[i] - pool[j]));
  std::sort(d.begin(), d.end());
  const std::size_t m = d.size();
  return m % 2 ? d[m / 2] : 0.5 * (d[m / 2 - 1] + d[m / 2]);
}

CheckpointRow row(double kl, double gold, double proxy = 0.0, double mmd = 0.0, int iteration = 1) {
  CheckpointRow r;
  r.iteration = iteration;
  r.kl_to_sft = kl;
  r.kl_to_init = kl / 2;
  r.mean_gold = gold;
  r.mean_proxy = proxy;
  r.mmd = mmd;
  return r;
}

}  // namespace

TEST_CASE("standardize fixed point and two-point case") {
  Rng rng(1);
  const Eigen::VectorXd s = standardized(normal_vector(rng, 100));
  CHECK((standardized(s) - s).cwiseAbs().maxCoeff() < 1e-12);
  const Eigen::VectorXd two = standardized(Eigen::Vector2d(0.0, 2.0));
  CHECK(two(0) == -1.0);
  CHECK(two(1) == 1.0);
}

TEST_CASE("standardize is invariant under positive affine maps") {
  Rng rng(2);
  const Eigen::VectorXd r = normal_vector(rng, 500, 1.0, 4.0);
  const Eigen::VectorXd t = (3.7 * r.array() - 2.1).matrix();
  CHECK((standardized(t) - standardized(r)).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((standardized(standardized(r)) - standardized(r)).cwiseAbs().maxCoeff() < 1e-9);
  const Eigen::VectorXd s = standardized(r);
  CHECK_THAT(s.mean(), WithinAbs(0.0, 1e-12));
  CHECK_THAT(s.squaredNorm() / 500.0, WithinAbs(1.0, 1e-12));
}

TEST_CASE("standardize rejects constant samples") {
  CHECK_THROWS_AS(standardized(Eigen::VectorXd::Constant(10, 3.0)), DegenerateSampleError);
  CHECK_THROWS_AS(standardize(ScoreSample(Eigen::VectorXd::Constant(10, 1e9))), DegenerateSampleError);
}

TEST_CASE("score samples need two finite values") {
  CHECK_THROWS(ScoreSample(Eigen::VectorXd::Constant(1, 0.0)));
  Eigen::VectorXd v = Eigen::VectorXd::Zero(4);
  v(2) = std::numeric_limits<double>::infinity();
  CHECK_THROWS(ScoreSample(v));
}

TEST_CASE("mmd of two far-apart point masses tends to 2") {
  const Eigen::Vector2d a(0.0, 0.0);
  const Eigen::Vector2d b(1e3, 1e3);
  CHECK_THAT(mmd_u2(a, b, 1.0), WithinAbs(2.0, 1e-15));
}

TEST_CASE("mmd matches the double loop and is symmetric") {
  Rng rng(3);
  std::uniform_real_distribution<double> h(0.1, 3.0);
  for (int rep = 0; rep < 50; ++rep) {
    const Eigen::VectorXd a = normal_vector(rng, 50);
    const Eigen::VectorXd b = normal_vector(rng, 50, 0.5, 1.5);
    const double bw = h(rng);
    CHECK(std::abs(mmd_u2(a, b, bw) - naive_mmd(a, b, bw)) < 1e-12);
    CHECK(std::abs(mmd_u2(a, b, bw) - mmd_u2(b, a, bw)) < 1e-12);
  }
}

TEST_CASE("mmd is unbiased under equal distributions") {
  Rng rng(4);
  std::vector<double> v;
  for (int rep = 0; rep < 200; ++rep) v.push_back(mmd_u2(normal_vector(rng, 50), normal_vector(rng, 50), 1.0));
  double mean = 0, var = 0;
  for (double x : v) mean += x / 200;
  for (double x : v) var += (x - mean) * (x - mean) / 199;
  CHECK(std::abs(mean) < 3 * std::sqrt(var / 200));
}

TEST_CASE("mmd argument checks") {
  CHECK_THROWS(mmd_u2(Eigen::Vector2d(0, 1), Eigen::Vector3d(0, 1, 2), 1.0));
  CHECK_THROWS(mmd_u2(Eigen::Vector2d(0, 1), Eigen::Vector2d(0, 1), 0.0));
}

TEST_CASE("templated mmd in float agrees with double") {
  Rng rng(5);
  const Eigen::VectorXd a = normal_vector(rng, 40), b = normal_vector(rng, 40, 0.3);
  CHECK_THAT(mmd_u2(a.cast<float>(), b.cast<float>(), 1.0), WithinAbs(mmd_u2(a, b, 1.0), 1e-5));
}

TEST_CASE("median bandwidth small cases") {
  CHECK(median_bandwidth(ScoreSample(Eigen::Vector2d(0, 1)), ScoreSample(Eigen::Vector2d(0, 1))) == 1.0);
  // pool {0, 1, 2, 0}: non-zero differences {1, 2, 1, 1, 2} -> 1
  CHECK(median_bandwidth(ScoreSample(Eigen::Vector2d(0, 1)), ScoreSample(Eigen::Vector2d(2, 0))) == 1.0);
}

TEST_CASE("median bandwidth matches the materialized median") {
  Rng rng(6);
  for (int rep = 0; rep < 20; ++rep) {
    Eigen::VectorXd a = normal_vector(rng, 30 + rep), b = normal_vector(rng, 30 + rep, 1.0);
    if (rep % 3 == 0) a = a.array().round();  // ties
    CHECK(median_bandwidth(ScoreSample(a), ScoreSample(b)) == naive_median(a, b));
  }
}

TEST_CASE("median bandwidth scales with the data") {
  Rng rng(7);
  const Eigen::VectorXd a = normal_vector(rng, 64), b = normal_vector(rng, 64);
  const double h = median_bandwidth(ScoreSample(a), ScoreSample(b));
  const double h4 = median_bandwidth(ScoreSample(4.0 * a), ScoreSample(4.0 * b));
  CHECK_THAT(h4, WithinAbs(4.0 * h, 1e-12));
}

TEST_CASE("discrepancy against an affine copy is the same-sample baseline") {
  Rng rng(8);
  const Eigen::VectorXd g = normal_vector(rng, 2000, 0.3, 2.0);
  const ScoreSample gold(g), copy((2.0 * g.array() + 5.0).matrix());
  const double v = rm_discrepancy(copy, gold);
  const Eigen::VectorXd s = standardized(g);
  CHECK(std::abs(v) < 0.05);
  CHECK_THAT(rm_discrepancy(copy, gold, 1.0), WithinAbs(mmd_u2(s, s, 1.0), 1e-9));
}

TEST_CASE("an order-reversing proxy is detected") {
  Rng rng(9);
  std::gamma_distribution<double> skew(1.0, 1.0);
  Eigen::VectorXd g(2000);
  for (auto& x : g) x = skew(rng);
  const double v = rm_discrepancy(ScoreSample((-g).eval()), ScoreSample(g));
  CHECK(v > 0.05);
}

TEST_CASE("discrepancy is symmetric") {
  Rng rng(10);
  const ScoreSample a(normal_vector(rng, 300)), b(normal_vector(rng, 300, 0.0, 3.0));
  CHECK_THAT(rm_discrepancy(a, b), WithinAbs(rm_discrepancy(b, a), 1e-12));
  CHECK_THAT(rm_discrepancy(a, b, 0.7), WithinAbs(rm_discrepancy(b, a, 0.7), 1e-12));
}

TEST_CASE("single row makes one bucket with zero std") {
  const auto b = bucket_by_kl({row(0.3, 1.5)}, 1.0);
  REQUIRE(b.size() == 1);
  CHECK(b[0].std_gold == 0.0);
  CHECK(b[0].count == 1);
  CHECK(b[0].lo == 0.0);
  CHECK(b[0].hi == 1.0);
}

TEST_CASE("bucket statistics by hand") {
  const auto b = bucket_by_kl({row(0.1, 1.0), row(0.2, 3.0)}, 1.0);
  REQUIRE(b.size() == 1);
  CHECK(b[0].mean_gold == 2.0);
  CHECK(b[0].std_gold == 1.0);
}

TEST_CASE("bucket refinement, counts and order independence") {
  Rng rng(11);
  std::uniform_real_distribution<double> kl(0.0, 5.0), g(-1.0, 1.0);
  std::vector<CheckpointRow> rows;
  for (int i = 0; i < 300; ++i) rows.push_back(row(kl(rng), g(rng), g(rng), i % 7 ? g(rng) : NAN));
  std::size_t last = 0;
  for (double w : {2.0, 1.0, 0.5, 0.25}) {
    const auto b = bucket_by_kl(rows, w);
    CHECK(b.size() >= last);
    last = b.size();
    int total = 0;
    for (const auto& x : b) total += x.count;
    CHECK(total == 300);
    for (std::size_t i = 1; i < b.size(); ++i) CHECK(b[i].index > b[i - 1].index);
  }
  auto shuffled = rows;
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  CHECK(aggregate_csv(aggregate_by_iteration(rows, 0.25)) == aggregate_csv(aggregate_by_iteration(shuffled, 0.25)));
}

TEST_CASE("bucket mmd skips degenerate rows") {
  const auto b = bucket_by_kl({row(0.1, 1, 0, 0.2), row(0.2, 1, 0, NAN)}, 1.0);
  CHECK(b[0].mmd == 0.2);
  const auto only_nan = bucket_by_kl({row(0.1, 1, 0, NAN)}, 1.0);
  CHECK(std::isnan(only_nan[0].mmd));
}

TEST_CASE("bucketing can use kl_to_init") {
  const auto b = bucket_by_kl({row(1.5, 1.0)}, 1.0, KlAxis::ToInit);
  CHECK(b[0].index == 0);
  CHECK(bucket_by_kl({row(1.5, 1.0)}, 1.0)[0].index == 1);
  CHECK_THROWS(bucket_by_kl({row(1.0, 1.0)}, 0.0));
}

TEST_CASE("aggregate csv layout") {
  const std::vector<CheckpointRow> rows{row(0.1, 1.0, 2.0, 0.5, 1), row(0.3, 2.0, 2.0, NAN, 2)};
  const std::string csv = aggregate_csv(aggregate_by_iteration(rows, 0.25));
  CHECK(csv ==
        "iteration,kl_bucket_lo,kl_bucket_hi,mean_gold,std_gold,mean_proxy,mmd,count\n"
        "1,0,0.25,1,0,2,0.5,1\n"
        "2,0.25,0.5,2,0,2,nan,1\n");
}
