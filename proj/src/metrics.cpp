// SPDX-License-Identifier: Apache-2.0
#include "itrlhf/metrics.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace itrlhf {

ScoreSample::ScoreSample(Eigen::VectorXd v, std::string tag)
    : values(std::move(v)), source_tag(std::move(tag)) {
  if (values.size() < 2) throw std::invalid_argument("ScoreSample: need n >= 2");
  if (!values.allFinite()) throw std::invalid_argument("ScoreSample: non-finite value");
}

ScoreSample standardize(const ScoreSample& s) {
  ScoreSample out;
  out.values = standardized(s.values);
  out.source_tag = s.source_tag;
  return out;
}

double mmd_u2(const ScoreSample& s1, const ScoreSample& s2, double bandwidth) {
  return mmd_u2(s1.values, s2.values, bandwidth);
}

namespace {

struct Pool {
  std::vector<double> values;       // distinct, ascending
  std::vector<std::uint64_t> cum;   // cum[i] = multiplicity of values[0..i)
};

Pool make_pool(const ScoreSample& s1, const ScoreSample& s2) {
  std::vector<double> all(s1.values.data(), s1.values.data() + s1.size());
  all.insert(all.end(), s2.values.data(), s2.values.data() + s2.size());
  std::sort(all.begin(), all.end());
  Pool pool;
  pool.cum.push_back(0);
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (i == 0 || all[i] != all[i - 1]) {
      pool.values.push_back(all[i]);
      pool.cum.push_back(pool.cum.back());
    }
    ++pool.cum.back();
  }
  return pool;
}

// Number of pooled pairs with 0 < |a - b| <= t.
std::uint64_t pairs_within(const Pool& pool, double t) {
  const std::size_t d = pool.values.size();
  std::uint64_t total = 0;
  std::size_t j = 0;
  for (std::size_t i = 0; i < d; ++i) {
    if (j < i) j = i;
    while (j + 1 < d && pool.values[j + 1] - pool.values[i] <= t) ++j;
    const std::uint64_t count_i = pool.cum[i + 1] - pool.cum[i];
    total += count_i * (pool.cum[j + 1] - pool.cum[i + 1]);
  }
  return total;
}

// k-th smallest (0-based) non-zero pairwise difference. Non-negative doubles
// order like their bit patterns, so bisecting the bits yields the exact value.
double kth_difference(const Pool& pool, std::uint64_t k) {
  std::uint64_t lo = 0;
  std::uint64_t hi = std::bit_cast<std::uint64_t>(pool.values.back() - pool.values.front());
  while (lo < hi) {
    const std::uint64_t mid = lo + (hi - lo) / 2;
    if (pairs_within(pool, std::bit_cast<double>(mid)) >= k + 1)
      hi = mid;
    else
      lo = mid + 1;
  }
  return std::bit_cast<double>(lo);
}

}  // namespace

double median_bandwidth(const ScoreSample& s1, const ScoreSample& s2) {
  const Pool pool = make_pool(s1, s2);
  if (pool.values.size() < 2)
    throw DegenerateSampleError("median_bandwidth: pooled sample has fewer than two distinct values");
  const double inf = std::numeric_limits<double>::infinity();
  const std::uint64_t total = pairs_within(pool, inf);
  if (total % 2 == 1) return kth_difference(pool, total / 2);
  return 0.5 * (kth_difference(pool, total / 2 - 1) + kth_difference(pool, total / 2));
}

double rm_discrepancy(const ScoreSample& rm_scores, const ScoreSample& gold_scores,
                      std::optional<double> bandwidth) {
  if (rm_scores.size() != gold_scores.size())
    throw std::invalid_argument("rm_discrepancy: samples must have equal length");
  const ScoreSample a = standardize(rm_scores);
  const ScoreSample b = standardize(gold_scores);
  const double h = bandwidth ? *bandwidth : median_bandwidth(a, b);
  return mmd_u2(a, b, h);
}

// ---------------------------------------------------------------------------

namespace {

double kl_of(const CheckpointRow& row, KlAxis axis) {
  return axis == KlAxis::ToSft ? row.kl_to_sft : row.kl_to_init;
}

// Sums in sorted order so results do not depend on row order.
double sorted_mean(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

std::vector<KlBucket> bucket_by_kl(const std::vector<CheckpointRow>& rows, double bucket_width,
                                   KlAxis axis) {
  if (!(bucket_width > 0.0)) throw std::invalid_argument("bucket_by_kl: bucket_width must be > 0");
  std::map<long, std::vector<const CheckpointRow*>> groups;
  for (const auto& row : rows) {
    const double kl = std::max(0.0, kl_of(row, axis));
    groups[static_cast<long>(std::floor(kl / bucket_width))].push_back(&row);
  }
  std::vector<KlBucket> out;
  for (const auto& [index, members] : groups) {
    std::vector<double> gold;
    std::vector<double> proxy;
    std::vector<double> mmd;
    for (const CheckpointRow* r : members) {
      gold.push_back(r->mean_gold);
      proxy.push_back(r->mean_proxy);
      if (std::isfinite(r->mmd)) mmd.push_back(r->mmd);
    }
    KlBucket b;
    b.index = index;
    b.lo = static_cast<double>(index) * bucket_width;
    b.hi = static_cast<double>(index + 1) * bucket_width;
    b.count = static_cast<int>(members.size());
    b.mean_gold = sorted_mean(gold);
    std::vector<double> sq;
    for (double g : gold) sq.push_back((g - b.mean_gold) * (g - b.mean_gold));
    b.std_gold = std::sqrt(sorted_mean(sq));
    b.mean_proxy = sorted_mean(proxy);
    b.mmd = mmd.empty() ? std::numeric_limits<double>::quiet_NaN() : sorted_mean(mmd);
    out.push_back(b);
  }
  return out;
}

std::vector<AggregateRow> aggregate_by_iteration(const std::vector<CheckpointRow>& rows,
                                                 double bucket_width, KlAxis axis) {
  std::map<int, std::vector<CheckpointRow>> by_iter;
  for (const auto& row : rows) by_iter[row.iteration].push_back(row);
  std::vector<AggregateRow> out;
  for (const auto& [iteration, group] : by_iter)
    for (const auto& b : bucket_by_kl(group, bucket_width, axis)) out.push_back({iteration, b});
  return out;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

std::string aggregate_csv(const std::vector<AggregateRow>& rows) {
  std::ostringstream os;
  os << "iteration,kl_bucket_lo,kl_bucket_hi,mean_gold,std_gold,mean_proxy,mmd,count\n";
  for (const auto& r : rows) {
    const KlBucket& b = r.bucket;
    os << r.iteration << ',' << format_double(b.lo) << ',' << format_double(b.hi) << ','
       << format_double(b.mean_gold) << ',' << format_double(b.std_gold) << ','
       << format_double(b.mean_proxy) << ',' << format_double(b.mmd) << ',' << b.count << '\n';
  }
  return os.str();
}

}  // namespace itrlhf
