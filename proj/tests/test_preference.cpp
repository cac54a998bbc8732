// SPDX-License-Identifier: Apache-2.0
#include "catch_amalgamated.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "itrlhf/preference.hpp"

using namespace itrlhf;

namespace {

const SyntheticWorld& world() {
  static const SyntheticWorld w = make_world(7, 8, 32, 4);
  return w;
}

// Dataset k holds examples tagged y0 = k, y1 = index within the dataset.
PreferenceDataset tagged(int k, int n, int n_prompts = 8) {
  PreferenceDataset d;
  d.iteration = k;
  for (int i = 0; i < n; ++i) d.examples.push_back({i % n_prompts, k, i, i % 2});
  return d;
}

std::vector<PreferenceDataset> tagged_list(std::vector<int> sizes) {
  std::vector<PreferenceDataset> out;
  for (std::size_t k = 0; k < sizes.size(); ++k) out.push_back(tagged(static_cast<int>(k), sizes[k]));
  return out;
}

std::map<int, int> per_source(const PreferenceDataset& d) {
  std::map<int, int> c;
  for (const auto& e : d.examples) ++c[e.y0];
  return c;
}

bool subset_of_union(const PreferenceDataset& out, const std::vector<PreferenceDataset>& in) {
  std::multiset<std::tuple<int, int, int, int>> pool;
  for (const auto& d : in)
    for (const auto& e : d.examples) pool.insert({e.x, e.y0, e.y1, e.p});
  for (const auto& e : out.examples) {
    auto it = pool.find({e.x, e.y0, e.y1, e.p});
    if (it == pool.end()) return false;
    pool.erase(it);
  }
  return true;
}

}  // namespace

TEST_CASE("argmax labels follow the gold ordering") {
  Rng rng(1);
  const auto d = collect_preferences(Policy::zeros_like(world()), world(), 500, LabelMode::Argmax, rng);
  for (const auto& e : d.examples) {
    const double g0 = gold_reward(world(), e.x, e.y0), g1 = gold_reward(world(), e.x, e.y1);
    if (g0 != g1) CHECK(e.p == (g0 > g1 ? 1 : 0));
  }
}

TEST_CASE("bt labels on a zero gap are fair coins") {
  Rng rng(2);
  constexpr int n = 10000;
  int wins = 0;
  for (int i = 0; i < n; ++i) wins += label_preference(0.7, 0.7, LabelMode::BtSample, rng);
  CHECK(std::abs(wins - n / 2.0) < 5 * std::sqrt(n * 0.25));
}

TEST_CASE("bt labels follow the Bradley-Terry rate") {
  Rng rng(3);
  constexpr int n = 20000;
  int wins = 0;
  for (int i = 0; i < n; ++i) wins += label_preference(std::log(3.0), 0.0, LabelMode::BtSample, rng);
  CHECK(std::abs(wins - 0.75 * n) < 5 * std::sqrt(n * 0.75 * 0.25));
}

TEST_CASE("collection size, distinct responses and determinism") {
  Rng a(4), b(4);
  const Policy pol = Policy::zeros_like(world());
  const auto da = collect_preferences(pol, world(), 1000, LabelMode::BtSample, a, 3);
  const auto db = collect_preferences(pol, world(), 1000, LabelMode::BtSample, b, 3);
  CHECK(da.size() == 1000);
  CHECK(da.iteration == 3);
  CHECK(da.skipped == 0);
  CHECK(da.examples == db.examples);
  for (const auto& e : da.examples) CHECK(e.y0 != e.y1);
}

TEST_CASE("a deterministic policy collides until the instance is skipped") {
  Policy pol = Policy::zeros_like(world());
  pol.bias()(3) = 1e6;
  Rng rng(5);
  const auto d = collect_preferences(pol, world(), 20, LabelMode::BtSample, rng);
  CHECK(d.empty());
  CHECK(d.skipped == 20);
}

TEST_CASE("concatenate keeps everything in order") {
  const auto in = tagged_list({1000, 1000, 1000});
  Rng rng(6);
  const auto out = combine_data(DataStrategy::Concatenate, in, 1000, rng);
  REQUIRE(out.size() == 3000);
  std::size_t i = 0;
  for (const auto& d : in)
    for (const auto& e : d.examples) CHECK(out.examples[i++] == e);
}

TEST_CASE("take last is the newest dataset verbatim") {
  const auto in = tagged_list({30, 40});
  Rng rng(7);
  CHECK(combine_data(DataStrategy::TakeLast, in, 30, rng).examples == in[1].examples);
}

TEST_CASE("sample splits the target equally") {
  const auto in = tagged_list({1000, 1000, 1000, 1000});
  Rng rng(8);
  const auto out = combine_data(DataStrategy::Sample, in, 1000, rng);
  CHECK(out.size() == 1000);
  for (const auto& [k, c] : per_source(out)) CHECK(c == 250);
  CHECK(subset_of_union(out, in));
}

TEST_CASE("sample remainder goes to the most recent datasets by default") {
  const auto in = tagged_list({100, 100, 100, 100});
  CHECK(sample_quotas(in, 103, RemainderPolicy::MostRecent) == std::vector<int>{25, 26, 26, 26});
  CHECK(sample_quotas(in, 103, RemainderPolicy::Oldest) == std::vector<int>{26, 26, 26, 25});
  Rng rng(9);
  const auto c = per_source(combine_data(DataStrategy::Sample, in, 103, rng));
  CHECK(c.at(0) == 25);
  CHECK(c.at(3) == 26);
}

TEST_CASE("a short dataset's shortfall moves to the others") {
  const auto in = tagged_list({10, 1000});
  CHECK(sample_quotas(in, 500, RemainderPolicy::MostRecent) == std::vector<int>{10, 490});
  CHECK_THROWS(sample_quotas(in, 1011, RemainderPolicy::MostRecent));
  Rng rng(10);
  CHECK_THROWS(combine_data(DataStrategy::Sample, in, 1011, rng));
}

TEST_CASE("sample with one dataset is the identity") {
  const auto in = tagged_list({50});
  Rng rng(11);
  CHECK(combine_data(DataStrategy::Sample, in, 50, rng).examples == in[0].examples);
}

TEST_CASE("sample draws without replacement and is seed-deterministic") {
  const auto in = tagged_list({60, 60, 60});
  Rng a(12), b(12), c(13);
  const auto oa = combine_data(DataStrategy::Sample, in, 90, a);
  const auto ob = combine_data(DataStrategy::Sample, in, 90, b);
  const auto oc = combine_data(DataStrategy::Sample, in, 90, c);
  CHECK(oa.examples == ob.examples);
  CHECK(oa.examples != oc.examples);
  std::set<std::pair<int, int>> ids;
  for (const auto& e : oa.examples) ids.insert({e.y0, e.y1});
  CHECK(ids.size() == 90);
  CHECK(subset_of_union(oa, in));
}

TEST_CASE("sample exclusive keeps prompts unique when feasible") {
  std::vector<PreferenceDataset> in;
  for (int k = 0; k < 2; ++k) in.push_back(tagged(k, 40, 8));
  Rng rng(14);
  const auto out = combine_data(DataStrategy::SampleExclusive, in, 8, rng);
  REQUIRE(out.size() == 8);
  std::set<int> prompts;
  for (const auto& e : out.examples) prompts.insert(e.x);
  CHECK(prompts.size() == 8);
  CHECK(out.exclusivity_warnings == 0);
  CHECK(subset_of_union(out, in));
}

TEST_CASE("sample exclusive relaxes and warns when uniqueness is infeasible") {
  std::vector<PreferenceDataset> in;
  for (int k = 0; k < 2; ++k) in.push_back(tagged(k, 40, 8));
  Rng rng(15);
  const auto out = combine_data(DataStrategy::SampleExclusive, in, 20, rng);
  CHECK(out.size() == 20);
  CHECK(out.exclusivity_warnings == 12);
  CHECK(subset_of_union(out, in));
}

TEST_CASE("every strategy returns a sub-multiset of the inputs") {
  Rng rng(16);
  std::vector<PreferenceDataset> in;
  for (int k = 1; k <= 3; ++k) in.push_back(collect_preferences(Policy::zeros_like(world()), world(), 50, LabelMode::BtSample, rng, k));
  for (auto s : {DataStrategy::TakeLast, DataStrategy::Concatenate, DataStrategy::Sample, DataStrategy::SampleExclusive})
    CHECK(subset_of_union(combine_data(s, in, 50, rng), in));
}

TEST_CASE("combine_data rejects an empty list") {
  Rng rng(17);
  CHECK_THROWS(combine_data(DataStrategy::Concatenate, {}, 10, rng));
}
