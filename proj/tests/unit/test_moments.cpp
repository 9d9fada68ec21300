#include <algorithm>
#include <cmath>
#include <numeric>

#include "builders.hpp"
#include "doctest.h"
#include "seqlabel/moments.hpp"
#include "seqlabel/synth.hpp"

using namespace seqlabel;

namespace {

const int O[] = {0};

// Two single-vote sources; the first votes +1 with probability p, the second
// agrees with it with probability q.
VoteTensor coupled_pair(std::int64_t n, double p, double q, std::uint64_t seed) {
  VoteTensor v(n, {1, 1});
  SplitMix64 rng(seed);
  for (std::int64_t i = 0; i < n; ++i) {
    const int a = rng.uniform() < p ? 1 : -1;
    v.set(i, 0, 0, a);
    v.set(i, 1, 0, rng.uniform() < q ? a : -a);
  }
  return v;
}

}  // namespace

TEST_CASE("pair_expectation examples") {
  CHECK(pair_expectation(coupled_pair(1000, 0.5, 1.0, 1), 0, O, 1, O).value == 1.0);
  CHECK(pair_expectation(coupled_pair(1000, 0.5, 0.0, 1), 0, O, 1, O).value == -1.0);

  // independent sources with E = 0.6 and 0.8
  VoteTensor v(1000000, {1, 1});
  SplitMix64 rng(5);
  for (std::int64_t i = 0; i < v.sequences(); ++i) {
    v.set(i, 0, 0, rng.uniform() < 0.8 ? 1 : -1);
    v.set(i, 1, 0, rng.uniform() < 0.9 ? 1 : -1);
  }
  CHECK(std::abs(pair_expectation(v, 0, O, 1, O).value - 0.48) <= 0.005);
}

TEST_CASE("pair_expectation is symmetric and ignores abstentions") {
  VoteTensor v(500, {2, 1});
  SplitMix64 rng(9);
  for (std::int64_t i = 0; i < v.sequences(); ++i)
    for (int j = 0; j < 2; ++j)
      for (int o = 0; o < v.width(j); ++o) v.set(i, j, o, static_cast<int>(rng.next() % 3) - 1);
  const int U[] = {0, 1};
  const auto a = pair_expectation(v, 0, U, 1, O);
  const auto b = pair_expectation(v, 1, O, 0, U);
  CHECK(a.value == b.value);
  CHECK(a.support == b.support);

  std::int64_t sum = 0, support = 0;
  for (std::int64_t i = 0; i < v.sequences(); ++i) {
    const int p = v.vote(i, 0, 0) * v.vote(i, 0, 1) * v.vote(i, 1, 0);
    sum += p;
    support += p != 0;
  }
  CHECK(a.support == support);
  CHECK(a.value == static_cast<double>(sum) / static_cast<double>(support));
}

TEST_CASE("moments depend only on the histogram of rows") {
  auto v = coupled_pair(2000, 0.3, 0.7, 3);
  for (std::int64_t i = 0; i < v.sequences(); i += 5) v.set(i, 1, 0, 0);
  VoteTensor reversed(v.sequences(), v.widths());
  for (std::int64_t i = 0; i < v.sequences(); ++i)
    for (int j = 0; j < 2; ++j) reversed.set(v.sequences() - 1 - i, j, 0, v.vote(i, j, 0));
  const std::vector<MomentKey> keys{{0}, {1}, {0, 1}};
  const auto a = empirical_stats(v, keys);
  const auto b = empirical_stats(reversed, keys);
  for (const auto& k : keys) {
    CHECK(a.mean(k) == b.mean(k));
    CHECK(a.support(k) == b.support(k));
  }
}

TEST_CASE("zero support is insufficient data") {
  VoteTensor v(10, {1, 1});
  for (int i = 0; i < 10; ++i) v.set(i, 0, 0, 1);
  CHECK_THROWS_AS(pair_expectation(v, 0, O, 1, O), InsufficientData);
  CHECK_THROWS_AS(source_mean(v, 1, O), InsufficientData);
  const std::vector<MomentKey> keys{{0, 1}};
  CHECK_THROWS_AS(empirical_stats(v, keys).mean({0, 1}), InsufficientData);
  CHECK_THROWS_AS(abstain_rate(VoteTensor(0, {1}), 0, 0), InsufficientData);
}

TEST_CASE("source_mean and abstain_rate examples") {
  VoteTensor v(4, {1});
  v.set(0, 0, 0, 1);
  v.set(1, 0, 0, -1);
  CHECK(source_mean(v, 0, O).value == 0.0);
  CHECK(source_mean(v, 0, O).support == 2);
  CHECK(abstain_rate(v, 0, 0) == 0.5);

  const auto w = coupled_pair(1000000, 0.7, 1.0, 17);
  CHECK(std::abs(source_mean(w, 0, O).value - 0.4) <= 0.005);
  CHECK(abstain_rate(w, 0, 0) == 0.0);
}

TEST_CASE("empirical_stats matches the direct helpers") {
  const auto inst = chain_instance();
  const auto data = generate({&inst.model, &inst.truth, 3000, 4});
  const auto keys = singleton_and_pair_keys(inst.model);
  const auto stats = empirical_stats(data.votes, keys);
  CHECK(stats.n == 3000.0);
  for (const auto& key : keys) {
    const auto& u = inst.model.units()[key[0]];
    const int U[] = {u.offset};
    if (key.size() == 1) {
      CHECK(stats.mean(key) == source_mean(data.votes, u.source, U).value);
      CHECK(stats.vote_rate(key[0]) == doctest::Approx(1.0 - abstain_rate(data.votes, u.source, u.offset)));
    } else {
      const auto& v = inst.model.units()[key[1]];
      const int U2[] = {v.offset};
      const auto e = pair_expectation(data.votes, u.source, U, v.source, U2);
      CHECK(stats.mean(key) == e.value);
      CHECK(stats.support(key) == static_cast<double>(e.support));
    }
  }
}

TEST_CASE("empirical_stats is independent of the thread count") {
  const auto inst = chain_instance();
  const auto data = generate({&inst.model, &inst.truth, 20011, 8});
  const auto keys = singleton_and_pair_keys(inst.model);
  const auto one = empirical_stats(data.votes, keys, 1);
  for (int threads : {2, 3, 8}) {
    const auto many = empirical_stats(data.votes, keys, threads);
    CHECK(many.n == one.n);
    for (const auto& k : keys) {
      CHECK(many.moments.at(k).sum == one.moments.at(k).sum);
      CHECK(many.moments.at(k).count == one.moments.at(k).count);
    }
  }
}

TEST_CASE("pooling") {
  SUBCASE("singleton groups pool to the unit moments") {
    const auto inst = random_instance(3);
    const auto untied = inst.model.untied();
    const auto data = generate({&untied, &inst.truth, 4000, 1});
    const auto keys = singleton_and_pair_keys(untied);
    const auto stats = empirical_stats(data.votes, keys);
    const auto pooled = pooled_stats(untied, stats);
    for (std::size_t s = 0; s < pooled.size(); ++s) {
      const int u = untied.slots()[s].units[0];
      CHECK(pooled[s].mean == stats.mean({u}));
      CHECK(pooled[s].support == stats.support({u}));
    }
  }
  SUBCASE("supports add across a tie group") {
    const TaskLayout layout(4);
    std::vector<SourceSpec> s;
    for (int t = 0; t < 4; ++t)
      for (int c = 0; c < 3; ++c) s.push_back({0, {t}, "g" + std::to_string(c)});
    const ModelSpec model(layout, s, {}, Prior::uniform(4));
    auto truth = build::symmetric_truth(model, std::vector<double>(12, 0.6), 0.0);
    const auto data = generate({&model, &truth, 1000, 2});
    const auto pooled = pooled_stats(model, empirical_stats(data.votes, singleton_and_pair_keys(model)));
    REQUIRE(pooled.size() == 3);
    for (const auto& p : pooled) CHECK(p.support == 4000.0);
  }
  SUBCASE("tying reduces the variance of the mean") {
    // one tied source per element, labels independent across elements
    const TaskLayout layout(8);
    std::vector<SourceSpec> tied_sources;
    for (int t = 0; t < 8; ++t) tied_sources.push_back({0, {t}, "g"});
    const ModelSpec tied(layout, tied_sources, {}, Prior::uniform(8));
    const auto truth = build::symmetric_truth(tied, std::vector<double>(8, 0.75), 0.2);
    std::vector<double> single, pooled;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
      const auto data = generate({&tied, &truth, 10000, seed});
      const auto stats = empirical_stats(data.votes, singleton_and_pair_keys(tied));
      single.push_back(stats.mean({0}));
      pooled.push_back(pooled_stats(tied, stats)[0].mean);
    }
    auto sd = [](const std::vector<double>& x) {
      const double m = std::accumulate(x.begin(), x.end(), 0.0) / x.size();
      double s = 0.0;
      for (double v : x) s += (v - m) * (v - m);
      return std::sqrt(s / (x.size() - 1));
    };
    CHECK(sd(pooled) <= 0.5 * sd(single));
  }
}
