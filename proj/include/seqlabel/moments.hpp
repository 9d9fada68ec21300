#pragma once

// Observable statistics of the votes. A moment is the mean of a product of
// unit votes over the sequences on which every referenced unit voted.

#include <cstdint>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include "seqlabel/core.hpp"
#include "seqlabel/model.hpp"

namespace seqlabel {

// Sorted unit ids.
using MomentKey = std::vector<int>;

struct Moment {
  double sum = 0.0;    // sum of vote products (or its expectation)
  double count = 0.0;  // sequences with every referenced unit voting
  double mean() const { return sum / count; }
};

MomentKey make_key(std::vector<int> units);

// Empirical or population moments. Population stats use n = 1 and counts
// equal to the probability that every referenced unit votes.
struct ProductStats {
  double n = 0.0;
  std::map<MomentKey, Moment> moments;

  const Moment* find(const MomentKey& key) const;
  // Mean of a key with nonzero support; throws InsufficientData otherwise.
  double mean(const MomentKey& key) const;
  double support(const MomentKey& key) const;
  double vote_rate(int unit) const;
};

// Accumulates every key over all sequences. Parallel over sequence blocks
// with integer partial sums, so the result does not depend on `threads`.
ProductStats empirical_stats(const VoteTensor& votes, std::span<const MomentKey> keys, int threads = 1);

struct Expectation {
  double value = 0.0;
  std::int64_t support = 0;
};

// Direct single-key helpers on source-relative offsets.
Expectation pair_expectation(const VoteTensor& votes, int j, std::span<const int> U, int k,
                             std::span<const int> U2);
Expectation source_mean(const VoteTensor& votes, int j, std::span<const int> U);
double abstain_rate(const VoteTensor& votes, int j, int offset);

// Per-slot pooling of the unit means: counts add, so the support of a slot
// is the sum of its member units' supports.
struct SlotMoment {
  double mean = 0.0;
  double support = 0.0;
  double vote_rate = 0.0;
};
std::vector<SlotMoment> pooled_stats(const ModelSpec& model, const ProductStats& stats);

// Every singleton key plus every informative unit pair.
std::vector<MomentKey> singleton_and_pair_keys(const ModelSpec& model);

}  // namespace seqlabel
