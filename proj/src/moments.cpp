#include "seqlabel/moments.hpp"

#include <algorithm>
#include <thread>

namespace seqlabel {

MomentKey make_key(std::vector<int> units) {
  std::sort(units.begin(), units.end());
  return units;
}

const Moment* ProductStats::find(const MomentKey& key) const {
  auto it = moments.find(key);
  return it == moments.end() ? nullptr : &it->second;
}

double ProductStats::mean(const MomentKey& key) const {
  const Moment* m = find(key);
  if (!m || !(m->count > 0.0)) {
    std::string name;
    for (int u : key) name += (name.empty() ? "" : ",") + std::to_string(u);
    throw InsufficientData("no sequence has every unit of {" + name + "} voting");
  }
  return m->mean();
}

double ProductStats::support(const MomentKey& key) const {
  const Moment* m = find(key);
  return m ? m->count : 0.0;
}

double ProductStats::vote_rate(int unit) const { return n > 0.0 ? support({unit}) / n : 0.0; }

ProductStats empirical_stats(const VoteTensor& votes, std::span<const MomentKey> keys, int threads) {
  std::vector<int> flat, start{0};
  for (const auto& key : keys) {
    for (int u : key) {
      if (u < 0 || u >= votes.units()) throw InvalidSpec("moment key references unknown unit");
      flat.push_back(u);
    }
    start.push_back(static_cast<int>(flat.size()));
  }
  const std::size_t K = keys.size();
  const std::int64_t n = votes.sequences();
  threads = std::max(1, std::min<int>(threads, static_cast<int>(std::max<std::int64_t>(1, n / 4096))));

  std::vector<std::vector<std::int64_t>> sums(threads, std::vector<std::int64_t>(K, 0));
  std::vector<std::vector<std::int64_t>> counts(threads, std::vector<std::int64_t>(K, 0));
  auto work = [&](int w) {
    const std::int64_t lo = n * w / threads, hi = n * (w + 1) / threads;
    auto& s = sums[w];
    auto& c = counts[w];
    for (std::int64_t i = lo; i < hi; ++i) {
      const auto row = votes.row(i);
      for (std::size_t k = 0; k < K; ++k) {
        int product = 1;
        for (int p = start[k]; p < start[k + 1] && product != 0; ++p) product *= row[flat[p]];
        if (product != 0) {
          s[k] += product;
          ++c[k];
        }
      }
    }
  };
  if (threads == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < threads; ++w) pool.emplace_back(work, w);
    for (auto& t : pool) t.join();
  }

  ProductStats stats;
  stats.n = static_cast<double>(n);
  for (std::size_t k = 0; k < K; ++k) {
    std::int64_t s = 0, c = 0;
    for (int w = 0; w < threads; ++w) {
      s += sums[w][k];
      c += counts[w][k];
    }
    stats.moments[keys[k]] = {static_cast<double>(s), static_cast<double>(c)};
  }
  return stats;
}

namespace {

Expectation product_mean(const VoteTensor& votes, const std::vector<int>& cells) {
  std::int64_t sum = 0, support = 0;
  for (std::int64_t i = 0; i < votes.sequences(); ++i) {
    int product = 1;
    for (int c : cells) product *= votes.unit_vote(i, c);
    if (product != 0) {
      sum += product;
      ++support;
    }
  }
  if (support == 0) throw InsufficientData("zero support for the requested vote product");
  return {static_cast<double>(sum) / static_cast<double>(support), support};
}

void add_cells(const VoteTensor& votes, int j, std::span<const int> U, std::vector<int>& cells) {
  if (j < 0 || j >= votes.sources()) throw InvalidSpec("unknown source " + std::to_string(j + 1));
  for (int o : U) {
    if (o < 0 || o >= votes.width(j)) throw InvalidSpec("offset outside the coverage of source " + std::to_string(j + 1));
    cells.push_back(votes.offset(j) + o);
  }
}

}  // namespace

Expectation pair_expectation(const VoteTensor& votes, int j, std::span<const int> U, int k, std::span<const int> U2) {
  std::vector<int> cells;
  add_cells(votes, j, U, cells);
  add_cells(votes, k, U2, cells);
  std::sort(cells.begin(), cells.end());  // same cells, same order: symmetric by construction
  return product_mean(votes, cells);
}

Expectation source_mean(const VoteTensor& votes, int j, std::span<const int> U) {
  std::vector<int> cells;
  add_cells(votes, j, U, cells);
  return product_mean(votes, cells);
}

double abstain_rate(const VoteTensor& votes, int j, int offset) {
  if (votes.sequences() == 0) throw InsufficientData("no sequences");
  const int o[1] = {offset};
  std::vector<int> cells;
  add_cells(votes, j, o, cells);
  std::int64_t zeros = 0;
  for (std::int64_t i = 0; i < votes.sequences(); ++i) zeros += votes.unit_vote(i, cells[0]) == 0;
  return static_cast<double>(zeros) / static_cast<double>(votes.sequences());
}

std::vector<SlotMoment> pooled_stats(const ModelSpec& model, const ProductStats& stats) {
  std::vector<SlotMoment> out(model.slots().size());
  for (std::size_t s = 0; s < out.size(); ++s) {
    double sum = 0.0, count = 0.0;
    for (int u : model.slots()[s].units) {
      if (const Moment* m = stats.find({u})) {
        sum += m->sum;
        count += m->count;
      }
    }
    const double units = static_cast<double>(model.slots()[s].units.size());
    out[s].support = count;
    out[s].mean = count > 0.0 ? sum / count : 0.0;
    out[s].vote_rate = stats.n > 0.0 ? count / (stats.n * units) : 0.0;
  }
  return out;
}

std::vector<MomentKey> singleton_and_pair_keys(const ModelSpec& model) {
  std::vector<MomentKey> keys;
  const int U = static_cast<int>(model.units().size());
  for (int u = 0; u < U; ++u) keys.push_back({u});
  for (int u = 0; u < U; ++u)
    for (int v = u + 1; v < U; ++v)
      if (model.informative(u, v)) keys.push_back({u, v});
  return keys;
}

}  // namespace seqlabel
