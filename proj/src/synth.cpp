#include "seqlabel/synth.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <functional>
#include <numeric>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <thread>

#include "seqlabel/estimator.hpp"

namespace seqlabel {

namespace {

constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

template <class Table>
int draw(const Table& weights, int count, int stride, int base, double u) {
  double acc = 0.0;
  int last = 0;
  for (int i = 0; i < count; ++i) {
    const double p = weights[base + i * stride];
    if (p <= 0.0) continue;
    last = i;
    acc += p;
    if (u < acc) return i;
  }
  return last;
}

int sign_of_bit(int bit) { return bit ? -1 : 1; }

void parallel_for(int jobs, int threads, const std::function<void(int)>& body) {
  threads = std::max(1, std::min(threads, jobs));
  if (threads == 1) {
    for (int i = 0; i < jobs; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  for (int w = 0; w < threads; ++w)
    pool.emplace_back([&] {
      for (int i = next++; i < jobs; i = next++) body(i);
    });
  for (auto& t : pool) t.join();
}

}  // namespace

std::uint64_t SplitMix64::next() {
  state_ += 0x9e3779b97f4a7c15ULL;
  return mix64(state_);
}

std::uint64_t stream_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b) {
  return mix64(mix64(master ^ mix64(a + 0x632be59bd9b4e019ULL)) ^ mix64(b + 0x2545f4914f6cdd1dULL));
}

void check_truth(const ModelSpec& model, const Truth& truth) {
  const std::size_t U = model.units().size();
  if (truth.mu.size() != U || truth.abstain.size() != U) throw InvalidSpec("truth tables do not match the unit count");
  for (std::size_t u = 0; u < U; ++u) {
    const auto& m = truth.mu[u];
    for (int w = 0; w < 2; ++w)
      if (m[w] < 0 || m[2 + w] < 0 || std::abs(m[w] + m[2 + w] - 1.0) > 1e-12)
        throw InvalidSpec("true accuracy table of unit " + std::to_string(u + 1) + " is not a distribution");
    if (!(truth.abstain[u] >= 0.0 && truth.abstain[u] < 1.0)) throw InvalidSpec("true abstain rate outside [0,1)");
  }
  for (const auto& p : truth.phi) {
    if (model.edge_partner(p.edge.first) != p.edge.second) throw InvalidSpec("true correlation slice on a non-edge");
    const auto& mj = truth.mu[model.unit_of(p.edge.first, p.offset)];
    const auto& mk = truth.mu[model.unit_of(p.edge.second, p.offset)];
    for (int w = 0; w < 2; ++w)
      for (int z = 0; z < 2; ++z) {
        if (std::abs(p.vote[4 * z + w] + p.vote[4 * z + 2 + w] - mj[2 * z + w]) > 1e-12 ||
            std::abs(p.vote[2 * z + w] + p.vote[4 + 2 * z + w] - mk[2 * z + w]) > 1e-12)
          throw InvalidSpec("true correlation slice does not reproduce its accuracy marginals");
      }
    for (double v : p.vote)
      if (v < 0) throw InvalidSpec("negative true correlation entry");
  }
  for (const auto& j : truth.joint) {
    if (!model.uses_joint(j.source)) throw InvalidSpec("joint truth for a source outside the joint form");
    const std::size_t S = std::size_t{1} << j.width;
    if (j.vote.size() != S * S) throw InvalidSpec("joint truth has the wrong size");
    for (std::size_t w = 0; w < S; ++w) {
      double col = 0.0;
      for (std::size_t z = 0; z < S; ++z) {
        if (j.vote[z * S + w] < 0) throw InvalidSpec("negative joint truth entry");
        col += j.vote[z * S + w];
      }
      if (std::abs(col - 1.0) > 1e-12) throw InvalidSpec("joint truth column is not a distribution");
    }
  }
}

Dataset generate(const GeneratorSpec& spec, int threads) {
  if (!spec.model || !spec.truth) throw InvalidSpec("generator needs a model and a truth");
  const auto& model = *spec.model;
  const auto& truth = *spec.truth;
  check_truth(model, truth);
  if (spec.n < 0) throw InvalidSpec("negative sequence count");
  const auto& layout = model.layout();

  std::vector<double> cumulative(layout.config_count());
  double acc = 0.0;
  for (Config y = 0; y < layout.config_count(); ++y) cumulative[y] = acc += model.prior()(y);

  std::vector<const PhiEntry*> phi_first(model.units().size(), nullptr);
  std::vector<char> phi_second(model.units().size(), 0);
  for (const auto& p : truth.phi) {
    phi_first[model.unit_of(p.edge.first, p.offset)] = &p;
    phi_second[model.unit_of(p.edge.second, p.offset)] = 1;
  }
  std::vector<const JointEntry*> joint(model.source_count(), nullptr);
  for (const auto& j : truth.joint) joint[j.source] = &j;

  Dataset data{VoteTensor(spec.n, model.widths()), std::vector<Config>(spec.n)};
  const std::int64_t n = spec.n;
  threads = std::max(1, std::min<int>(threads, static_cast<int>(std::max<std::int64_t>(1, n / 1024))));
  auto work = [&](int w) {
    const std::int64_t lo = n * w / threads, hi = n * (w + 1) / threads;
    for (std::int64_t i = lo; i < hi; ++i) {
      SplitMix64 label_rng(stream_seed(spec.seed, static_cast<std::uint64_t>(i), 0));
      const double u = label_rng.uniform() * acc;
      Config y = static_cast<Config>(std::upper_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin());
      y = std::min<Config>(y, static_cast<Config>(layout.config_count() - 1));
      while (model.prior()(y) <= 0.0 && y > 0) --y;
      data.latent[i] = y;
      auto row = data.votes.mutable_row(i);

      for (int j = 0; j < model.source_count(); ++j) {
        SplitMix64 rng(stream_seed(spec.seed, static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(j) + 1));
        const auto& src = model.sources()[j];
        const int s = src.size();
        const int first = model.unit_of(j, 0);
        if (joint[j]) {
          const std::size_t S = std::size_t{1} << s;
          std::size_t wbits = 0;
          for (int o = 0; o < s; ++o)
            if (!layout.positive(src.coverage[o], y)) wbits |= std::size_t{1} << o;
          const int z = draw(joint[j]->vote, static_cast<int>(S), static_cast<int>(S), static_cast<int>(wbits), rng.uniform());
          for (int o = 0; o < s; ++o) {
            const bool abstain = rng.uniform() < truth.abstain[first + o];
            row[first + o] = abstain ? 0 : static_cast<std::int8_t>(sign_of_bit(z >> o & 1));
          }
          continue;
        }
        for (int o = 0; o < s; ++o) {
          const int unit = first + o;
          const int wbit = layout.positive(src.coverage[o], y) ? 0 : 1;
          if (const PhiEntry* p = phi_first[unit]) {
            const int cell = draw(p->vote, 4, 2, wbit, rng.uniform());
            const int partner = model.unit_of(p->edge.second, o);
            row[unit] = static_cast<std::int8_t>(sign_of_bit(cell >> 1 & 1));
            row[partner] = static_cast<std::int8_t>(sign_of_bit(cell & 1));
          } else if (!phi_second[unit]) {
            const int z = draw(truth.mu[unit], 2, 2, wbit, rng.uniform());
            row[unit] = static_cast<std::int8_t>(sign_of_bit(z));
          }
          if (rng.uniform() < truth.abstain[unit]) row[unit] = 0;
        }
      }
    }
  };
  // Edge partners are written by the lower-index source before their own
  // abstention draw; sources are processed in index order within a row.
  if (threads == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < threads; ++w) pool.emplace_back(work, w);
    for (auto& t : pool) t.join();
  }
  return data;
}

LabelModelParams oracle_params(const ModelSpec& model, const VoteTensor& votes, std::span<const Config> latent) {
  if (static_cast<std::int64_t>(latent.size()) != votes.sequences())
    throw InvalidSpec("latent labels and votes differ in length");
  const auto& layout = model.layout();
  const auto& units = model.units();
  const std::int64_t n = votes.sequences();
  LabelModelParams params;
  params.diagnostics.method = "oracle";
  std::vector<std::string> missing;

  for (std::size_t s = 0; s < model.slots().size(); ++s) {
    const auto& slot = model.slots()[s];
    std::array<double, 4> c{};
    double zeros = 0;
    for (int u : slot.units)
      for (std::int64_t i = 0; i < n; ++i) {
        const int z = votes.unit_vote(i, u);
        if (z == 0) {
          ++zeros;
          continue;
        }
        c[mu_index(z, layout.positive(units[u].task, latent[i]) ? 1 : -1)] += 1;
      }
    MuEntry entry{slot.tie_group, slot.offset, {}, 0.0};
    for (int w = 0; w < 2; ++w) {
      const double col = c[w] + c[2 + w];
      if (col == 0) {
        missing.push_back("mu '" + slot.tie_group + "' offset " + std::to_string(slot.offset + 1) + (w ? " y=-1" : " y=+1"));
        continue;
      }
      entry.vote[w] = c[w] / col;
      entry.vote[2 + w] = c[2 + w] / col;
    }
    const double cells = static_cast<double>(n) * static_cast<double>(slot.units.size());
    entry.abstain = cells > 0 ? zeros / cells : 0.0;
    params.mu.push_back(entry);
  }

  for (auto [j, k] : model.edges()) {
    if (model.edge_partner(j) != k) continue;
    for (int o = 0; o < model.sources()[j].size(); ++o) {
      const int uj = model.unit_of(j, o), uk = model.unit_of(k, o);
      std::array<double, 8> c{};
      double both = 0;
      for (std::int64_t i = 0; i < n; ++i) {
        const int z1 = votes.unit_vote(i, uj), z2 = votes.unit_vote(i, uk);
        if (z1 == 0 || z2 == 0) continue;
        ++both;
        c[phi_index(z1, z2, layout.positive(units[uj].task, latent[i]) ? 1 : -1)] += 1;
      }
      PhiEntry entry;
      entry.edge = {j, k};
      entry.offset = o;
      entry.both_vote = n > 0 ? both / static_cast<double>(n) : 0.0;
      for (int w = 0; w < 2; ++w) {
        double col = 0;
        for (int z = 0; z < 4; ++z) col += c[2 * z + w];
        if (col == 0) {
          missing.push_back("phi (" + std::to_string(j + 1) + "," + std::to_string(k + 1) + ") offset " +
                            std::to_string(o + 1) + (w ? " y=-1" : " y=+1"));
          continue;
        }
        for (int z = 0; z < 4; ++z) entry.vote[2 * z + w] = c[2 * z + w] / col;
      }
      params.phi.push_back(entry);
    }
  }

  for (int j = 0; j < model.source_count(); ++j) {
    if (!model.uses_joint(j)) continue;
    const auto& src = model.sources()[j];
    const int s = src.size();
    const std::size_t S = std::size_t{1} << s;
    const auto us = model.units_of(j);
    JointEntry entry;
    entry.source = j;
    entry.width = s;
    entry.vote.assign(S * S, 0.0);
    std::vector<double> votes_per(s, 0.0);
    for (std::int64_t i = 0; i < n; ++i) {
      std::size_t z = 0, w = 0;
      bool all = true;
      for (int o = 0; o < s; ++o) {
        const int v = votes.unit_vote(i, us[o]);
        if (v != 0) votes_per[o] += 1;
        all = all && v != 0;
        if (v < 0) z |= std::size_t{1} << o;
        if (!layout.positive(src.coverage[o], latent[i])) w |= std::size_t{1} << o;
      }
      if (all) entry.vote[z * S + w] += 1;
    }
    for (std::size_t w = 0; w < S; ++w) {
      double col = 0;
      for (std::size_t z = 0; z < S; ++z) col += entry.vote[z * S + w];
      if (col == 0) {
        missing.push_back("joint source " + std::to_string(j + 1) + " column " + std::to_string(w));
        continue;
      }
      for (std::size_t z = 0; z < S; ++z) entry.vote[z * S + w] /= col;
    }
    for (int o = 0; o < s; ++o) entry.abstain.push_back(n > 0 ? 1.0 - votes_per[o] / static_cast<double>(n) : 0.0);
    params.joint.push_back(entry);
  }

  if (!missing.empty()) {
    std::string detail = "no labeled support for";
    for (const auto& m : missing) detail += " [" + m + "]";
    throw InsufficientData(detail);
  }
  return params;
}

LabelModelParams truth_params(const ModelSpec& model, const Truth& truth) {
  check_truth(model, truth);
  LabelModelParams params;
  params.diagnostics.method = "truth";
  for (const auto& slot : model.slots()) {
    const int first = slot.units.front();
    for (int u : slot.units) {
      for (int i = 0; i < 4; ++i)
        if (std::abs(truth.mu[u][i] - truth.mu[first][i]) > 1e-12)
          throw InvalidSpec("truth is not tied within '" + slot.tie_group + "'");
      if (std::abs(truth.abstain[u] - truth.abstain[first]) > 1e-12)
        throw InvalidSpec("true abstain rates are not tied within '" + slot.tie_group + "'");
    }
    params.mu.push_back({slot.tie_group, slot.offset, truth.mu[first], truth.abstain[first]});
  }
  for (auto [j, k] : model.edges()) {
    if (model.edge_partner(j) != k) continue;
    for (int o = 0; o < model.sources()[j].size(); ++o) {
      const int uj = model.unit_of(j, o), uk = model.unit_of(k, o);
      PhiEntry entry;
      entry.edge = {j, k};
      entry.offset = o;
      entry.both_vote = (1.0 - truth.abstain[uj]) * (1.0 - truth.abstain[uk]);
      entry.vote = independence_phi(truth.mu[uj], truth.mu[uk]);
      for (const auto& p : truth.phi)
        if (p.edge == entry.edge && p.offset == o) entry.vote = p.vote;
      params.phi.push_back(entry);
    }
  }
  for (const auto& j : truth.joint) {
    JointEntry entry = j;
    entry.abstain.clear();
    for (int u : model.units_of(j.source)) entry.abstain.push_back(truth.abstain[u]);
    params.joint.push_back(entry);
  }
  return params;
}

ProductStats population_stats(const ModelSpec& model, const Truth& truth, std::span<const MomentKey> keys) {
  check_truth(model, truth);
  const auto& layout = model.layout();
  const auto& units = model.units();
  std::vector<const PhiEntry*> phi_of(units.size(), nullptr);
  for (const auto& p : truth.phi) {
    phi_of[model.unit_of(p.edge.first, p.offset)] = &p;
    phi_of[model.unit_of(p.edge.second, p.offset)] = &p;
  }
  std::vector<const JointEntry*> joint(model.source_count(), nullptr);
  for (const auto& j : truth.joint) joint[j.source] = &j;

  std::vector<std::uint64_t> labels(layout.config_count());
  for (Config y = 0; y < layout.config_count(); ++y) labels[y] = layout.task_labels(y);

  ProductStats stats;
  stats.n = 1.0;
  for (const auto& key : keys) {
    double count = 1.0;
    for (int u : key) count *= 1.0 - truth.abstain.at(u);
    double sum = 0.0;
    for (Config y = 0; y < layout.config_count(); ++y) {
      const double py = model.prior()(y);
      if (py == 0.0) continue;
      auto wsign = [&](int task) { return (labels[y] >> task & 1) ? 1 : -1; };
      double value = 1.0;
      std::vector<char> done(key.size(), 0);
      for (std::size_t a = 0; a < key.size() && value != 0.0; ++a) {
        if (done[a]) continue;
        const int u = key[a];
        const auto& unit = units[u];
        if (const JointEntry* jt = joint[unit.source]) {
          std::size_t L = 0;
          for (std::size_t b = a; b < key.size(); ++b)
            if (units[key[b]].source == unit.source) {
              L |= std::size_t{1} << units[key[b]].offset;
              done[b] = 1;
            }
          const std::size_t S = std::size_t{1} << jt->width;
          std::size_t w = 0;
          for (int o = 0; o < jt->width; ++o)
            if (wsign(model.sources()[unit.source].coverage[o]) < 0) w |= std::size_t{1} << o;
          double e = 0.0;
          for (std::size_t z = 0; z < S; ++z) e += jt->vote[z * S + w] * ((std::popcount(z & L) & 1) ? -1.0 : 1.0);
          value *= e;
          continue;
        }
        done[a] = 1;
        const int wb = wsign(unit.task);
        if (const PhiEntry* p = phi_of[u]) {
          const int other = model.unit_of(unit.source == p->edge.first ? p->edge.second : p->edge.first, unit.offset);
          auto it = std::find(key.begin() + a + 1, key.end(), other);
          if (it != key.end()) {
            done[it - key.begin()] = 1;
            double e = 0.0;
            for (int z1 : {1, -1})
              for (int z2 : {1, -1}) e += z1 * z2 * p->vote[phi_index(z1, z2, wb)];
            value *= e;
            continue;
          }
        }
        const auto& m = truth.mu[u];
        value *= m[mu_index(1, wb)] - m[mu_index(-1, wb)];
      }
      sum += py * value;
    }
    stats.moments[key] = {sum * count, count};
  }
  return stats;
}

ScalingSummary scaling_experiment(const ModelSpec& model, const Truth& truth, std::span<const std::int64_t> n_grid,
                                  std::span<const std::uint64_t> seeds, bool tying, int threads) {
  for (std::size_t i = 1; i < n_grid.size(); ++i)
    if (n_grid[i] <= n_grid[i - 1]) throw InvalidSpec("n grid must be increasing");
  const ModelSpec fitted = tying ? model : model.untied();
  const auto target = truth_params(fitted, truth);

  ScalingSummary out;
  out.n_grid.assign(n_grid.begin(), n_grid.end());
  const int G = static_cast<int>(n_grid.size()), R = static_cast<int>(seeds.size());
  out.rows.resize(static_cast<std::size_t>(G) * R);
  parallel_for(G * R, threads, [&](int job) {
    const int g = job / R, r = job % R;
    ScalingRow row{n_grid[g], seeds[r], tying, std::numeric_limits<double>::quiet_NaN()};
    const auto data = generate({&model, &truth, n_grid[g], stream_seed(seeds[r], static_cast<std::uint64_t>(n_grid[g]), 0x5ca1e)});
    try {
      const auto fit = fit_closed_form(fitted, data.votes, 1);
      row.error = mu_error_l2(fitted, fit, target);
    } catch (const Error&) {
    }
    out.rows[job] = row;
  });

  std::vector<double> xs, ys;
  for (int g = 0; g < G; ++g) {
    double sum = 0.0, sq = 0.0;
    int count = 0;
    for (int r = 0; r < R; ++r) {
      const double e = out.rows[g * R + r].error;
      if (!std::isfinite(e)) continue;
      sum += e;
      sq += e * e;
      ++count;
    }
    const double mean = count ? sum / count : std::numeric_limits<double>::quiet_NaN();
    const double var = count > 1 ? (sq - count * mean * mean) / (count - 1) : 0.0;
    out.mean_error.push_back(mean);
    out.std_error.push_back(std::sqrt(std::max(0.0, var)));
    if (std::isfinite(mean) && mean > 0) {
      xs.push_back(std::log(static_cast<double>(n_grid[g])));
      ys.push_back(std::log(mean));
    }
  }
  if (xs.size() >= 2) {
    const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
    const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / ys.size();
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      sxy += (xs[i] - mx) * (ys[i] - my);
      sxx += (xs[i] - mx) * (xs[i] - mx);
    }
    out.slope = sxy / sxx;
  }
  return out;
}

std::vector<BenefitRow> sequential_benefit_experiment(const ModelSpec& model, const Truth& truth, std::int64_t n,
                                                      std::span<const std::uint64_t> seeds, int threads) {
  if (model.edges().empty()) throw InvalidSpec("sequential benefit needs at least one correlation edge");
  const ModelSpec naive = model.without_edges();
  std::vector<BenefitRow> rows(seeds.size());
  parallel_for(static_cast<int>(seeds.size()), threads, [&](int r) {
    const auto data = generate({&model, &truth, n, seeds[r]});
    const auto gold = gold_labels(model, data.latent, 0);
    auto f1 = [&](const LabelTable& t) { return evaluate(t, gold).f1.value_or(0.0); };
    BenefitRow row{seeds[r], 0.0, 0.0, 0.0};
    try {
      row.modeled = f1(emit_labels(model, fit_closed_form(model, data.votes), data.votes, 0));
    } catch (const Error&) {
    }
    try {
      row.ignored = f1(emit_labels(naive, fit_closed_form(naive, data.votes), data.votes, 0));
    } catch (const Error&) {
    }
    row.majority = f1(majority_vote(model, data.votes, 0).labels);
    rows[r] = row;
  });
  return rows;
}

MuTable symmetric_mu(double a) {
  const double p = 0.5 * (1.0 + a);
  return {p, 1.0 - p, 1.0 - p, p};
}

PhiTable correlated_phi(const MuTable& a, const MuTable& b, double rho) {
  PhiTable out = independence_phi(a, b);
  for (int w = 0; w < 2; ++w) {
    // comonotone coupling of the two marginals
    const double pa = a[w], pb = b[w];
    const double pp = std::min(pa, pb);
    const double cells[4] = {pp, pa - pp, pb - pp, 1.0 - pa - pb + pp};
    for (int z = 0; z < 4; ++z) out[2 * z + w] = (1.0 - rho) * out[2 * z + w] + rho * cells[z];
  }
  return out;
}

namespace {

Prior markov_prior(int T, double p_first, double stay) {
  std::vector<double> table(std::size_t{1} << T);
  for (Config y = 0; y < table.size(); ++y) {
    double p = (y & 1) ? p_first : 1.0 - p_first;
    for (int i = 1; i < T; ++i) p *= ((y >> i & 1) == (y >> (i - 1) & 1)) ? stay : 1.0 - stay;
    table[y] = p;
  }
  return Prior::user(std::move(table));
}

Prior iid_prior(int T, double p) {
  std::vector<double> table(std::size_t{1} << T);
  for (Config y = 0; y < table.size(); ++y) {
    double q = 1.0;
    for (int i = 0; i < T; ++i) q *= (y >> i & 1) ? p : 1.0 - p;
    table[y] = q;
  }
  return Prior::user(std::move(table));
}

}  // namespace

Instance chain_instance() {
  const int T = 4;
  TaskLayout layout(T, {{1, {0, 1}}, {1, {1, 2}}, {1, {2, 3}}, {2, {0, 1, 2, 3}}});
  std::vector<SourceSpec> sources;
  for (int t = 0; t < T; ++t)
    for (int c = 0; c < 3; ++c) sources.push_back({0, {t}, "frame"});
  for (int w = 0; w < 3; ++w) sources.push_back({1, {4, 5, 6}, "window"});
  for (int s = 0; s < 3; ++s) sources.push_back({2, {7}, "scene"});
  std::vector<Edge> edges{{0, 1}, {6, 7}};
  ModelSpec model(layout, sources, edges, markov_prior(T, 0.35, 0.75));

  Truth truth;
  const double window_acc[3] = {0.7, 0.5, 0.6};
  for (const auto& u : model.units()) {
    const auto& group = model.sources()[u.source].tie_group;
    if (group == "frame") {
      truth.mu.push_back(symmetric_mu(0.6));
      truth.abstain.push_back(0.2);
    } else if (group == "window") {
      truth.mu.push_back(symmetric_mu(window_acc[u.offset]));
      truth.abstain.push_back(0.3);
    } else {
      truth.mu.push_back(symmetric_mu(0.65));
      truth.abstain.push_back(0.1);
    }
  }
  for (auto [j, k] : model.edges()) {
    PhiEntry p;
    p.edge = {j, k};
    p.offset = 0;
    p.vote = correlated_phi(truth.mu[model.unit_of(j, 0)], truth.mu[model.unit_of(k, 0)], 0.3);
    truth.phi.push_back(p);
  }
  return {std::move(model), std::move(truth)};
}

Instance duplication_instance() {
  const int T = 4;
  TaskLayout layout(T, {{1, {0, 1, 2, 3}}});
  std::vector<SourceSpec> sources;
  std::vector<Edge> edges;
  for (int t = 0; t < T; ++t) {
    const int base = static_cast<int>(sources.size());
    sources.push_back({0, {t}, "good"});
    sources.push_back({0, {t}, "weak1"});
    sources.push_back({0, {t}, "weak2"});
    sources.push_back({0, {t}, "dup1"});
    sources.push_back({0, {t}, "dup2"});
    edges.push_back({base + 3, base + 4});
  }
  ModelSpec model(layout, sources, edges, iid_prior(T, 0.4));

  Truth truth;
  for (const auto& u : model.units()) {
    const auto& group = model.sources()[u.source].tie_group;
    if (group == "good") {
      truth.mu.push_back(symmetric_mu(0.9));
      truth.abstain.push_back(0.1);
    } else if (group == "dup1" || group == "dup2") {
      truth.mu.push_back(symmetric_mu(0.4));
      truth.abstain.push_back(0.1);
    } else {
      truth.mu.push_back(symmetric_mu(0.3));
      truth.abstain.push_back(0.2);
    }
  }
  for (auto [j, k] : model.edges()) {
    PhiEntry p;
    p.edge = {j, k};
    p.vote = correlated_phi(truth.mu[model.unit_of(j, 0)], truth.mu[model.unit_of(k, 0)], 0.5);
    truth.phi.push_back(p);
  }
  return {std::move(model), std::move(truth)};
}

namespace {

std::optional<Instance> try_random_instance(std::mt19937_64& rng, const RandomOptions& opts) {
  auto uni = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };

  const int T = pick(1, opts.max_T);
  std::vector<CoarseTask> coarse;
  int level = 1;
  if (T >= 2 && pick(0, 1)) {
    const int windows = pick(1, std::min(3, T - 1));
    for (int w = 0; w < windows; ++w) {
      const int len = pick(2, T);
      const int start = pick(0, T - len);
      std::vector<int> children(len);
      std::iota(children.begin(), children.end(), start);
      coarse.push_back({level, children});
    }
    ++level;
  }
  if (T >= 2 && pick(0, 1)) {
    std::vector<int> all(T);
    std::iota(all.begin(), all.end(), 0);
    coarse.push_back({level, all});
  }
  const auto rule = pick(0, 3) == 0 ? AggregationRule::AllPositive : AggregationRule::AnyPositive;
  TaskLayout layout(T, coarse, rule);

  std::vector<double> table(std::size_t{1} << T);
  for (double& p : table) p = uni(0.2, 1.0);
  const double total = std::accumulate(table.begin(), table.end(), 0.0);
  for (double& p : table) p /= total;

  const int m = pick(3, opts.max_sources);
  std::vector<SourceSpec> sources;
  std::vector<Edge> edges;
  std::vector<std::vector<double>> acc;  // per source per offset, for tied copies
  std::map<std::string, int> group_owner;
  while (static_cast<int>(sources.size()) < m) {
    const int j = static_cast<int>(sources.size());
    const int choice = pick(0, 5);
    if (j > 0 && choice == 0) {  // tied copy of an earlier source
      const int k = pick(0, j - 1);
      sources.push_back({sources[k].resolution, sources[k].coverage, sources[k].tie_group});
      acc.push_back(acc[k]);
      continue;
    }
    if (opts.edges && j > 0 && choice == 1 && static_cast<int>(sources.size()) + 1 <= m) {  // correlated twin
      const int k = pick(0, j - 1);
      bool free = true;
      for (auto [a, b] : edges) free = free && a != k && b != k;
      if (free) {
        sources.push_back({sources[k].resolution, sources[k].coverage, "t" + std::to_string(j)});
        std::vector<double> a;
        for (std::size_t o = 0; o < sources[k].coverage.size(); ++o) a.push_back(uni(0.3, 0.9));
        acc.push_back(a);
        edges.push_back({k, j});
        continue;
      }
    }
    const int r = pick(0, layout.resolution_count() - 1);
    auto tasks = layout.tasks_at(r);
    std::shuffle(tasks.begin(), tasks.end(), rng);
    const int s = pick(1, std::min<int>(3, static_cast<int>(tasks.size())));
    tasks.resize(s);
    sources.push_back({r, tasks, "g" + std::to_string(j)});
    std::vector<double> a;
    for (int o = 0; o < s; ++o) a.push_back(uni(0.3, 0.9));
    acc.push_back(a);
  }

  ModelOptions options;
  options.full_joint = opts.joint;
  ModelSpec model(layout, sources, edges, Prior::user(table), options);
  if (!validate_model(model).ok) return std::nullopt;
  if (opts.joint) {
    bool any = false;
    for (int j = 0; j < model.source_count(); ++j) any = any || model.uses_joint(j);
    if (!any) return std::nullopt;
  }

  Truth truth;
  std::map<std::string, double> group_abstain;
  for (const auto& s : model.sources())
    if (!group_abstain.count(s.tie_group)) group_abstain[s.tie_group] = uni(0.0, 0.4);
  for (const auto& u : model.units()) {
    truth.mu.push_back(symmetric_mu(acc[u.source][u.offset]));
    truth.abstain.push_back(group_abstain[model.sources()[u.source].tie_group]);
  }
  for (auto [j, k] : model.edges()) {
    for (int o = 0; o < model.sources()[j].size(); ++o) {
      if (phi_partners(model, j, k, o).empty()) return std::nullopt;
      PhiEntry p;
      p.edge = {j, k};
      p.offset = o;
      p.vote = correlated_phi(truth.mu[model.unit_of(j, o)], truth.mu[model.unit_of(k, o)], uni(0.1, 0.8));
      truth.phi.push_back(p);
    }
  }
  for (int j = 0; j < model.source_count(); ++j) {
    if (!model.uses_joint(j)) continue;
    const int s = model.sources()[j].size();
    const std::size_t S = std::size_t{1} << s;
    // Fourier form: symmetric singleton terms, free higher-order terms.
    JointEntry entry;
    entry.source = j;
    entry.width = s;
    entry.vote.assign(S * S, 0.0);
    for (int u : model.units_of(j)) entry.abstain.push_back(truth.abstain[u]);
    for (int attempt = 0; attempt < 50; ++attempt) {
      std::vector<double> beta(S * S, 0.0);  // [L * S + w]
      const double scale = 0.3 / (attempt + 1);
      for (std::size_t L = 0; L < S; ++L)
        for (std::size_t w = 0; w < S; ++w) {
          if (L == 0) beta[w] = 1.0;
          else if (std::popcount(L) == 1) {
            const int o = std::countr_zero(L);
            beta[L * S + w] = acc[j][o] * ((w >> o & 1) ? -1.0 : 1.0);
          } else {
            beta[L * S + w] = uni(-scale, scale);
          }
        }
      bool ok = true;
      for (std::size_t z = 0; z < S && ok; ++z)
        for (std::size_t w = 0; w < S; ++w) {
          double p = 0.0;
          for (std::size_t L = 0; L < S; ++L) p += beta[L * S + w] * ((std::popcount(z & L) & 1) ? -1.0 : 1.0);
          p /= static_cast<double>(S);
          entry.vote[z * S + w] = p;
          ok = ok && p > 0.005;
        }
      if (ok) break;
      if (attempt == 49) return std::nullopt;
    }
    truth.joint.push_back(entry);
  }
  return Instance{std::move(model), std::move(truth)};
}

}  // namespace

Instance random_instance(std::uint64_t seed, const RandomOptions& opts) {
  std::mt19937_64 rng(seed);
  for (int attempt = 0; attempt < 10000; ++attempt)
    if (auto inst = try_random_instance(rng, opts)) return std::move(*inst);
  throw InvalidSpec("could not draw a valid random model");
}

}  // namespace seqlabel
