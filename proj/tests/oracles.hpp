#pragma once

// Independent reference implementations used by the tests. Each one works
// from definitions by direct enumeration and shares no code path with the
// library routine it checks.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "seqlabel/model.hpp"
#include "seqlabel/params.hpp"

namespace oracle {

using seqlabel::Config;

// Label of any task under y, from the children lists.
inline bool task_label(const seqlabel::TaskLayout& layout, int task, Config y) {
  if (task < layout.sequence_length()) return (y >> task) & 1;
  const auto& ch = layout.children_of(task);
  if (layout.rule() == seqlabel::AggregationRule::AnyPositive)
    return std::any_of(ch.begin(), ch.end(), [&](int c) { return (y >> c) & 1; });
  return std::all_of(ch.begin(), ch.end(), [&](int c) { return (y >> c) & 1; });
}

// r_S = P(prod_{i in S} d_i = +1) for every subset S (bit i <=> d_{i+1}),
// enumerated from a joint over {-1,+1}^t indexed by the -1 positions.
inline std::vector<double> product_moments(const std::vector<double>& joint, int t) {
  const std::size_t N = std::size_t{1} << t;
  std::vector<double> r(N, 0.0);
  for (std::size_t S = 0; S < N; ++S)
    for (std::size_t z = 0; z < N; ++z) {
      int prod = 1;
      for (int i = 0; i < t; ++i)
        if ((S >> i & 1) && (z >> i & 1)) prod = -prod;
      if (prod == 1) r[S] += joint[z];
    }
  return r;
}

inline std::vector<double> random_distribution(std::mt19937_64& rng, std::size_t size) {
  std::gamma_distribution<double> g(0.7, 1.0);
  std::vector<double> p(size);
  double total = 0.0;
  for (auto& v : p) total += v = g(rng) + 1e-300;
  for (auto& v : p) v /= total;
  return p;
}

inline double smoothed(double p) { return std::max(p, 1e-9); }

// P(y | votes) over the element configurations from the unnormalized joint
// probability, in the probability domain.
inline std::vector<double> posterior_configs(const seqlabel::ModelSpec& model, const seqlabel::LabelModelParams& params,
                                             const std::vector<std::int8_t>& row) {
  const auto& layout = model.layout();
  std::vector<double> weight(layout.config_count(), 0.0);
  for (Config y = 0; y < layout.config_count(); ++y) {
    auto w_of = [&](int task) { return task_label(layout, task, y) ? 1 : -1; };
    double p = model.prior()(y);
    for (int j = 0; j < model.source_count(); ++j) {
      const auto& src = model.sources()[j];
      const auto units = model.units_of(j);
      if (const auto* je = params.joint_of(j)) {
        const int s = je->width;
        const std::size_t S = std::size_t{1} << s;
        std::size_t wbits = 0, fixed = 0, zbits = 0;
        for (int o = 0; o < s; ++o) {
          if (w_of(src.coverage[o]) < 0) wbits |= std::size_t{1} << o;
          const int z = row[units[o]];
          if (z != 0) fixed |= std::size_t{1} << o;
          if (z < 0) zbits |= std::size_t{1} << o;
        }
        if (!fixed) continue;
        double mass = 0.0;
        for (std::size_t z = 0; z < S; ++z)
          if ((z & fixed) == zbits) mass += je->vote[z * S + wbits];
        double rate = 1.0;
        for (int o = 0; o < s; ++o) rate *= (fixed >> o & 1) ? 1.0 - je->abstain[o] : je->abstain[o];
        p *= smoothed(rate * mass);
        continue;
      }
      const auto partner = model.edge_partner(j);
      for (int o = 0; o < src.size(); ++o) {
        const int u = units[o];
        const int z = row[u];
        const int w = w_of(src.coverage[o]);
        const auto& mu = params.mu_of_unit(model, u);
        if (partner) {
          const int v = model.unit_of(*partner, o);
          const int z2 = row[v];
          if (z != 0 && z2 != 0) {
            if (j > *partner) continue;
            const auto* phi = params.phi_of(j, o);
            const double cond = phi->vote[seqlabel::phi_index(z, z2, w)];
            p *= smoothed(phi->both_vote * cond);
            continue;
          }
        }
        if (z == 0) {
          p *= mu.abstain;
        } else {
          p *= smoothed((1.0 - mu.abstain) * mu.vote[seqlabel::mu_index(z, w)]);
        }
      }
    }
    weight[y] = p;
  }
  double total = 0.0;
  for (double w : weight) total += w;
  for (double& w : weight) w /= total;
  return weight;
}

inline std::vector<double> posterior_marginals(const seqlabel::ModelSpec& model, const seqlabel::LabelModelParams& params,
                                               const std::vector<std::int8_t>& row) {
  const auto& layout = model.layout();
  const auto config = posterior_configs(model, params, row);
  std::vector<double> marg(layout.task_count(), 0.0);
  for (Config y = 0; y < layout.config_count(); ++y)
    for (int t = 0; t < layout.task_count(); ++t)
      if (task_label(layout, t, y)) marg[t] += config[y];
  return marg;
}

}  // namespace oracle
