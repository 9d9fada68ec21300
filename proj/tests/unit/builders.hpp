#pragma once

// Small hand-built models shared by the unit tests.

#include <string>
#include <vector>

#include "seqlabel/model.hpp"
#include "seqlabel/synth.hpp"

namespace build {

using namespace seqlabel;

// m sources on a single element task, each in its own tie group.
inline ModelSpec single_task(int m, std::vector<Edge> edges = {}, double p_positive = 0.5) {
  std::vector<SourceSpec> sources;
  for (int j = 0; j < m; ++j) sources.push_back({0, {0}, ""});
  return ModelSpec(TaskLayout(1), sources, std::move(edges), Prior::user({1.0 - p_positive, p_positive}));
}

inline Truth symmetric_truth(const ModelSpec& model, const std::vector<double>& acc, double abstain = 0.0) {
  Truth t;
  for (const auto& u : model.units()) {
    t.mu.push_back(symmetric_mu(acc.at(u.source)));
    t.abstain.push_back(abstain);
  }
  return t;
}

}  // namespace build
