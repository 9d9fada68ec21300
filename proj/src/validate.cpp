#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "seqlabel/model.hpp"

namespace seqlabel {

std::string ValidationReport::summary() const {
  std::ostringstream out;
  out << (ok ? "ok" : "failed") << '\n';
  for (const auto& i : issues) out << "  [" << i.assumption << "] " << i.detail << '\n';
  for (const auto& t : triplets) out << "  " << t << '\n';
  return out.str();
}

namespace {

std::string source_name(int j) { return "source " + std::to_string(j + 1); }

void check_prior(const ModelSpec& model, ValidationReport& report) {
  const auto& prior = model.prior();
  const double total = prior.total();
  if (std::abs(total - 1.0) > 1e-12)
    report.fail("prior normalization", "prior sums to " + std::to_string(total));
  if (!(prior.p_min() > 0.0))
    report.fail("p_min > 0", "prior has a zero entry (p_min = 0) and smoothing is disabled");
}

void check_sources(const ModelSpec& model, ValidationReport& report) {
  const auto& layout = model.layout();
  std::map<std::string, int> first;
  for (int j = 0; j < model.source_count(); ++j) {
    const auto& s = model.sources()[j];
    for (int t : s.coverage)
      if (layout.resolution_of(t) != s.resolution)
        report.fail("single-resolution coverage", source_name(j) + " covers task " + std::to_string(t + 1) +
                                                      " outside resolution " + std::to_string(s.resolution + 1));
    auto [it, fresh] = first.emplace(s.tie_group, j);
    if (fresh) continue;
    const auto& ref = model.sources()[it->second];
    if (ref.size() != s.size() || ref.resolution != s.resolution)
      report.fail("tie-group consistency", "tie group '" + s.tie_group + "' mixes " + source_name(it->second) +
                                               " (s=" + std::to_string(ref.size()) + ") and " + source_name(j) +
                                               " (s=" + std::to_string(s.size()) + ")");
  }
}

void check_edges(const ModelSpec& model, ValidationReport& report) {
  std::vector<int> degree(model.source_count(), 0);
  for (auto [a, b] : model.edges()) {
    ++degree[a];
    ++degree[b];
    if (model.sources()[a].coverage != model.sources()[b].coverage)
      report.fail("edge coverage", "edge (" + std::to_string(a + 1) + "," + std::to_string(b + 1) +
                                       ") joins sources with different coverage");
  }
  for (int j = 0; j < model.source_count(); ++j)
    if (degree[j] > 1)
      report.fail("matching", source_name(j) + " appears in " + std::to_string(degree[j]) +
                                  " source edges; merge correlated sources upstream");
}

void check_triplets(const ModelSpec& model, ValidationReport& report) {
  const int slots = static_cast<int>(model.slots().size());
  std::vector<std::vector<char>> linked(slots, std::vector<char>(slots, 0));
  for (int a = 0; a < slots; ++a)
    for (int b = a; b < slots; ++b) linked[a][b] = linked[b][a] = slots_linked(model, a, b);
  auto link = [&](int a, int b) { return linked[a][b] != 0; };

  for (int s = 0; s < slots; ++s) {
    const auto group = triplet_group(model, s, link);
    if (!full_column_rank(group)) {
      const auto& slot = model.slots()[s];
      report.fail("triplet availability", "tie group '" + slot.tie_group + "' offset " + std::to_string(slot.offset + 1) +
                                              " lacks at least two other independent accuracies");
    }
  }

  for (const auto& u : model.units()) {
    std::ostringstream line;
    line << source_name(u.source) << " task " << u.task + 1 << ": ";
    const int U[1] = {u.offset};
    const int V[1] = {u.task};
    try {
      const auto partners = find_independent_partners(model, u.source, U, V);
      line << "partners";
      for (const auto& p : partners) line << ' ' << p.source + 1;
    } catch (const AssumptionViolation&) {
      line << "fewer than two direct partners";
    }
    if (auto k = model.edge_partner(u.source); k && *k > u.source) {
      int shared = 0;
      for (const auto& f : model.units())
        if (f.task == u.task && f.source != u.source && f.source != *k && !model.graph().adjacent(f.source, u.source) &&
            !model.graph().adjacent(f.source, *k))
          ++shared;
      line << "; edge with " << *k + 1 << ": " << shared << " same-task partners";
      if (shared == 0) line << " (correlation falls back to independence)";
    }
    report.triplets.push_back(line.str());
  }
}

}  // namespace

ValidationReport validate_model(const ModelSpec& model) {
  ValidationReport report;
  check_prior(model, report);
  check_sources(model, report);
  check_edges(model, report);
  check_triplets(model, report);
  return report;
}

}  // namespace seqlabel
