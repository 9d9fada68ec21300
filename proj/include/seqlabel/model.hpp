#pragma once

#include <array>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "seqlabel/core.hpp"

namespace seqlabel {

// Pairs of tasks whose labels are less correlated than this under the prior
// carry too little signal to link two agreement terms.
inline constexpr double kCorrelationFloor = 0.1;

struct ModelOptions {
  bool tie_positions = false;  // one table per tie group instead of per offset
  bool full_joint = false;     // joint tables for untied sources with 2 <= s_j <= 3
  bool smooth_prior = true;
};

// One (source, covered task) cell: the reduced-form estimation unit.
struct Unit {
  int source = 0;
  int offset = 0;
  int task = 0;
  int slot = 0;
};

// A tied parameter table shared by all member units.
struct Slot {
  std::string tie_group;
  int offset = 0;
  int resolution = 0;
  std::vector<int> units;
};

class ModelSpec {
 public:
  ModelSpec() = default;
  ModelSpec(TaskLayout layout, std::vector<SourceSpec> sources, std::vector<Edge> edges, Prior prior,
            ModelOptions options = {});

  const TaskLayout& layout() const { return layout_; }
  const std::vector<SourceSpec>& sources() const { return sources_; }
  const DependencyGraph& graph() const { return graph_; }
  const Prior& prior() const { return prior_; }
  const ModelOptions& options() const { return options_; }
  const std::vector<Edge>& edges() const { return graph_.source_edges; }

  int source_count() const { return static_cast<int>(sources_.size()); }
  const std::vector<Unit>& units() const { return units_; }
  const std::vector<Slot>& slots() const { return slots_; }
  int unit_of(int source, int offset) const { return first_unit_[source] + offset; }
  std::vector<int> units_of(int source) const;
  std::vector<int> widths() const;

  std::optional<int> edge_partner(int source) const;
  bool uses_joint(int source) const;

  // Structural eligibility of a unit pair: different, non-adjacent sources.
  bool independent(int u, int v) const;
  // Independent and linked through the prior strongly enough to be used in
  // an agreement equation.
  bool informative(int u, int v) const;

  double prior_positive(int task) const { return task_positive_.at(task); }
  // E[y_a y_b] under the prior.
  double label_correlation(int a, int b) const;
  // P(y_a = w_a, y_b = w_b), ordered (+,+), (+,-), (-,+), (-,-).
  std::array<double, 4> label_joint(int a, int b) const;
  // E[prod_{t in tasks} y_t].
  double label_product(std::span<const int> tasks) const;
  // P(Y_tasks = W); bit i of positives set <=> tasks[i] is +1.
  double label_probability(std::span<const int> tasks, std::uint32_t positives) const;

  ModelSpec untied() const;
  ModelSpec without_edges() const;
  ModelSpec with_prior(Prior prior) const;

 private:
  void build();

  TaskLayout layout_;
  std::vector<SourceSpec> sources_;
  DependencyGraph graph_;
  Prior prior_;
  ModelOptions options_;

  std::vector<Unit> units_;
  std::vector<Slot> slots_;
  std::vector<int> first_unit_;
  std::vector<int> partner_;  // edge partner per source or -1
  std::vector<char> joint_;
  std::vector<double> task_positive_;
  std::map<Edge, std::array<double, 4>> pair_joint_;
};

struct Partner {
  int source = 0;
  std::vector<int> tasks;  // U_k
  bool operator==(const Partner&) const = default;
};

// All (k, U_k) whose agreement with Y(V) is conditionally independent of
// a_j(U, V), filtered to be pairwise independent. Throws AssumptionViolation
// when fewer than two remain.
std::vector<Partner> find_independent_partners(const ModelSpec& model, int source,
                                               std::span<const int> U, std::span<const int> V);

// Members and rows of the agreement system for one slot: the slot itself
// first, then every slot linked to it. Rows are linked pairs among members.
struct TripletGroup {
  std::vector<int> members;
  std::vector<Edge> rows;  // indices into members
};

TripletGroup triplet_group(const ModelSpec& model, int slot,
                           const std::function<bool(int, int)>& linked);
// Structural link: some unit pair across the two slots is informative.
bool slots_linked(const ModelSpec& model, int a, int b);
// A connected group has full column rank iff its pair graph has an odd cycle.
bool full_column_rank(const TripletGroup& group);

// Partner unit sets for the joint-form entry of `source` whose label part is
// the offsets in `offsets_mask`: one unit per offset, on that offset's task,
// from distinct sources independent of `source` and of each other.
inline constexpr std::size_t kMaxJointPartnerSets = 32;
std::vector<std::vector<int>> joint_partner_sets(const ModelSpec& model, int source,
                                                 std::uint32_t offsets_mask);

struct ValidationIssue {
  std::string assumption;
  std::string detail;
};

struct ValidationReport {
  bool ok = true;
  std::vector<ValidationIssue> issues;
  std::vector<std::string> triplets;  // one line per unit: partners found

  void fail(std::string assumption, std::string detail) {
    ok = false;
    issues.push_back({std::move(assumption), std::move(detail)});
  }
  bool flags(std::string_view assumption) const {
    for (const auto& i : issues)
      if (i.assumption == assumption) return true;
    return false;
  }
  std::string summary() const;
};

ValidationReport validate_model(const ModelSpec& model);

}  // namespace seqlabel
