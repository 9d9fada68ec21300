#pragma once

// Domain types: tasks at several resolutions, supervision sources, the
// dependency graph, the label prior and the vote tensor.

#include <array>
#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "seqlabel/errors.hpp"

namespace seqlabel {

inline constexpr int kMaxSequenceLength = 20;
inline constexpr int kMaxTasks = 64;
inline constexpr double kPriorEpsilon = 1e-6;

// Element label configuration: bit i set <=> y_i = +1.
using Config = std::uint32_t;

enum class AggregationRule { AnyPositive, AllPositive };

struct CoarseTask {
  int resolution = 1;         // 0-based level, >= 1
  std::vector<int> children;  // 0-based element indices, contiguous
};

// Tasks 0..T-1 are the element tasks (level 0); coarse tasks follow in
// declaration order. The label of a coarse task is a deterministic function
// of its children's labels.
class TaskLayout {
 public:
  TaskLayout() = default;
  explicit TaskLayout(int sequence_length, std::vector<CoarseTask> coarse = {},
                      AggregationRule rule = AggregationRule::AnyPositive);

  int sequence_length() const { return T_; }
  int task_count() const { return static_cast<int>(resolution_.size()); }
  int resolution_count() const { return static_cast<int>(by_level_.size()); }
  int resolution_of(int task) const { return resolution_.at(task); }
  const std::vector<int>& tasks_at(int level) const { return by_level_.at(level); }
  std::uint32_t elements_of(int task) const { return elements_.at(task); }
  const std::vector<int>& children_of(int task) const { return children_.at(task); }
  AggregationRule rule() const { return rule_; }
  bool is_element(int task) const { return task < T_; }
  std::size_t config_count() const { return std::size_t{1} << T_; }

  bool positive(int task, Config y) const {
    const std::uint32_t e = elements_[task];
    return rule_ == AggregationRule::AnyPositive ? (y & e) != 0 : (y & e) == e;
  }
  // Bit t set <=> task t is +1 under y.
  std::uint64_t task_labels(Config y) const;
  // Two tasks are related when they share at least one element.
  bool related(int a, int b) const { return (elements_[a] & elements_[b]) != 0; }

  bool operator==(const TaskLayout&) const = default;

 private:
  int T_ = 0;
  AggregationRule rule_ = AggregationRule::AnyPositive;
  std::vector<int> resolution_;
  std::vector<std::uint32_t> elements_;
  std::vector<std::vector<int>> children_;
  std::vector<std::vector<int>> by_level_;
};

struct SourceSpec {
  int resolution = 0;          // 0-based level
  std::vector<int> coverage;   // 0-based task ids, in vote order
  std::string tie_group;       // empty => own group

  int size() const { return static_cast<int>(coverage.size()); }
  bool operator==(const SourceSpec&) const = default;
};

using Edge = std::pair<int, int>;

// Node ids of the merged graph: sources [0, m), tasks [m, m + |T|).
struct DependencyGraph {
  int source_count = 0;
  int task_count = 0;
  std::vector<Edge> source_edges;  // normalized (j < k), sorted, unique
  std::vector<Edge> task_edges;    // normalized (a < b), sorted, unique
  std::set<Edge> merged;

  int source_node(int j) const { return j; }
  int task_node(int t) const { return source_count + t; }
  bool adjacent(int j, int k) const;
  bool operator==(const DependencyGraph&) const = default;
};

// Coarse-child relations of the layout as task-graph edges.
std::vector<Edge> task_graph(const TaskLayout& layout);

// Union of the task graph, the source graph and the lambda_j - y_i coverage
// edges. Throws StructuralError naming a dangling endpoint.
DependencyGraph merge_graphs(std::span<const Edge> task_edges, std::span<const Edge> source_edges,
                             std::span<const SourceSpec> sources, int task_count);

enum class PriorKind { Uniform, Empirical, User };

// Probability table over the 2^T element configurations.
class Prior {
 public:
  Prior() = default;

  static Prior uniform(int sequence_length);
  // Zero entries are raised to kPriorEpsilon and the table renormalized when
  // smooth is set. Negative entries throw InvalidSpec.
  static Prior user(std::vector<double> table, bool smooth = true, Diagnostics* diag = nullptr);
  // Configuration frequencies of labeled sequences, always smoothed.
  static Prior empirical(int sequence_length, std::span<const Config> labels,
                         Diagnostics* diag = nullptr);

  const std::vector<double>& table() const { return table_; }
  double operator()(Config y) const { return table_[y]; }
  double p_min() const { return p_min_; }
  PriorKind kind() const { return kind_; }
  bool smoothed() const { return smoothed_; }
  int sequence_length() const { return T_; }
  double total() const;

 private:
  Prior(PriorKind kind, std::vector<double> table, bool smooth, Diagnostics* diag);

  PriorKind kind_ = PriorKind::Uniform;
  std::vector<double> table_;
  double p_min_ = 0.0;
  bool smoothed_ = false;
  int T_ = 0;
};

// Votes in {-1, 0, +1}; 0 is an abstention. Row i holds every source's votes
// on sequence i, source j occupying [offset(j), offset(j) + width(j)).
class VoteTensor {
 public:
  VoteTensor() = default;
  VoteTensor(std::int64_t sequences, std::vector<int> widths);

  std::int64_t sequences() const { return n_; }
  int sources() const { return static_cast<int>(widths_.size()); }
  int width(int j) const { return widths_[j]; }
  int offset(int j) const { return offsets_[j]; }
  int units() const { return total_; }
  const std::vector<int>& widths() const { return widths_; }

  std::int8_t vote(std::int64_t i, int j, int o) const { return data_[i * total_ + offsets_[j] + o]; }
  std::int8_t unit_vote(std::int64_t i, int u) const { return data_[i * total_ + u]; }
  void set(std::int64_t i, int j, int o, int v);
  std::span<const std::int8_t> row(std::int64_t i) const {
    return {data_.data() + i * total_, static_cast<std::size_t>(total_)};
  }
  std::span<std::int8_t> mutable_row(std::int64_t i) {
    return {data_.data() + i * total_, static_cast<std::size_t>(total_)};
  }

  bool operator==(const VoteTensor&) const = default;

 private:
  std::int64_t n_ = 0;
  int total_ = 0;
  std::vector<int> widths_;
  std::vector<int> offsets_;
  std::vector<std::int8_t> data_;
};

}  // namespace seqlabel
