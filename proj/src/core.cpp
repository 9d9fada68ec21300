#include "seqlabel/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace seqlabel {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::Parse: return "E_PARSE";
    case ErrorCode::Validate: return "E_VALIDATE";
    case ErrorCode::Data: return "E_DATA";
    case ErrorCode::Numeric: return "E_NUMERIC";
  }
  return "E_NUMERIC";
}

TaskLayout::TaskLayout(int sequence_length, std::vector<CoarseTask> coarse, AggregationRule rule)
    : T_(sequence_length), rule_(rule) {
  if (T_ < 1 || T_ > kMaxSequenceLength)
    throw StructuralError("sequence length " + std::to_string(T_) + " outside [1, " +
                          std::to_string(kMaxSequenceLength) + "]");
  if (T_ + static_cast<int>(coarse.size()) > kMaxTasks)
    throw StructuralError("more than " + std::to_string(kMaxTasks) + " tasks");

  int max_level = 0;
  for (int i = 0; i < T_; ++i) {
    resolution_.push_back(0);
    elements_.push_back(std::uint32_t{1} << i);
    children_.push_back({});
  }
  for (std::size_t c = 0; c < coarse.size(); ++c) {
    auto& task = coarse[c];
    const std::string name = "coarse task " + std::to_string(T_ + c + 1);
    if (task.resolution < 1) throw StructuralError(name + " must sit above the element level");
    if (task.children.empty()) throw StructuralError(name + " has no children");
    std::sort(task.children.begin(), task.children.end());
    std::uint32_t mask = 0;
    for (std::size_t i = 0; i < task.children.size(); ++i) {
      const int e = task.children[i];
      if (e < 0 || e >= T_) throw StructuralError(name + " has non-element child " + std::to_string(e + 1));
      if (i > 0 && e != task.children[i - 1] + 1)
        throw StructuralError(name + " has a non-contiguous child set");
      mask |= std::uint32_t{1} << e;
    }
    resolution_.push_back(task.resolution);
    elements_.push_back(mask);
    children_.push_back(task.children);
    max_level = std::max(max_level, task.resolution);
  }
  by_level_.assign(max_level + 1, {});
  for (int t = 0; t < task_count(); ++t) by_level_[resolution_[t]].push_back(t);
  for (int r = 0; r <= max_level; ++r)
    if (by_level_[r].empty())
      throw StructuralError("resolution " + std::to_string(r + 1) + " has no tasks");
}

std::uint64_t TaskLayout::task_labels(Config y) const {
  std::uint64_t out = 0;
  for (int t = 0; t < task_count(); ++t)
    if (positive(t, y)) out |= std::uint64_t{1} << t;
  return out;
}

bool DependencyGraph::adjacent(int j, int k) const {
  const Edge e{std::min(j, k), std::max(j, k)};
  return std::binary_search(source_edges.begin(), source_edges.end(), e);
}

std::vector<Edge> task_graph(const TaskLayout& layout) {
  std::vector<Edge> edges;
  for (int t = layout.sequence_length(); t < layout.task_count(); ++t)
    for (int c : layout.children_of(t)) edges.emplace_back(c, t);
  std::sort(edges.begin(), edges.end());
  return edges;
}

namespace {

std::vector<Edge> normalized(std::span<const Edge> edges) {
  std::vector<Edge> out;
  for (auto [a, b] : edges) out.emplace_back(std::min(a, b), std::max(a, b));
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace

DependencyGraph merge_graphs(std::span<const Edge> task_edges, std::span<const Edge> source_edges,
                             std::span<const SourceSpec> sources, int task_count) {
  DependencyGraph g;
  g.source_count = static_cast<int>(sources.size());
  g.task_count = task_count;
  for (auto [a, b] : source_edges) {
    for (int end : {a, b})
      if (end < 0 || end >= g.source_count)
        throw StructuralError("source edge (" + std::to_string(a + 1) + "," + std::to_string(b + 1) +
                              ") references undeclared source " + std::to_string(end + 1));
    if (a == b) throw StructuralError("source edge (" + std::to_string(a + 1) + "," + std::to_string(b + 1) + ") is a self loop");
  }
  for (auto [a, b] : task_edges)
    for (int end : {a, b})
      if (end < 0 || end >= task_count)
        throw StructuralError("task edge references undeclared task " + std::to_string(end + 1));

  g.source_edges = normalized(source_edges);
  g.task_edges = normalized(task_edges);
  for (auto [a, b] : g.source_edges) g.merged.insert({g.source_node(a), g.source_node(b)});
  for (auto [a, b] : g.task_edges) g.merged.insert({g.task_node(a), g.task_node(b)});
  for (int j = 0; j < g.source_count; ++j)
    for (int t : sources[j].coverage) {
      if (t < 0 || t >= task_count)
        throw StructuralError("source " + std::to_string(j + 1) + " covers undeclared task " +
                              std::to_string(t + 1));
      g.merged.insert({g.source_node(j), g.task_node(t)});
    }
  return g;
}

Prior::Prior(PriorKind kind, std::vector<double> table, bool smooth, Diagnostics* diag)
    : kind_(kind), table_(std::move(table)) {
  const std::size_t size = table_.size();
  if (size == 0 || (size & (size - 1)) != 0)
    throw InvalidSpec("prior table size " + std::to_string(size) + " is not a power of two");
  T_ = static_cast<int>(std::log2(static_cast<double>(size)) + 0.5);
  if (T_ > kMaxSequenceLength) throw InvalidSpec("prior table too large");
  for (double p : table_)
    if (!(p >= 0.0) || !std::isfinite(p)) throw InvalidSpec("prior entries must be finite and nonnegative");

  const bool has_zero = std::any_of(table_.begin(), table_.end(), [](double p) { return p == 0.0; });
  if (smooth && has_zero) {
    std::size_t raised = 0;
    for (double& p : table_)
      if (p == 0.0) {
        p = kPriorEpsilon;
        ++raised;
      }
    const double sum = total();
    for (double& p : table_) p /= sum;
    smoothed_ = true;
    if (diag)
      diag->warn("PriorSmoothed", std::to_string(raised) + " zero prior entries raised to 1e-6 and renormalized");
  }
  p_min_ = *std::min_element(table_.begin(), table_.end());
}

double Prior::total() const {
  // Neumaier summation keeps the normalization check meaningful at 1e-12.
  double sum = 0.0, comp = 0.0;
  for (double p : table_) {
    const double t = sum + p;
    comp += std::abs(sum) >= std::abs(p) ? (sum - t) + p : (p - t) + sum;
    sum = t;
  }
  return sum + comp;
}

Prior Prior::uniform(int sequence_length) {
  if (sequence_length < 1 || sequence_length > kMaxSequenceLength)
    throw InvalidSpec("uniform prior length out of range");
  const std::size_t size = std::size_t{1} << sequence_length;
  return Prior(PriorKind::Uniform, std::vector<double>(size, 1.0 / static_cast<double>(size)), false, nullptr);
}

Prior Prior::user(std::vector<double> table, bool smooth, Diagnostics* diag) {
  return Prior(PriorKind::User, std::move(table), smooth, diag);
}

Prior Prior::empirical(int sequence_length, std::span<const Config> labels, Diagnostics* diag) {
  if (sequence_length < 1 || sequence_length > kMaxSequenceLength)
    throw InvalidSpec("empirical prior length out of range");
  if (labels.empty()) throw InsufficientData("empirical prior needs at least one labeled sequence");
  const std::size_t size = std::size_t{1} << sequence_length;
  std::vector<double> counts(size, 0.0);
  for (Config y : labels) {
    if (y >= size) throw InvalidSpec("labeled configuration out of range");
    counts[y] += 1.0;
  }
  for (double& c : counts) c /= static_cast<double>(labels.size());
  return Prior(PriorKind::Empirical, std::move(counts), true, diag);
}

VoteTensor::VoteTensor(std::int64_t sequences, std::vector<int> widths)
    : n_(sequences), widths_(std::move(widths)) {
  if (n_ < 0) throw InvalidSpec("negative sequence count");
  offsets_.reserve(widths_.size());
  for (int w : widths_) {
    if (w < 1) throw InvalidSpec("source coverage width must be positive");
    offsets_.push_back(total_);
    total_ += w;
  }
  data_.assign(static_cast<std::size_t>(n_) * static_cast<std::size_t>(total_), 0);
}

void VoteTensor::set(std::int64_t i, int j, int o, int v) {
  if (v < -1 || v > 1) throw InvalidSpec("vote " + std::to_string(v) + " outside {-1,0,1}");
  if (i < 0 || i >= n_ || j < 0 || j >= sources() || o < 0 || o >= widths_[j])
    throw InvalidSpec("vote index out of range");
  data_[i * total_ + offsets_[j] + o] = static_cast<std::int8_t>(v);
}

}  // namespace seqlabel
