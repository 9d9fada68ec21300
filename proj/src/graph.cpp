#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "seqlabel/model.hpp"

namespace seqlabel {

ModelSpec::ModelSpec(TaskLayout layout, std::vector<SourceSpec> sources, std::vector<Edge> edges, Prior prior,
                     ModelOptions options)
    : layout_(std::move(layout)), sources_(std::move(sources)), prior_(std::move(prior)), options_(options) {
  if (prior_.sequence_length() != layout_.sequence_length())
    throw InvalidSpec("prior covers " + std::to_string(prior_.sequence_length()) + " elements, layout has " +
                      std::to_string(layout_.sequence_length()));
  for (std::size_t j = 0; j < sources_.size(); ++j) {
    auto& s = sources_[j];
    if (s.coverage.empty()) throw StructuralError("source " + std::to_string(j + 1) + " has empty coverage");
    auto sorted = s.coverage;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      throw StructuralError("source " + std::to_string(j + 1) + " covers a task twice");
    if (s.tie_group.empty()) s.tie_group = "#" + std::to_string(j + 1);
  }
  graph_ = merge_graphs(task_graph(layout_), edges, sources_, layout_.task_count());
  build();
}

void ModelSpec::build() {
  const int m = source_count();
  units_.clear();
  slots_.clear();
  first_unit_.assign(m, 0);
  partner_.assign(m, -1);

  std::map<std::pair<std::string, int>, int> slot_index;
  for (int j = 0; j < m; ++j) {
    first_unit_[j] = static_cast<int>(units_.size());
    for (int o = 0; o < sources_[j].size(); ++o) {
      const int task = sources_[j].coverage[o];
      const auto key = std::make_pair(sources_[j].tie_group, options_.tie_positions ? 0 : o);
      auto [it, fresh] = slot_index.emplace(key, static_cast<int>(slots_.size()));
      if (fresh) slots_.push_back({key.first, key.second, layout_.resolution_of(task), {}});
      slots_[it->second].units.push_back(static_cast<int>(units_.size()));
      units_.push_back({j, o, task, it->second});
    }
  }
  for (auto [a, b] : graph_.source_edges) {
    if (partner_[a] < 0 && partner_[b] < 0) {
      partner_[a] = b;
      partner_[b] = a;
    }
  }

  const int tasks = layout_.task_count();
  task_positive_.assign(tasks, 0.0);
  std::vector<std::uint64_t> labels(layout_.config_count());
  for (Config y = 0; y < layout_.config_count(); ++y) {
    labels[y] = layout_.task_labels(y);
    for (int t = 0; t < tasks; ++t)
      if (labels[y] >> t & 1) task_positive_[t] += prior_(y);
  }

  std::vector<char> covered(tasks, 0);
  for (const auto& u : units_) covered[u.task] = 1;
  pair_joint_.clear();
  std::vector<Edge> wanted;
  for (int a = 0; a < tasks; ++a)
    for (int b = a + 1; b < tasks; ++b)
      if (covered[a] && covered[b] && layout_.related(a, b)) wanted.emplace_back(a, b);
  for (auto [a, b] : wanted) {
    std::array<double, 4> joint{};
    for (Config y = 0; y < layout_.config_count(); ++y) {
      const int cell = (labels[y] >> a & 1 ? 0 : 2) + (labels[y] >> b & 1 ? 0 : 1);
      joint[cell] += prior_(y);
    }
    pair_joint_[{a, b}] = joint;
  }

  joint_.assign(m, 0);
  if (options_.full_joint) {
    std::map<std::string, int> group_size;
    for (const auto& s : sources_) ++group_size[s.tie_group];
    for (int j = 0; j < m; ++j) {
      const int s = sources_[j].size();
      if (s < 2 || s > 3 || group_size[sources_[j].tie_group] != 1 || partner_[j] >= 0) continue;
      bool ok = true;
      for (std::uint32_t mask = 1; mask < (1u << s) && ok; ++mask)
        ok = !joint_partner_sets(*this, j, mask).empty();
      joint_[j] = ok;
    }
  }
}

std::vector<int> ModelSpec::units_of(int source) const {
  std::vector<int> out(sources_.at(source).size());
  std::iota(out.begin(), out.end(), first_unit_[source]);
  return out;
}

std::vector<int> ModelSpec::widths() const {
  std::vector<int> out;
  for (const auto& s : sources_) out.push_back(s.size());
  return out;
}

std::optional<int> ModelSpec::edge_partner(int source) const {
  if (partner_.at(source) < 0) return std::nullopt;
  return partner_[source];
}

bool ModelSpec::uses_joint(int source) const { return joint_.at(source) != 0; }

bool ModelSpec::independent(int u, int v) const {
  const int a = units_[u].source, b = units_[v].source;
  return a != b && !graph_.adjacent(a, b);
}

bool ModelSpec::informative(int u, int v) const {
  if (!independent(u, v)) return false;
  const int a = units_[u].task, b = units_[v].task;
  return layout_.related(a, b) && std::abs(label_correlation(a, b)) >= kCorrelationFloor;
}

std::array<double, 4> ModelSpec::label_joint(int a, int b) const {
  if (a == b) {
    const double p = task_positive_.at(a);
    return {p, 0.0, 0.0, 1.0 - p};
  }
  if (a > b) {
    auto j = label_joint(b, a);
    return {j[0], j[2], j[1], j[3]};
  }
  if (auto it = pair_joint_.find({a, b}); it != pair_joint_.end()) return it->second;
  const int tasks[2] = {a, b};
  std::array<double, 4> out{};
  for (std::uint32_t w = 0; w < 4; ++w) {
    // positives bit i <=> tasks[i] positive; cell order (+,+), (+,-), (-,+), (-,-)
    const int cell = (w & 1 ? 0 : 2) + (w & 2 ? 0 : 1);
    out[cell] = label_probability(tasks, w);
  }
  return out;
}

double ModelSpec::label_correlation(int a, int b) const {
  const auto j = label_joint(a, b);
  return j[0] - j[1] - j[2] + j[3];
}

double ModelSpec::label_product(std::span<const int> tasks) const {
  double sum = 0.0;
  for (Config y = 0; y < layout_.config_count(); ++y) {
    int sign = 1;
    for (int t : tasks)
      if (!layout_.positive(t, y)) sign = -sign;
    sum += sign * prior_(y);
  }
  return sum;
}

double ModelSpec::label_probability(std::span<const int> tasks, std::uint32_t positives) const {
  double sum = 0.0;
  for (Config y = 0; y < layout_.config_count(); ++y) {
    bool match = true;
    for (std::size_t i = 0; i < tasks.size() && match; ++i)
      match = layout_.positive(tasks[i], y) == ((positives >> i & 1) != 0);
    if (match) sum += prior_(y);
  }
  return sum;
}

ModelSpec ModelSpec::untied() const {
  ModelSpec out = *this;
  for (int j = 0; j < source_count(); ++j) out.sources_[j].tie_group = "#" + std::to_string(j + 1);
  out.build();
  return out;
}

ModelSpec ModelSpec::without_edges() const {
  ModelSpec out = *this;
  out.graph_ = merge_graphs(task_graph(layout_), {}, sources_, layout_.task_count());
  out.build();
  return out;
}

ModelSpec ModelSpec::with_prior(Prior prior) const {
  ModelSpec out = *this;
  out.prior_ = std::move(prior);
  if (out.prior_.sequence_length() != layout_.sequence_length())
    throw InvalidSpec("prior length does not match the layout");
  out.build();
  return out;
}

std::vector<Partner> find_independent_partners(const ModelSpec& model, int source, std::span<const int> U,
                                               std::span<const int> V) {
  (void)U;  // reduced form: each partner unit is paired with one task of V
  const auto& layout = model.layout();
  const auto& graph = model.graph();
  std::vector<Partner> candidates;
  for (int k = 0; k < model.source_count(); ++k) {
    if (k == source || graph.adjacent(source, k)) continue;
    Partner p{k, {}};
    for (int t : model.sources()[k].coverage) {
      bool onto = !V.empty();
      for (int v : V)
        onto = onto && layout.related(t, v) && std::abs(model.label_correlation(t, v)) >= kCorrelationFloor;
      // |U_k| + |V| even: every partner unit is a single task against a single V task.
      if (onto && V.size() == 1) p.tasks.push_back(t);
    }
    if (!p.tasks.empty()) candidates.push_back(std::move(p));
  }
  std::vector<Partner> kept;
  for (auto& c : candidates) {
    bool ok = true;
    for (const auto& k : kept) ok = ok && !graph.adjacent(c.source, k.source);
    if (ok) kept.push_back(std::move(c));
  }
  if (kept.size() < 2)
    throw AssumptionViolation("source " + std::to_string(source + 1) + " needs at least two other independent accuracies; found " +
                              std::to_string(kept.size()));
  return kept;
}

bool slots_linked(const ModelSpec& model, int a, int b) {
  const auto& ua = model.slots()[a].units;
  const auto& ub = model.slots()[b].units;
  for (int u : ua)
    for (int v : ub)
      if (u != v && model.informative(u, v)) return true;
  return false;
}

TripletGroup triplet_group(const ModelSpec& model, int slot, const std::function<bool(int, int)>& linked) {
  TripletGroup g;
  g.members.push_back(slot);
  for (int b = 0; b < static_cast<int>(model.slots().size()); ++b)
    if (b != slot && linked(slot, b)) g.members.push_back(b);
  for (int i = 0; i < static_cast<int>(g.members.size()); ++i)
    for (int j = i; j < static_cast<int>(g.members.size()); ++j)
      if (linked(g.members[i], g.members[j])) g.rows.emplace_back(i, j);
  return g;
}

bool full_column_rank(const TripletGroup& group) {
  const int c = static_cast<int>(group.members.size());
  std::vector<std::vector<int>> adj(c);
  std::vector<char> odd_self(c, 0);
  for (auto [a, b] : group.rows) {
    if (a == b) {
      odd_self[a] = 1;
      continue;
    }
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  std::vector<int> color(c, -1);
  for (int s = 0; s < c; ++s) {
    if (color[s] >= 0) continue;
    bool odd = false;
    std::vector<int> stack{s};
    color[s] = 0;
    while (!stack.empty()) {
      const int v = stack.back();
      stack.pop_back();
      odd = odd || odd_self[v];
      for (int w : adj[v]) {
        if (color[w] < 0) {
          color[w] = color[v] ^ 1;
          stack.push_back(w);
        } else if (color[w] == color[v]) {
          odd = true;
        }
      }
    }
    if (!odd) return false;
  }
  return c > 0;
}

std::vector<std::vector<int>> joint_partner_sets(const ModelSpec& model, int source, std::uint32_t offsets_mask) {
  const auto& spec = model.sources().at(source);
  std::vector<std::vector<int>> choices;
  for (int o = 0; o < spec.size(); ++o) {
    if (!(offsets_mask >> o & 1)) continue;
    std::vector<int> units;
    for (int u = 0; u < static_cast<int>(model.units().size()); ++u) {
      const auto& unit = model.units()[u];
      if (unit.task == spec.coverage[o] && unit.source != source && !model.graph().adjacent(source, unit.source))
        units.push_back(u);
    }
    if (units.empty()) return {};
    choices.push_back(std::move(units));
  }

  std::vector<std::vector<int>> out;
  std::vector<int> current;
  std::function<void(std::size_t)> extend = [&](std::size_t level) {
    if (out.size() >= kMaxJointPartnerSets) return;
    if (level == choices.size()) {
      out.push_back(current);
      return;
    }
    for (int u : choices[level]) {
      const int k = model.units()[u].source;
      bool ok = true;
      for (int v : current) {
        const int l = model.units()[v].source;
        ok = ok && k != l && !model.graph().adjacent(k, l);
      }
      if (!ok) continue;
      current.push_back(u);
      extend(level + 1);
      current.pop_back();
    }
  };
  extend(0);
  return out;
}

}  // namespace seqlabel
