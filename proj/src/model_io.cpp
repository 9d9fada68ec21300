#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include "seqlabel/io.hpp"

namespace seqlabel {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  return in;
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write " + path.string());
  return out;
}

template <class T>
T get(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw ParseError(where + ": missing \"" + key + "\"");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ParseError(where + ": bad \"" + key + "\": " + e.what());
  }
}

template <class T>
T get_or(const json& j, const char* key, T fallback, const std::string& where) {
  return j.contains(key) ? get<T>(j, key, where) : fallback;
}

// Splits one CSV line into exactly `n` fields.
std::vector<std::string_view> split(std::string_view line, std::size_t n, const std::string& where) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  if (out.size() != n) throw ParseError(where + ": expected " + std::to_string(n) + " fields");
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <class T>
T parse_number(std::string_view s, const std::string& where) {
  s = trim(s);
  T v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw ParseError(where + ": not a number: \"" + std::string(s) + "\"");
  return v;
}

void expect_header(std::istream& in, std::string_view header, const fs::path& path) {
  std::string line;
  if (!std::getline(in, line) || trim(line) != header)
    throw ParseError(path.string() + ": expected header \"" + std::string(header) + "\"");
}

AggregationRule parse_rule(const std::string& s) {
  if (s == "ANY_POSITIVE") return AggregationRule::AnyPositive;
  if (s == "ALL_POSITIVE") return AggregationRule::AllPositive;
  throw ParseError("unknown aggregation_rule \"" + s + "\"");
}

// Labeled development sequences for the empirical prior, in the labels CSV
// format restricted to element tasks (p_positive in {0, 1}).
std::vector<Config> read_dev_labels(const fs::path& path, int T) {
  const LabelTable t = read_labels(path);
  std::vector<Config> configs(t.sequences, 0);
  for (std::size_t c = 0; c < t.tasks.size(); ++c) {
    if (t.tasks[c] >= T) throw ParseError(path.string() + ": development labels must be element tasks");
    for (std::int64_t i = 0; i < t.sequences; ++i) {
      const double p = t.at(i, c);
      if (p != 0.0 && p != 1.0) throw ParseError(path.string() + ": development labels must be 0 or 1");
      if (p == 1.0) configs[i] |= Config{1} << t.tasks[c];
    }
  }
  return configs;
}

json warnings_json(const Diagnostics& d) {
  json out = json::array();
  for (const auto& w : d.warnings) out.push_back({{"kind", w.kind}, {"detail", w.detail}});
  return out;
}

}  // namespace

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// ---- model ------------------------------------------------------------------

LoadedModel parse_model(const json& doc, const fs::path& base_dir) {
  if (!doc.is_object()) throw ParseError("model: expected an object");
  LoadedModel out;
  const json& lay = doc.contains("layout") ? doc.at("layout") : throw ParseError("model: missing \"layout\"");
  const int T = get<int>(lay, "T", "layout");
  if (T < 1 || T > kMaxSequenceLength) throw InvalidSpec("T must lie in [1, 20]");

  // tasks: {"level": [task ids]} with 1-based levels and ids.
  std::map<int, int> level_of;
  if (lay.contains("tasks")) {
    for (const auto& [key, ids] : lay.at("tasks").items()) {
      const int level = parse_number<int>(key, "layout.tasks") - 1;
      if (level < 0) throw ParseError("layout.tasks: levels are 1-based");
      for (const auto& id : ids) {
        const int t = id.get<int>() - 1;
        if (!level_of.emplace(t, level).second) throw ParseError("layout.tasks: task " + std::to_string(t + 1) + " listed twice");
      }
    }
  } else {
    for (int t = 0; t < T; ++t) level_of[t] = 0;
  }
  for (int t = 0; t < T; ++t)
    if (level_of.count(t) == 0 || level_of[t] != 0)
      throw StructuralError("tasks 1.." + std::to_string(T) + " must be the element tasks at resolution 1");
  std::map<int, std::vector<int>> children;
  if (lay.contains("children"))
    for (const auto& [key, ids] : lay.at("children").items()) {
      std::vector<int> c;
      for (const auto& id : ids) c.push_back(id.get<int>() - 1);
      children[parse_number<int>(key, "layout.children") - 1] = std::move(c);
    }
  std::vector<CoarseTask> coarse;
  int expected = T;
  for (const auto& [t, level] : level_of) {
    if (t < T) continue;
    if (t != expected) throw StructuralError("task ids must be contiguous; missing task " + std::to_string(expected + 1));
    ++expected;
    auto it = children.find(t);
    if (it == children.end()) throw StructuralError("coarse task " + std::to_string(t + 1) + " has no children");
    coarse.push_back({level, it->second});
  }
  for (const auto& [t, c] : children)
    if (level_of.count(t) == 0 || t < T) throw StructuralError("children given for task " + std::to_string(t + 1) + " which is not a coarse task");
  if (lay.contains("resolutions")) {
    const auto levels = lay.at("resolutions").get<std::vector<int>>();
    int max_level = 0;
    for (const auto& [t, l] : level_of) max_level = std::max(max_level, l);
    if (static_cast<int>(levels.size()) != max_level + 1)
      throw StructuralError("resolutions do not match the levels used by the tasks");
  }
  TaskLayout layout(T, std::move(coarse), parse_rule(get_or<std::string>(lay, "aggregation_rule", "ANY_POSITIVE", "layout")));

  // sources
  if (!doc.contains("sources")) throw ParseError("model: missing \"sources\"");
  std::vector<SourceSpec> sources;
  std::map<int, int> source_index;
  for (const auto& s : doc.at("sources")) {
    const int id = get<int>(s, "id", "source");
    const std::string where = "source " + std::to_string(id);
    SourceSpec spec;
    spec.resolution = get<int>(s, "resolution", where) - 1;
    for (int t : get<std::vector<int>>(s, "coverage", where)) spec.coverage.push_back(t - 1);
    spec.tie_group = get_or<std::string>(s, "tie_group", "", where);
    if (!source_index.emplace(id, static_cast<int>(sources.size())).second) throw ParseError("duplicate source id " + std::to_string(id));
    sources.push_back(std::move(spec));
  }
  for (int j = 0; j < static_cast<int>(sources.size()); ++j)
    if (source_index.count(j + 1) == 0) throw ParseError("source ids must be 1..m in order");
  for (auto it = source_index.begin(); it != source_index.end(); ++it)
    if (it->first != it->second + 1) throw ParseError("source ids must be 1..m in order");

  std::vector<Edge> edges;
  if (doc.contains("edges"))
    for (const auto& e : doc.at("edges")) {
      const auto pair = e.get<std::vector<int>>();
      if (pair.size() != 2) throw ParseError("edges: expected [j, k] pairs");
      edges.emplace_back(pair[0] - 1, pair[1] - 1);
    }

  ModelOptions options;
  if (doc.contains("options")) {
    const json& o = doc.at("options");
    options.tie_positions = get_or<bool>(o, "tie_positions", false, "options");
    options.full_joint = get_or<bool>(o, "full_joint", false, "options");
  }

  Prior prior = Prior::uniform(T);
  if (doc.contains("prior")) {
    const json& p = doc.at("prior");
    const std::string kind = get_or<std::string>(p, "kind", "uniform", "prior");
    const bool smooth = get_or<bool>(p, "smoothing", true, "prior");
    options.smooth_prior = smooth;
    if (kind == "uniform") {
      prior = Prior::uniform(T);
    } else if (kind == "user") {
      prior = Prior::user(get<std::vector<double>>(p, "table", "prior"), smooth, &out.diagnostics);
    } else if (kind == "empirical") {
      fs::path dev = get<std::string>(p, "dev_path", "prior");
      if (dev.is_relative()) dev = base_dir / dev;
      prior = Prior::empirical(T, read_dev_labels(dev, T), &out.diagnostics);
    } else {
      throw ParseError("unknown prior kind \"" + kind + "\"");
    }
  }

  out.model = ModelSpec(std::move(layout), std::move(sources), std::move(edges), std::move(prior), options);
  const ModelSpec& model = out.model;

  if (doc.contains("truth")) {
    const json& tr = doc.at("truth");
    Truth truth;
    const std::size_t U = model.units().size();
    truth.mu.assign(U, MuTable{});
    truth.abstain.assign(U, 0.0);
    std::vector<char> seen(U, 0);
    auto unit_of = [&](int j, int t, const std::string& where) {
      if (j < 0 || j >= model.source_count()) throw ParseError(where + ": unknown source");
      const auto& cov = model.sources()[j].coverage;
      auto it = std::find(cov.begin(), cov.end(), t);
      if (it == cov.end()) throw ParseError(where + ": task not covered by the source");
      return std::pair{model.unit_of(j, static_cast<int>(it - cov.begin())), static_cast<int>(it - cov.begin())};
    };
    for (const auto& m : tr.value("mu", json::array())) {
      const int j = get<int>(m, "source", "truth.mu") - 1;
      const auto [u, o] = unit_of(j, get<int>(m, "task", "truth.mu") - 1, "truth.mu");
      const auto vote = get<std::vector<double>>(m, "vote", "truth.mu");
      if (vote.size() != 4) throw ParseError("truth.mu: vote needs 4 entries");
      std::copy(vote.begin(), vote.end(), truth.mu[u].begin());
      truth.abstain[u] = get_or<double>(m, "abstain", 0.0, "truth.mu");
      seen[u] = 1;
    }
    for (const auto& p : tr.value("phi", json::array())) {
      const auto e = get<std::vector<int>>(p, "edge", "truth.phi");
      if (e.size() != 2) throw ParseError("truth.phi: edge needs two sources");
      PhiEntry entry;
      entry.edge = {std::min(e[0], e[1]) - 1, std::max(e[0], e[1]) - 1};
      entry.offset = unit_of(entry.edge.first, get<int>(p, "task", "truth.phi") - 1, "truth.phi").second;
      const auto vote = get<std::vector<double>>(p, "vote", "truth.phi");
      if (vote.size() != 8) throw ParseError("truth.phi: vote needs 8 entries");
      std::copy(vote.begin(), vote.end(), entry.vote.begin());
      truth.phi.push_back(entry);
    }
    for (const auto& jt : tr.value("joint", json::array())) {
      JointEntry entry;
      entry.source = get<int>(jt, "source", "truth.joint") - 1;
      if (entry.source < 0 || entry.source >= model.source_count()) throw ParseError("truth.joint: unknown source");
      entry.width = model.sources()[entry.source].size();
      entry.vote = get<std::vector<double>>(jt, "vote", "truth.joint");
      entry.abstain = get<std::vector<double>>(jt, "abstain", "truth.joint");
      if (static_cast<int>(entry.abstain.size()) != entry.width) throw ParseError("truth.joint: abstain needs one rate per offset");
      for (int o = 0; o < entry.width; ++o) {
        const int u = model.unit_of(entry.source, o);
        truth.abstain[u] = entry.abstain[o];
        if (!seen[u]) {
          // Unit marginal of the joint table.
          const std::size_t S = std::size_t{1} << entry.width;
          MuTable mu{};
          std::array<double, 2> mass{};
          for (std::size_t w = 0; w < S; ++w)
            for (std::size_t z = 0; z < S; ++z) {
              const int zb = (z >> o) & 1, wb = (w >> o) & 1;
              mu[2 * zb + wb] += entry.vote[z * S + w];
              if (zb == 0) mass[wb] += entry.vote[z * S + w];
            }
          for (int wb = 0; wb < 2; ++wb) {
            const double total = mu[wb] + mu[2 + wb];
            mu[wb] /= total;
            mu[2 + wb] /= total;
          }
          truth.mu[u] = mu;
          seen[u] = 1;
        }
      }
      truth.joint.push_back(std::move(entry));
    }
    for (std::size_t u = 0; u < U; ++u)
      if (!seen[u])
        throw ParseError("truth: missing accuracy for source " + std::to_string(model.units()[u].source + 1) + " on task " +
                         std::to_string(model.units()[u].task + 1));
    check_truth(model, truth);
    out.truth = std::move(truth);
  }
  return out;
}

LoadedModel load_model(const fs::path& path) {
  auto in = open_in(path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return parse_model(doc, path.parent_path());
}

json model_to_json(const ModelSpec& model, const Truth* truth) {
  const auto& layout = model.layout();
  json lay;
  lay["T"] = layout.sequence_length();
  json levels = json::array();
  json tasks = json::object();
  for (int r = 0; r < layout.resolution_count(); ++r) {
    levels.push_back(r + 1);
    json ids = json::array();
    for (int t : layout.tasks_at(r)) ids.push_back(t + 1);
    tasks[std::to_string(r + 1)] = ids;
  }
  json children = json::object();
  for (int t = layout.sequence_length(); t < layout.task_count(); ++t) {
    json ids = json::array();
    for (int c : layout.children_of(t)) ids.push_back(c + 1);
    children[std::to_string(t + 1)] = ids;
  }
  lay["resolutions"] = levels;
  lay["tasks"] = tasks;
  lay["children"] = children;
  lay["aggregation_rule"] = layout.rule() == AggregationRule::AnyPositive ? "ANY_POSITIVE" : "ALL_POSITIVE";

  json sources = json::array();
  for (int j = 0; j < model.source_count(); ++j) {
    const auto& s = model.sources()[j];
    json cov = json::array();
    for (int t : s.coverage) cov.push_back(t + 1);
    sources.push_back({{"id", j + 1}, {"resolution", s.resolution + 1}, {"coverage", cov}, {"tie_group", s.tie_group}});
  }
  json edges = json::array();
  for (auto [j, k] : model.edges()) edges.push_back({j + 1, k + 1});

  json prior;
  if (model.prior().kind() == PriorKind::Uniform) {
    prior = {{"kind", "uniform"}};
  } else {
    // An empirical prior is written out as its estimated table.
    prior = {{"kind", "user"}, {"table", model.prior().table()}, {"smoothing", model.options().smooth_prior}};
  }
  json doc = {{"layout", lay},
              {"sources", sources},
              {"edges", edges},
              {"prior", prior},
              {"options", {{"tie_positions", model.options().tie_positions}, {"full_joint", model.options().full_joint}}}};

  if (truth) {
    json mu = json::array();
    for (std::size_t u = 0; u < model.units().size(); ++u) {
      const auto& unit = model.units()[u];
      if (model.uses_joint(unit.source)) continue;
      mu.push_back({{"source", unit.source + 1},
                    {"task", unit.task + 1},
                    {"vote", truth->mu[u]},
                    {"abstain", truth->abstain[u]}});
    }
    json phi = json::array();
    for (const auto& p : truth->phi)
      phi.push_back({{"edge", {p.edge.first + 1, p.edge.second + 1}},
                     {"task", model.sources()[p.edge.first].coverage[p.offset] + 1},
                     {"vote", p.vote}});
    json joint = json::array();
    for (const auto& jt : truth->joint) {
      std::vector<double> abstain;
      for (int u : model.units_of(jt.source)) abstain.push_back(truth->abstain[u]);
      joint.push_back({{"source", jt.source + 1}, {"vote", jt.vote}, {"abstain", abstain}});
    }
    doc["truth"] = {{"mu", mu}, {"phi", phi}, {"joint", joint}};
  }
  return doc;
}

// ---- votes ------------------------------------------------------------------

VoteTensor read_votes(const fs::path& path, const ModelSpec& model) {
  auto in = open_in(path);
  expect_header(in, "seq_id,source_id,task_index,vote", path);
  struct Cell {
    std::int64_t seq;
    int source, offset, vote;
  };
  std::vector<Cell> cells;
  std::int64_t n = 0;
  std::string line;
  std::int64_t line_no = 1;
  // Task id -> offset, per source.
  std::vector<std::map<int, int>> offset_of(model.source_count());
  for (int j = 0; j < model.source_count(); ++j)
    for (int o = 0; o < model.sources()[j].size(); ++o) offset_of[j][model.sources()[j].coverage[o]] = o;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    const auto f = split(line, 4, where);
    const auto seq = parse_number<std::int64_t>(f[0], where);
    const int j = parse_number<int>(f[1], where) - 1;
    const int t = parse_number<int>(f[2], where) - 1;
    const int v = parse_number<int>(f[3], where);
    if (seq < 1) throw ParseError(where + ": seq_id must be >= 1");
    if (j < 0 || j >= model.source_count()) throw ParseError(where + ": unknown source " + std::to_string(j + 1));
    auto it = offset_of[j].find(t);
    if (it == offset_of[j].end())
      throw ParseError(where + ": source " + std::to_string(j + 1) + " does not cover task " + std::to_string(t + 1));
    if (v < -1 || v > 1) throw ParseError(where + ": vote must be -1, 0 or 1");
    n = std::max(n, seq);
    cells.push_back({seq - 1, j, it->second, v});
  }
  VoteTensor votes(n, model.widths());
  for (const auto& c : cells) votes.set(c.seq, c.source, c.offset, c.vote);
  return votes;
}

void write_votes(const fs::path& path, const ModelSpec& model, const VoteTensor& votes) {
  auto out = open_out(path);
  out << "seq_id,source_id,task_index,vote\n";
  std::string buf;
  for (std::int64_t i = 0; i < votes.sequences(); ++i) {
    bool any = false;
    for (int j = 0; j < votes.sources(); ++j)
      for (int o = 0; o < votes.width(j); ++o) {
        const int v = votes.vote(i, j, o);
        if (v == 0) continue;
        any = true;
        buf += std::to_string(i + 1) + ',' + std::to_string(j + 1) + ',' +
               std::to_string(model.sources()[j].coverage[o] + 1) + ',' + std::to_string(v) + '\n';
      }
    // A fully abstained sequence keeps one explicit row so the count survives.
    if (!any && votes.units() > 0)
      buf += std::to_string(i + 1) + ",1," + std::to_string(model.sources()[0].coverage[0] + 1) + ",0\n";
    if (buf.size() > (1u << 20)) {
      out << buf;
      buf.clear();
    }
  }
  out << buf;
}

// ---- labels -----------------------------------------------------------------

void write_labels(const fs::path& path, const LabelTable& table) {
  auto out = open_out(path);
  out << "seq_id,task_index,p_positive\n";
  std::string buf;
  for (std::int64_t i = 0; i < table.sequences; ++i) {
    for (std::size_t c = 0; c < table.tasks.size(); ++c)
      buf += std::to_string(i + 1) + ',' + std::to_string(table.tasks[c] + 1) + ',' + format_double(table.at(i, c)) + '\n';
    if (buf.size() > (1u << 20)) {
      out << buf;
      buf.clear();
    }
  }
  out << buf;
}

LabelTable read_labels(const fs::path& path) {
  auto in = open_in(path);
  expect_header(in, "seq_id,task_index,p_positive", path);
  std::map<std::pair<std::int64_t, int>, double> cells;
  std::map<int, std::size_t> columns;
  std::int64_t n = 0;
  std::string line;
  std::int64_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    const auto f = split(line, 3, where);
    const auto seq = parse_number<std::int64_t>(f[0], where);
    const int t = parse_number<int>(f[1], where) - 1;
    const double p = parse_number<double>(f[2], where);
    if (seq < 1 || t < 0) throw ParseError(where + ": ids are 1-based");
    if (!(p >= 0.0 && p <= 1.0)) throw ParseError(where + ": p_positive outside [0,1]");
    if (!cells.emplace(std::pair{seq - 1, t}, p).second) throw ParseError(where + ": duplicate row");
    columns[t] = 0;
    n = std::max(n, seq);
  }
  LabelTable table;
  for (auto& [t, c] : columns) {
    c = table.tasks.size();
    table.tasks.push_back(t);
  }
  table.sequences = n;
  table.p.assign(static_cast<std::size_t>(n) * table.tasks.size(), 0.0);
  if (cells.size() != table.p.size()) throw ParseError(path.string() + ": every sequence needs a row for every task");
  for (const auto& [key, p] : cells) table.p[key.first * table.tasks.size() + columns[key.second]] = p;
  return table;
}

// ---- params -----------------------------------------------------------------

json params_to_json(const ModelSpec& model, const LabelModelParams& params) {
  json mu = json::array();
  json abstain = json::array();
  for (const auto& m : params.mu) {
    mu.push_back({{"tie_group", m.tie_group}, {"offset", m.offset + 1}, {"vote", m.vote}, {"table", m.full()}});
    abstain.push_back(m.abstain);
  }
  json phi = json::array();
  for (const auto& p : params.phi)
    phi.push_back({{"edge", {p.edge.first + 1, p.edge.second + 1}},
                   {"offset", p.offset + 1},
                   {"task", model.sources()[p.edge.first].coverage[p.offset] + 1},
                   {"vote", p.vote},
                   {"both_vote", p.both_vote},
                   {"fallback", p.fallback},
                   {"table", p.full()}});
  json joint = json::array();
  for (const auto& j : params.joint)
    joint.push_back({{"source", j.source + 1}, {"width", j.width}, {"vote", j.vote}, {"abstain", j.abstain}});
  const auto& d = params.diagnostics;
  json diag = {{"method", d.method},     {"b_min", d.b_min},   {"m_pinv_norm", d.m_pinv_norm},
               {"slot_pinv_norm", d.slot_pinv_norm},           {"final_loss", d.final_loss},
               {"lr", d.lr},             {"epochs", d.epochs}, {"batch", d.batch},
               {"seed", d.seed},         {"warnings", warnings_json(d.warnings)}};
  return {{"mu", mu}, {"phi", phi}, {"abstain", abstain}, {"joint", joint}, {"diagnostics", diag}};
}

LabelModelParams params_from_json(const ModelSpec& model, const json& doc) {
  LabelModelParams params;
  if (!doc.is_object()) throw ParseError("params: expected an object");
  const auto& mu = doc.contains("mu") ? doc.at("mu") : throw ParseError("params: missing \"mu\"");
  const auto abstain = get<std::vector<double>>(doc, "abstain", "params");
  if (mu.size() != model.slots().size() || abstain.size() != mu.size())
    throw ParseError("params: " + std::to_string(mu.size()) + " accuracy tables for " +
                     std::to_string(model.slots().size()) + " parameter slots");
  for (std::size_t s = 0; s < mu.size(); ++s) {
    MuEntry e;
    e.tie_group = get<std::string>(mu[s], "tie_group", "params.mu");
    e.offset = get<int>(mu[s], "offset", "params.mu") - 1;
    const auto vote = get<std::vector<double>>(mu[s], "vote", "params.mu");
    if (vote.size() != 4) throw ParseError("params.mu: vote needs 4 entries");
    std::copy(vote.begin(), vote.end(), e.vote.begin());
    e.abstain = abstain[s];
    const auto& slot = model.slots()[s];
    if (e.tie_group != slot.tie_group || e.offset != slot.offset)
      throw ParseError("params.mu: entry " + std::to_string(s + 1) + " does not match slot (" + slot.tie_group + ", " +
                       std::to_string(slot.offset + 1) + ")");
    params.mu.push_back(std::move(e));
  }
  for (const auto& p : doc.value("phi", json::array())) {
    PhiEntry e;
    const auto edge = get<std::vector<int>>(p, "edge", "params.phi");
    if (edge.size() != 2) throw ParseError("params.phi: edge needs two sources");
    e.edge = {edge[0] - 1, edge[1] - 1};
    e.offset = get<int>(p, "offset", "params.phi") - 1;
    const auto vote = get<std::vector<double>>(p, "vote", "params.phi");
    if (vote.size() != 8) throw ParseError("params.phi: vote needs 8 entries");
    std::copy(vote.begin(), vote.end(), e.vote.begin());
    e.both_vote = get<double>(p, "both_vote", "params.phi");
    e.fallback = get_or<bool>(p, "fallback", false, "params.phi");
    if (model.edge_partner(e.edge.first) != e.edge.second) throw ParseError("params.phi: entry on a non-edge");
    params.phi.push_back(e);
  }
  for (const auto& j : doc.value("joint", json::array())) {
    JointEntry e;
    e.source = get<int>(j, "source", "params.joint") - 1;
    e.width = get<int>(j, "width", "params.joint");
    e.vote = get<std::vector<double>>(j, "vote", "params.joint");
    e.abstain = get<std::vector<double>>(j, "abstain", "params.joint");
    params.joint.push_back(std::move(e));
  }
  if (doc.contains("diagnostics")) {
    const json& d = doc.at("diagnostics");
    auto& out = params.diagnostics;
    out.method = get_or<std::string>(d, "method", "closed_form", "diagnostics");
    out.b_min = get_or<double>(d, "b_min", 0.0, "diagnostics");
    out.m_pinv_norm = get_or<double>(d, "m_pinv_norm", 0.0, "diagnostics");
    out.slot_pinv_norm = get_or<std::vector<double>>(d, "slot_pinv_norm", {}, "diagnostics");
    out.final_loss = get_or<double>(d, "final_loss", 0.0, "diagnostics");
    out.lr = get_or<double>(d, "lr", 0.0, "diagnostics");
    out.epochs = get_or<int>(d, "epochs", 0, "diagnostics");
    out.batch = get_or<int>(d, "batch", 0, "diagnostics");
    out.seed = get_or<std::uint64_t>(d, "seed", 0, "diagnostics");
    for (const auto& w : d.value("warnings", json::array()))
      out.warnings.warn(get<std::string>(w, "kind", "warning"), get_or<std::string>(w, "detail", "", "warning"));
  }
  check_params(model, params, 1e-6);
  return params;
}

void save_params(const fs::path& path, const ModelSpec& model, const LabelModelParams& params) {
  auto out = open_out(path);
  out << params_to_json(model, params).dump(2) << '\n';
}

LabelModelParams load_params(const fs::path& path, const ModelSpec& model) {
  auto in = open_in(path);
  try {
    return params_from_json(model, json::parse(in));
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

json metrics_to_json(const Metrics& m) {
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  return {{"precision", opt(m.precision)}, {"recall", opt(m.recall)},   {"f1", opt(m.f1)},
          {"n_eval", m.n_eval},            {"threshold", m.threshold}, {"degenerate_gold", m.degenerate_gold}};
}

// ---- experiment tables ------------------------------------------------------

void write_scaling_csv(const fs::path& path, const std::vector<ScalingRow>& rows) {
  auto out = open_out(path);
  out << "n,seed,tying,error\n";
  for (const auto& r : rows)
    out << r.n << ',' << r.seed << ',' << (r.tying ? "tied" : "untied") << ',' << format_double(r.error) << '\n';
}

void write_benefit_csv(const fs::path& path, const std::vector<BenefitRow>& rows) {
  auto out = open_out(path);
  out << "seed,method,f1\n";
  for (const auto& r : rows) {
    out << r.seed << ",modeled," << format_double(r.modeled) << '\n';
    out << r.seed << ",ignored," << format_double(r.ignored) << '\n';
    out << r.seed << ",majority," << format_double(r.majority) << '\n';
  }
}

void write_loss_curve(const fs::path& path, const std::vector<double>& curve) {
  auto out = open_out(path);
  out << "epoch,loss\n";
  for (std::size_t e = 0; e < curve.size(); ++e) out << e + 1 << ',' << format_double(curve[e]) << '\n';
}

}  // namespace seqlabel
