#include "seqlabel/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <thread>

namespace seqlabel {

namespace {

double safe_log(double p) { return std::log(std::max(p, kInferenceEpsilon)); }

}  // namespace

PosteriorEngine::PosteriorEngine(const ModelSpec& model, const LabelModelParams& params)
    : model_(&model), params_(&params) {
  check_params(model, params, 1e-6);
  const auto& layout = model.layout();
  log_prior_.resize(layout.config_count());
  labels_.resize(layout.config_count());
  for (Config y = 0; y < layout.config_count(); ++y) {
    const double p = model.prior()(y);
    log_prior_[y] = p > 0.0 ? std::log(p) : -std::numeric_limits<double>::infinity();
    labels_[y] = layout.task_labels(y);
  }
  const auto& units = model.units();
  log_mu_.resize(units.size());
  for (std::size_t u = 0; u < units.size(); ++u) {
    const auto full = params.mu_of_unit(model, static_cast<int>(u)).full();
    for (int i = 0; i < 4; ++i) log_mu_[u][i] = safe_log(full[i]);
  }
  phi_of_unit_.assign(units.size(), -1);
  for (std::size_t e = 0; e < params.phi.size(); ++e) {
    const auto& p = params.phi[e];
    const auto full = p.full();
    std::array<double, 8> l;
    for (int i = 0; i < 8; ++i) l[i] = safe_log(full[i]);
    log_phi_.push_back(l);
    phi_of_unit_[model.unit_of(p.edge.first, p.offset)] = static_cast<int>(e);
    phi_of_unit_[model.unit_of(p.edge.second, p.offset)] = static_cast<int>(e);
  }
}

std::vector<double> PosteriorEngine::log_scores(std::span<const std::int8_t> row) const {
  const auto& model = *model_;
  const auto& units = model.units();
  const int tasks = model.layout().task_count();

  // Per-task log factors for the label being +1 / -1.
  std::vector<double> pos(tasks, 0.0), neg(tasks, 0.0);
  for (std::size_t u = 0; u < units.size(); ++u) {
    const int z = row[u];
    if (z == 0) continue;
    const auto& unit = units[u];
    if (model.uses_joint(unit.source)) continue;
    const int e = phi_of_unit_[u];
    if (e >= 0) {
      const auto& entry = params_->phi[e];
      const int other = unit.source == entry.edge.first ? entry.edge.second : entry.edge.first;
      const int v = model.unit_of(other, unit.offset);
      if (row[v] != 0) {
        if (unit.source != entry.edge.first) continue;  // the pair is scored once
        const int z2 = row[v];
        pos[unit.task] += log_phi_[e][phi_index(z, z2, 1)];
        neg[unit.task] += log_phi_[e][phi_index(z, z2, -1)];
        continue;
      }
    }
    pos[unit.task] += log_mu_[u][mu_index(z, 1)];
    neg[unit.task] += log_mu_[u][mu_index(z, -1)];
  }

  struct JointFactor {
    std::vector<int> tasks;
    std::vector<double> log_w;
  };
  std::vector<JointFactor> joints;
  for (const auto& entry : params_->joint) {
    const auto& spec = model.sources()[entry.source];
    const int s = entry.width;
    const std::size_t S = std::size_t{1} << s;
    const auto us = model.units_of(entry.source);
    std::uint32_t observed = 0, zbits = 0;
    for (int o = 0; o < s; ++o) {
      const int z = row[us[o]];
      if (z != 0) observed |= 1u << o;
      if (z < 0) zbits |= 1u << o;
    }
    if (!observed) continue;
    JointFactor f{spec.coverage, std::vector<double>(S)};
    for (std::size_t w = 0; w < S; ++w) {
      double p = 0.0;
      for (std::size_t z = 0; z < S; ++z)
        if ((z & observed) == zbits) p += entry.vote[z * S + w];
      double rate = 1.0;
      for (int o = 0; o < s; ++o) rate *= (observed >> o & 1) ? 1.0 - entry.abstain[o] : entry.abstain[o];
      f.log_w[w] = safe_log(rate * p);
    }
    joints.push_back(std::move(f));
  }

  std::vector<int> active;
  for (int t = 0; t < tasks; ++t)
    if (pos[t] != 0.0 || neg[t] != 0.0) active.push_back(t);

  std::vector<double> scores(log_prior_);
  for (Config y = 0; y < scores.size(); ++y) {
    const std::uint64_t lab = labels_[y];
    double s = scores[y];
    for (int t : active) s += (lab >> t & 1) ? pos[t] : neg[t];
    for (const auto& f : joints) {
      std::size_t w = 0;
      for (std::size_t o = 0; o < f.tasks.size(); ++o)
        if (!(lab >> f.tasks[o] & 1)) w |= std::size_t{1} << o;
      s += f.log_w[w];
    }
    scores[y] = s;
  }
  return scores;
}

Posterior PosteriorEngine::posterior(std::span<const std::int8_t> row, Diagnostics* diag) const {
  Posterior out;
  auto scores = log_scores(row);
  const double top = *std::max_element(scores.begin(), scores.end());
  const std::size_t C = scores.size();
  out.config.resize(C);
  if (!std::isfinite(top)) {
    out.prior_fallback = true;
    if (diag) diag->warn("AllZeroScore", "every configuration scored zero; returning the prior");
    for (Config y = 0; y < C; ++y) out.config[y] = model_->prior()(y);
  } else {
    double sum = 0.0;
    for (Config y = 0; y < C; ++y) sum += out.config[y] = std::exp(scores[y] - top);
    for (double& p : out.config) p /= sum;
  }
  const int tasks = model_->layout().task_count();
  out.marginals.assign(tasks, 0.0);
  for (Config y = 0; y < C; ++y)
    for (int t = 0; t < tasks; ++t)
      if (labels_[y] >> t & 1) out.marginals[t] += out.config[y];
  return out;
}

void PosteriorEngine::marginals(std::span<const std::int8_t> row, std::span<const int> tasks, std::span<double> out,
                                Diagnostics* diag) const {
  const auto post = posterior(row, diag);
  for (std::size_t i = 0; i < tasks.size(); ++i) out[i] = post.marginals[tasks[i]];
}

Posterior posterior(const ModelSpec& model, const LabelModelParams& params, std::span<const std::int8_t> row,
                    Diagnostics* diag) {
  return PosteriorEngine(model, params).posterior(row, diag);
}

LabelTable emit_labels(const ModelSpec& model, const LabelModelParams& params, const VoteTensor& votes, int resolution,
                       int threads, Diagnostics* diag) {
  if (resolution < 0 || resolution >= model.layout().resolution_count())
    throw InvalidSpec("resolution " + std::to_string(resolution + 1) + " is not declared");
  if (votes.widths() != model.widths()) throw InvalidSpec("vote tensor does not match the source coverage sizes");
  const PosteriorEngine engine(model, params);
  LabelTable table;
  table.tasks = model.layout().tasks_at(resolution);
  table.sequences = votes.sequences();
  const std::size_t width = table.tasks.size();
  table.p.assign(static_cast<std::size_t>(table.sequences) * width, 0.0);

  const std::int64_t n = votes.sequences();
  threads = std::max(1, std::min<int>(threads, static_cast<int>(std::max<std::int64_t>(1, n / 64))));
  std::vector<Diagnostics> local(threads);
  auto work = [&](int w) {
    const std::int64_t lo = n * w / threads, hi = n * (w + 1) / threads;
    for (std::int64_t i = lo; i < hi; ++i) {
      const auto post = engine.posterior(votes.row(i), &local[w]);
      for (std::size_t c = 0; c < width; ++c) table.p[i * width + c] = post.marginals[table.tasks[c]];
    }
  };
  if (threads == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < threads; ++w) pool.emplace_back(work, w);
    for (auto& t : pool) t.join();
  }
  if (diag)
    for (const auto& d : local) diag->append(d);
  return table;
}

MajorityResult majority_vote(const ModelSpec& model, const VoteTensor& votes, int resolution) {
  const auto& layout = model.layout();
  if (resolution < 0 || resolution >= layout.resolution_count())
    throw InvalidSpec("resolution " + std::to_string(resolution + 1) + " is not declared");
  const int T = layout.sequence_length();
  MajorityResult out;
  out.labels.tasks = layout.tasks_at(resolution);
  out.labels.sequences = votes.sequences();
  const std::size_t width = out.labels.tasks.size();
  out.labels.p.assign(static_cast<std::size_t>(votes.sequences()) * width, 0.0);
  const auto& units = model.units();
  std::vector<int> sum(T), seen(T);
  for (std::int64_t i = 0; i < votes.sequences(); ++i) {
    std::fill(sum.begin(), sum.end(), 0);
    std::fill(seen.begin(), seen.end(), 0);
    const auto row = votes.row(i);
    for (std::size_t u = 0; u < units.size(); ++u) {
      if (row[u] == 0) continue;
      const std::uint32_t elems = layout.elements_of(units[u].task);
      for (int e = 0; e < T; ++e)
        if (elems >> e & 1) {
          sum[e] += row[u];
          seen[e] = 1;
        }
    }
    Config y = 0;
    for (int e = 0; e < T; ++e) {
      if (sum[e] > 0) y |= 1u << e;
      else if (!seen[e]) ++out.abstained;
      else if (sum[e] == 0) ++out.ties;
    }
    for (std::size_t c = 0; c < width; ++c) out.labels.p[i * width + c] = layout.positive(out.labels.tasks[c], y) ? 1.0 : 0.0;
  }
  return out;
}

Metrics evaluate(const LabelTable& predicted, const LabelTable& gold, double threshold) {
  if (predicted.tasks != gold.tasks || predicted.sequences != gold.sequences)
    throw InvalidSpec("predicted and gold label tables cover different tasks");
  Metrics m;
  m.threshold = threshold;
  std::int64_t tp = 0, fp = 0, fn = 0, pos = 0;
  m.n_eval = static_cast<std::int64_t>(gold.p.size());
  for (std::size_t i = 0; i < gold.p.size(); ++i) {
    const bool g = gold.p[i] >= 0.5;
    const bool p = predicted.p[i] >= threshold;
    pos += g;
    tp += g && p;
    fp += !g && p;
    fn += g && !p;
  }
  m.degenerate_gold = pos == 0 || pos == m.n_eval;
  if (tp + fp > 0) m.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  if (tp + fn > 0) m.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  if (m.precision && m.recall) {
    const double s = *m.precision + *m.recall;
    m.f1 = s > 0.0 ? 2.0 * *m.precision * *m.recall / s : 0.0;
  }
  return m;
}

LabelTable gold_labels(const ModelSpec& model, std::span<const Config> latent, int resolution) {
  LabelTable out;
  out.tasks = model.layout().tasks_at(resolution);
  out.sequences = static_cast<std::int64_t>(latent.size());
  for (Config y : latent)
    for (int t : out.tasks) out.p.push_back(model.layout().positive(t, y) ? 1.0 : 0.0);
  return out;
}

}  // namespace seqlabel
