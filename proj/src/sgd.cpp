#include "seqlabel/sgd.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

namespace seqlabel {

namespace {

int mu_param(int slot, int z, int w) { return 4 * slot + mu_index(z, w); }

// coef * (theta[a+] - theta[a-]) for a slot's E[lambda | w].
void add_mean_terms(std::vector<Term>& terms, double coef, int slot, int w) {
  terms.push_back({coef, mu_param(slot, 1, w), -1});
  terms.push_back({-coef, mu_param(slot, -1, w), -1});
}

double chi(int kind, int z1, int z2) { return kind == 0 ? z1 : kind == 1 ? z2 : z1 * z2; }

}  // namespace

int ConstraintSet::moment_count() const {
  return static_cast<int>(std::count_if(constraints.begin(), constraints.end(), [](const Constraint& c) {
    return c.kind == "pair" || c.kind == "mean" || c.kind == "phi_moment" || c.kind == "phi_partner";
  }));
}

int ConstraintSet::simplex_count() const {
  return static_cast<int>(
      std::count_if(constraints.begin(), constraints.end(), [](const Constraint& c) { return c.kind == "simplex"; }));
}

ConstraintSet build_constraints(const ModelSpec& model, const ProductStats& stats, bool weight_by_support) {
  ConstraintSet set;
  const int S = static_cast<int>(model.slots().size());
  set.mu_parameters = 4 * S;
  const auto in = prepare_inputs(model, stats);
  auto weight = [&](double support) { return weight_by_support && stats.n > 0 ? support / stats.n : 1.0; };

  for (const auto& p : in.pairs) {
    Constraint c{"pair", {}, p.raw, weight(p.support)};
    for (int w : {1, -1})
      for (int v : {1, -1}) {
        const double q = p.Q[(w > 0 ? 0 : 2) + (v > 0 ? 0 : 1)];
        for (int za : {1, -1})
          for (int zb : {1, -1}) c.terms.push_back({q * za * zb, mu_param(p.a, za, w), mu_param(p.b, zb, v)});
      }
    set.constraints.push_back(std::move(c));
  }
  for (int s = 0; s < S; ++s) {
    const auto& slot = in.slots[s];
    if (!(slot.support > 0.0)) continue;
    Constraint c{"mean", {}, slot.mean, weight(slot.support)};
    add_mean_terms(c.terms, slot.p_positive, s, 1);
    add_mean_terms(c.terms, 1.0 - slot.p_positive, s, -1);
    set.constraints.push_back(std::move(c));
  }
  for (int s = 0; s < S; ++s)
    for (int w : {1, -1})
      set.constraints.push_back({"simplex", {{1.0, mu_param(s, 1, w), -1}, {1.0, mu_param(s, -1, w), -1}}, 1.0, 1.0});

  int slice = 0;
  for (std::size_t e = 0; e < model.edges().size(); ++e) {
    auto [j, k] = model.edges()[e];
    if (model.edge_partner(j) != k) continue;
    for (int o = 0; o < model.sources()[j].size(); ++o, ++slice) {
      set.slices.push_back({static_cast<int>(e), o});
      const int base = set.mu_parameters + 8 * slice;
      const int uj = model.unit_of(j, o), uk = model.unit_of(k, o);
      const int task = model.units()[uj].task;
      const double prior[2] = {model.prior_positive(task), 1.0 - model.prior_positive(task)};
      auto phi_param = [&](int z1, int z2, int w) { return base + phi_index(z1, z2, w); };
      const MomentKey keys[3] = {{uj}, {uk}, make_key({uj, uk})};

      for (int x = 0; x < 3; ++x) {
        if (!(stats.support(keys[x]) > 0.0)) continue;
        Constraint c{"phi_moment", {}, stats.mean(keys[x]), weight(stats.support(keys[x]))};
        for (int w : {1, -1})
          for (int z1 : {1, -1})
            for (int z2 : {1, -1}) c.terms.push_back({prior[w < 0] * chi(x, z1, z2), phi_param(z1, z2, w), -1});
        set.constraints.push_back(std::move(c));
      }
      for (int f : phi_partners(model, j, k, o)) {
        const int sf = model.units()[f].slot;
        for (int x = 0; x < 3; ++x) {
          auto key = keys[x];
          key.push_back(f);
          key = make_key(std::move(key));
          if (!(stats.support(key) > 0.0)) continue;
          Constraint c{"phi_partner", {}, stats.mean(key), weight(stats.support(key))};
          for (int w : {1, -1})
            for (int z1 : {1, -1})
              for (int z2 : {1, -1})
                for (int zf : {1, -1})
                  c.terms.push_back({prior[w < 0] * chi(x, z1, z2) * zf, phi_param(z1, z2, w), mu_param(sf, zf, w)});
          set.constraints.push_back(std::move(c));
        }
      }
      const int sj = model.units()[uj].slot, sk = model.units()[uk].slot;
      for (int w : {1, -1}) {
        for (int z : {1, -1}) {
          set.constraints.push_back({"marginal",
                                     {{1.0, phi_param(z, 1, w), -1}, {1.0, phi_param(z, -1, w), -1}, {-1.0, mu_param(sj, z, w), -1}},
                                     0.0,
                                     1.0});
          set.constraints.push_back({"marginal",
                                     {{1.0, phi_param(1, z, w), -1}, {1.0, phi_param(-1, z, w), -1}, {-1.0, mu_param(sk, z, w), -1}},
                                     0.0,
                                     1.0});
        }
        Constraint c{"simplex", {}, 1.0, 1.0};
        for (int z1 : {1, -1})
          for (int z2 : {1, -1}) c.terms.push_back({1.0, phi_param(z1, z2, w), -1});
        set.constraints.push_back(std::move(c));
      }
    }
  }
  set.parameters = set.mu_parameters + 8 * slice;
  return set;
}

double residual(const Constraint& c, const std::vector<double>& theta) {
  double r = -c.target;
  for (const auto& t : c.terms) r += t.coef * (t.i >= 0 ? theta[t.i] : 1.0) * (t.j >= 0 ? theta[t.j] : 1.0);
  return r;
}

namespace {

void accumulate_gradient(const Constraint& c, const std::vector<double>& theta, double scale, std::vector<double>& grad) {
  for (const auto& t : c.terms) {
    if (t.i >= 0) grad[t.i] += scale * t.coef * (t.j >= 0 ? theta[t.j] : 1.0);
    if (t.j >= 0) grad[t.j] += scale * t.coef * (t.i >= 0 ? theta[t.i] : 1.0);
  }
}

double penalty(const std::vector<double>& theta, std::vector<double>* grad, double scale) {
  double loss = 0.0;
  for (std::size_t i = 0; i < theta.size(); ++i)
    if (theta[i] < 0.0) {
      loss += theta[i] * theta[i];
      if (grad) (*grad)[i] += scale * 2.0 * theta[i];
    }
  return loss;
}

}  // namespace

double total_loss(const ConstraintSet& set, const std::vector<double>& theta, std::vector<double>* grad) {
  if (grad) grad->assign(theta.size(), 0.0);
  double loss = 0.0;
  for (const auto& c : set.constraints) {
    const double r = residual(c, theta);
    loss += c.weight * r * r;
    if (grad) accumulate_gradient(c, theta, 2.0 * c.weight * r, *grad);
  }
  return loss + penalty(theta, grad, 1.0);
}

std::vector<double> default_theta(const ModelSpec& model, const ConstraintSet& set) {
  std::vector<double> theta(set.parameters, 0.0);
  const MuTable init{0.7, 0.3, 0.3, 0.7};
  for (std::size_t s = 0; s < model.slots().size(); ++s)
    for (int i = 0; i < 4; ++i) theta[4 * s + i] = init[i];
  const auto phi = independence_phi(init, init);
  for (std::size_t p = 0; p < set.slices.size(); ++p)
    for (int i = 0; i < 8; ++i) theta[set.phi_offset(static_cast<int>(p)) + i] = phi[i];
  return theta;
}

std::vector<double> pack_params(const ModelSpec& model, const ConstraintSet& set, const LabelModelParams& params) {
  if (params.mu.size() != model.slots().size() || params.phi.size() != set.slices.size())
    throw InvalidSpec("initial parameters do not match the model");
  std::vector<double> theta(set.parameters, 0.0);
  for (std::size_t s = 0; s < params.mu.size(); ++s)
    for (int i = 0; i < 4; ++i) theta[4 * s + i] = params.mu[s].vote[i];
  for (std::size_t p = 0; p < params.phi.size(); ++p)
    for (int i = 0; i < 8; ++i) theta[set.phi_offset(static_cast<int>(p)) + i] = params.phi[p].vote[i];
  return theta;
}

namespace {

LabelModelParams unpack(const ModelSpec& model, const ProductStats& stats, const ConstraintSet& set,
                        const std::vector<double>& theta) {
  LabelModelParams params;
  const auto pooled = pooled_stats(model, stats);
  for (std::size_t s = 0; s < model.slots().size(); ++s) {
    MuEntry entry{model.slots()[s].tie_group, model.slots()[s].offset, {}, 1.0 - pooled[s].vote_rate};
    for (int w = 0; w < 2; ++w) {
      const double plus = std::clamp(theta[4 * s + w], 0.0, 1.0), minus = std::clamp(theta[4 * s + 2 + w], 0.0, 1.0);
      const double col = plus + minus;
      entry.vote[w] = col > 0 ? plus / col : 0.5;
      entry.vote[2 + w] = col > 0 ? minus / col : 0.5;
    }
    params.mu.push_back(entry);
  }
  for (std::size_t p = 0; p < set.slices.size(); ++p) {
    const auto edge = model.edges()[set.slices[p].first];
    const int o = set.slices[p].second;
    PhiEntry entry;
    entry.edge = edge;
    entry.offset = o;
    entry.both_vote =
        stats.n > 0 ? stats.support(make_key({model.unit_of(edge.first, o), model.unit_of(edge.second, o)})) / stats.n : 0.0;
    const int base = set.phi_offset(static_cast<int>(p));
    for (int w = 0; w < 2; ++w) {
      double col = 0.0;
      for (int z = 0; z < 4; ++z) col += std::clamp(theta[base + 2 * z + w], 0.0, 1.0);
      for (int z = 0; z < 4; ++z) entry.vote[2 * z + w] = col > 0 ? std::clamp(theta[base + 2 * z + w], 0.0, 1.0) / col : 0.25;
    }
    params.phi.push_back(entry);
  }
  return params;
}

}  // namespace

SgdResult fit_sgd(const ModelSpec& model, const ProductStats& stats, const ConstraintSet& set,
                  const std::optional<LabelModelParams>& init, const SgdOptions& opts) {
  if (set.constraints.empty()) throw InvalidSpec("no constraints to optimize");
  if (!(opts.lr > 0.0) || opts.epochs < 0 || opts.batch < 0) throw InvalidSpec("invalid optimizer options");
  std::vector<double> theta = init ? pack_params(model, set, *init) : default_theta(model, set);

  SgdResult result;
  const double initial = total_loss(set, theta);
  // Loss growth beyond this bound means the iteration is not descending.
  const double ceiling = 100.0 * std::max(initial, 1e-2);

  const std::size_t C = set.constraints.size();
  const std::size_t B = opts.batch == 0 ? C : std::min<std::size_t>(opts.batch, C);
  std::vector<std::size_t> order(C);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(opts.seed);
  std::vector<double> grad(theta.size());

  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < C; start += B) {
      const std::size_t stop = std::min(C, start + B);
      std::fill(grad.begin(), grad.end(), 0.0);
      const double scale = 1.0 / static_cast<double>(stop - start);
      for (std::size_t b = start; b < stop; ++b) {
        const auto& c = set.constraints[order[b]];
        accumulate_gradient(c, theta, scale * 2.0 * c.weight * residual(c, theta), grad);
      }
      penalty(theta, &grad, scale);
      for (std::size_t i = 0; i < theta.size(); ++i) {
        const double step = opts.lr * grad[i];
        if (!std::isfinite(step) || std::abs(step) > 1.0) {
          std::ostringstream msg;
          msg << "step of " << step << " at epoch " << epoch << " overshoots the parameter box (lr " << opts.lr << ")";
          throw Diverged(msg.str());
        }
        theta[i] -= step;
        if (opts.projection) theta[i] = std::clamp(theta[i], 0.0, 1.0);
      }
    }
    const double loss = total_loss(set, theta);
    result.loss_curve.push_back(loss);
    if (!std::isfinite(loss) || loss > ceiling) {
      std::ostringstream msg;
      msg << "loss " << loss << " at epoch " << epoch << " (initial " << initial << ")";
      throw Diverged(msg.str());
    }
  }

  result.theta = theta;
  result.final_loss = total_loss(set, theta);
  for (const auto& c : set.constraints) result.residuals.push_back(residual(c, theta));
  result.params = unpack(model, stats, set, theta);
  auto& d = result.params.diagnostics;
  d.method = "sgd";
  d.lr = opts.lr;
  d.epochs = opts.epochs;
  d.batch = opts.batch;
  d.seed = opts.seed;
  d.final_loss = result.final_loss;
  d.b_min = 1.0;
  const auto in = prepare_inputs(model, stats);
  for (std::size_t s = 0; s < model.slots().size(); ++s) {
    const auto& mu = result.params.mu[s].vote;
    const double p = in.slots[s].p_positive;
    d.b_min = std::min(d.b_min, std::abs(p * (mu[0] - mu[2]) - (1.0 - p) * (mu[1] - mu[3])));
  }
  if (result.final_loss > opts.tol_loss) {
    std::ostringstream msg;
    msg << "final loss " << result.final_loss << " exceeds " << opts.tol_loss;
    d.warnings.warn("NotConverged", msg.str());
  }
  return result;
}

SgdResult fit_sgd(const ModelSpec& model, const VoteTensor& votes, const SgdOptions& opts, int threads) {
  require_valid(model);
  if (votes.widths() != model.widths()) throw InvalidSpec("vote tensor does not match the source coverage sizes");
  const auto stats = empirical_stats(votes, plan_keys(model), threads);
  const auto set = build_constraints(model, stats, opts.weight_by_support);
  auto result = fit_sgd(model, stats, set, std::nullopt, opts);

  // Joint-form tables are not optimized; they reuse the closed-form stage with
  // the agreements implied by the optimized accuracies.
  {
    const auto in = prepare_inputs(model, stats);
    std::vector<double> agreements(model.units().size());
    for (std::size_t u = 0; u < agreements.size(); ++u) {
      const int s = model.units()[u].slot;
      const auto& mu = result.params.mu[s].vote;
      const double p = in.slots[s].p_positive;
      agreements[u] = p * (mu[0] - mu[2]) - (1.0 - p) * (mu[1] - mu[3]);
    }
    for (int j = 0; j < model.source_count(); ++j)
      if (model.uses_joint(j))
        result.params.joint.push_back(estimate_joint(model, stats, agreements, j, &result.params.diagnostics.warnings));
  }
  return result;
}

}  // namespace seqlabel
