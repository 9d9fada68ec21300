#include "seqlabel/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <map>
#include <set>
#include <sstream>

namespace seqlabel {

namespace {

std::string slot_name(const ModelSpec& model, int s) {
  const auto& slot = model.slots()[s];
  return "tie group '" + slot.tie_group + "' offset " + std::to_string(slot.offset + 1);
}

std::string edge_name(Edge e, int offset) {
  return "edge (" + std::to_string(e.first + 1) + "," + std::to_string(e.second + 1) + ") offset " +
         std::to_string(offset + 1);
}

// Least-squares split of a composite agreement over partners with known
// signed agreements: E[X f] = E[X y] E[f y].
double split_composite(const ProductStats& stats, const std::vector<int>& base, const std::vector<int>& partners,
                       const std::vector<double>& agreements) {
  double num = 0.0, den = 0.0;
  for (int f : partners) {
    auto key = base;
    key.push_back(f);
    key = make_key(std::move(key));
    const Moment* m = stats.find(key);
    if (!m || !(m->count > 0.0)) continue;
    const double a = agreements[f];
    num += m->count * a * m->mean();
    den += m->count * a * a;
  }
  if (!(den > 0.0)) throw InsufficientData("no partner moment with nonzero support for a composite agreement");
  return std::clamp(num / den, -1.0, 1.0);
}

void ipf(PhiTable& phi, const MuTable& mj, const MuTable& mk) {
  for (int w = 0; w < 2; ++w) {
    for (int it = 0; it < 200; ++it) {
      for (int z1 = 0; z1 < 2; ++z1) {
        const double row = phi[4 * z1 + w] + phi[4 * z1 + 2 + w];
        if (row > 0.0)
          for (int z2 = 0; z2 < 2; ++z2) phi[4 * z1 + 2 * z2 + w] *= mj[2 * z1 + w] / row;
      }
      for (int z2 = 0; z2 < 2; ++z2) {
        const double col = phi[2 * z2 + w] + phi[4 + 2 * z2 + w];
        if (col > 0.0)
          for (int z1 = 0; z1 < 2; ++z1) phi[4 * z1 + 2 * z2 + w] *= mk[2 * z2 + w] / col;
      }
    }
  }
}

double marginal_gap(const PhiTable& phi, const MuTable& mj, const MuTable& mk) {
  double gap = 0.0;
  for (int w = 0; w < 2; ++w)
    for (int z = 0; z < 2; ++z) {
      gap = std::max(gap, std::abs(phi[4 * z + w] + phi[4 * z + 2 + w] - mj[2 * z + w]));
      gap = std::max(gap, std::abs(phi[2 * z + w] + phi[4 + 2 * z + w] - mk[2 * z + w]));
    }
  return gap;
}

}  // namespace

std::vector<int> phi_partners(const ModelSpec& model, int j, int k, int offset) {
  const int uj = model.unit_of(j, offset);
  std::vector<int> out;
  for (int f = 0; f < static_cast<int>(model.units().size()); ++f) {
    const auto& unit = model.units()[f];
    if (unit.task != model.units()[uj].task) continue;
    if (unit.source == j || unit.source == k) continue;
    if (model.graph().adjacent(unit.source, j) || model.graph().adjacent(unit.source, k)) continue;
    out.push_back(f);
  }
  return out;
}

std::vector<MomentKey> plan_keys(const ModelSpec& model) {
  std::set<MomentKey> keys;
  for (auto& k : singleton_and_pair_keys(model)) keys.insert(std::move(k));
  for (auto [j, k] : model.edges()) {
    if (model.edge_partner(j) != k) continue;
    for (int o = 0; o < model.sources()[j].size(); ++o) {
      const int uj = model.unit_of(j, o), uk = model.unit_of(k, o);
      keys.insert(make_key({uj, uk}));
      for (int f : phi_partners(model, j, k, o)) {
        keys.insert(make_key({uj, f}));
        keys.insert(make_key({uk, f}));
        keys.insert(make_key({uj, uk, f}));
      }
    }
  }
  for (int j = 0; j < model.source_count(); ++j) {
    if (!model.uses_joint(j)) continue;
    const int s = model.sources()[j].size();
    const auto units = model.units_of(j);
    for (std::uint32_t L = 1; L < (1u << s); ++L) {
      std::vector<int> base;
      for (int o = 0; o < s; ++o)
        if (L >> o & 1) base.push_back(units[o]);
      keys.insert(make_key(base));
      for (std::uint32_t V = 1; V < (1u << s); ++V)
        for (const auto& set : joint_partner_sets(model, j, V)) {
          auto key = base;
          key.insert(key.end(), set.begin(), set.end());
          keys.insert(make_key(std::move(key)));
        }
    }
  }
  return {keys.begin(), keys.end()};
}

EstimationInputs prepare_inputs(const ModelSpec& model, const ProductStats& stats) {
  EstimationInputs in;
  const auto& slots = model.slots();
  const auto pooled = pooled_stats(model, stats);
  in.slots.resize(slots.size());
  for (std::size_t s = 0; s < slots.size(); ++s) {
    auto& out = in.slots[s];
    out.mean = pooled[s].mean;
    out.support = pooled[s].support;
    out.vote_rate = pooled[s].vote_rate;
    double weight = 0.0, positive = 0.0;
    for (int u : slots[s].units) {
      const double c = stats.support({u});
      weight += c;
      positive += c * model.prior_positive(model.units()[u].task);
    }
    out.p_positive = weight > 0.0 ? positive / weight : 0.0;
  }

  for (std::size_t a = 0; a < slots.size(); ++a) {
    for (std::size_t b = a; b < slots.size(); ++b) {
      SlotPair pair;
      pair.a = static_cast<int>(a);
      pair.b = static_cast<int>(b);
      double corrected = 0.0, raw = 0.0;
      for (int u : slots[a].units) {
        for (int v : slots[b].units) {
          if (a == b && v <= u) continue;
          if (!model.informative(u, v)) continue;
          const Moment* m = stats.find(make_key({u, v}));
          if (!m || !(m->count > 0.0)) continue;
          const int tu = model.units()[u].task, tv = model.units()[v].task;
          const double c = model.label_correlation(tu, tv);
          corrected += m->sum / c;
          raw += m->sum;
          pair.support += m->count;
          const auto joint = model.label_joint(tu, tv);
          for (int i = 0; i < 4; ++i) pair.Q[i] += m->count * joint[i];
        }
      }
      if (!(pair.support > 0.0)) continue;
      pair.corrected = corrected / pair.support;
      pair.raw = raw / pair.support;
      for (double& q : pair.Q) q /= pair.support;
      in.pairs.push_back(pair);
    }
  }
  return in;
}

SlotAgreement estimate_slot_agreement(const ModelSpec& model, const EstimationInputs& in, int slot, Diagnostics* diag) {
  const int S = static_cast<int>(model.slots().size());
  std::vector<int> index(static_cast<std::size_t>(S) * S, -1);
  for (std::size_t i = 0; i < in.pairs.size(); ++i) {
    const auto& p = in.pairs[i];
    index[p.a * S + p.b] = index[p.b * S + p.a] = static_cast<int>(i);
  }
  auto linked = [&](int a, int b) { return index[a * S + b] >= 0; };
  const auto group = triplet_group(model, slot, linked);
  if (!full_column_rank(group))
    throw RankDeficient(slot_name(model, slot) + " lacks at least two other independent accuracies");

  std::vector<double> values;
  for (auto [i, j] : group.rows) values.push_back(in.pairs[index[group.members[i] * S + group.members[j]]].corrected);
  const auto sys = build_agreement_system(static_cast<int>(group.members.size()), group.rows, values, diag);
  const auto magnitudes = solve_agreement_system(sys);
  const auto signed_values = recover_signs(magnitudes, sys);
  return {std::clamp(signed_values(0), -1.0, 1.0), pinv_norm(sys.M)};
}

PhiEntry estimate_phi(const ModelSpec& model, const ProductStats& stats, const LabelModelParams& mu_stage,
                      const std::vector<double>& agreements, Edge edge, int offset, Diagnostics* diag) {
  auto [j, k] = edge;
  const int uj = model.unit_of(j, offset), uk = model.unit_of(k, offset);
  const int task = model.units()[uj].task;
  const auto& mj = mu_stage.mu_of_unit(model, uj).vote;
  const auto& mk = mu_stage.mu_of_unit(model, uk).vote;

  PhiEntry out;
  out.edge = edge;
  out.offset = offset;
  const double both = stats.support(make_key({uj, uk}));
  out.both_vote = stats.n > 0.0 ? both / stats.n : 0.0;

  const auto partners = phi_partners(model, j, k, offset);
  if (partners.empty()) throw AssumptionViolation(edge_name(edge, offset) + " has no same-task independent partner");

  const double ej = stats.mean({uj}), ek = stats.mean({uk}), ejk = stats.mean(make_key({uj, uk}));
  const double tj = split_composite(stats, {uj}, partners, agreements);
  const double tk = split_composite(stats, {uk}, partners, agreements);
  const double tjk = split_composite(stats, {uj, uk}, partners, agreements);
  const double py = model.prior_positive(task);

  // D = (lambda_j, lambda_k, y); subsets in bitmask order.
  Eigen::VectorXd r(8);
  r << 1.0, product_probability(ej), product_probability(ek), product_probability(ejk), py, product_probability(tj),
      product_probability(tk), product_probability(tjk);
  const Eigen::VectorXd e = solve_joints(build_B(3), r, diag, edge_name(edge, offset));

  const double prior[2] = {py, 1.0 - py};
  for (int w = 0; w < 2; ++w) {
    double col = 0.0;
    for (int z = 0; z < 4; ++z) col += e(z + 4 * w);
    for (int z1 = 0; z1 < 2; ++z1)
      for (int z2 = 0; z2 < 2; ++z2) {
        const double p = prior[w] > 0.0 && col > 0.0 ? e(z1 + 2 * z2 + 4 * w) / col : 0.25;
        out.vote[4 * z1 + 2 * z2 + w] = p;
      }
  }

  const double gap = marginal_gap(out.vote, mj, mk);
  if (gap > 3.0 * kMarginalTolerance) {
    std::ostringstream msg;
    msg << edge_name(edge, offset) << " marginals differ from the accuracy tables by " << gap;
    throw MarginalMismatch(msg.str());
  }
  if (gap > kMarginalTolerance) {
    ipf(out.vote, mj, mk);
    if (diag) {
      std::ostringstream msg;
      msg << edge_name(edge, offset) << " reconciled to the accuracy marginals (gap " << gap << ")";
      diag->warn("MarginalReconciled", msg.str());
    }
  }
  return out;
}

JointEntry estimate_joint(const ModelSpec& model, const ProductStats& stats, const std::vector<double>& agreements,
                          int source, Diagnostics* diag) {
  const auto& spec = model.sources()[source];
  const int s = spec.size();
  const int t = 2 * s;
  const auto units = model.units_of(source);
  const std::uint32_t low = (1u << s) - 1;

  Eigen::VectorXd r(1 << t);
  for (std::uint32_t mask = 0; mask < (1u << t); ++mask) {
    const std::uint32_t L = mask & low, V = mask >> s;
    std::vector<int> base, tasks;
    for (int o = 0; o < s; ++o) {
      if (L >> o & 1) base.push_back(units[o]);
      if (V >> o & 1) tasks.push_back(spec.coverage[o]);
    }
    if (mask == 0) {
      r(mask) = 1.0;
    } else if (V == 0) {
      r(mask) = product_probability(stats.mean(make_key(base)));
    } else if (L == 0) {
      r(mask) = product_probability(model.label_product(tasks));
    } else {
      double num = 0.0, den = 0.0;
      for (const auto& set : joint_partner_sets(model, source, V)) {
        auto key = base;
        key.insert(key.end(), set.begin(), set.end());
        const Moment* m = stats.find(make_key(std::move(key)));
        if (!m || !(m->count > 0.0)) continue;
        double a = 1.0;
        for (int f : set) a *= agreements[f];
        num += m->count * a * m->mean();
        den += m->count * a * a;
      }
      if (!(den > 0.0))
        throw MissingEstimate("no supported partner set for a joint subset of source " + std::to_string(source + 1));
      r(mask) = product_probability(std::clamp(num / den, -1.0, 1.0));
    }
  }
  const Eigen::VectorXd e = solve_joints(build_B(t), r, diag, "joint table of source " + std::to_string(source + 1));

  JointEntry out;
  out.source = source;
  out.width = s;
  const std::size_t S = std::size_t{1} << s;
  out.vote.assign(S * S, 0.0);
  for (std::size_t w = 0; w < S; ++w) {
    // Label configurations of probability zero leave their column
    // unidentified; it is set uniform.
    const bool possible = model.label_probability(spec.coverage, static_cast<std::uint32_t>(~w & (S - 1))) > 0.0;
    double col = 0.0;
    for (std::size_t z = 0; z < S; ++z) col += e(static_cast<int>(z + (w << s)));
    for (std::size_t z = 0; z < S; ++z)
      out.vote[z * S + w] =
          possible && col > 0.0 ? e(static_cast<int>(z + (w << s))) / col : 1.0 / static_cast<double>(S);
  }
  for (int u : units) out.abstain.push_back(1.0 - stats.vote_rate(u));
  return out;
}

void require_valid(const ModelSpec& model) {
  const auto report = validate_model(model);
  if (report.ok) return;
  std::string detail = "model failed validation:";
  for (const auto& i : report.issues) detail += " [" + i.assumption + "] " + i.detail + ";";
  throw AssumptionViolation(detail);
}

LabelModelParams fit_closed_form(const ModelSpec& model, const ProductStats& stats) {
  LabelModelParams params;
  auto& diag = params.diagnostics;
  const auto in = prepare_inputs(model, stats);
  const auto B2 = build_B(2);
  const int S = static_cast<int>(model.slots().size());

  std::vector<double> slot_agreement(S, 0.0);
  std::exception_ptr first;
  int failures = 0;
  diag.b_min = 1.0;
  for (int s = 0; s < S; ++s) {
    const auto& slot = model.slots()[s];
    MuEntry entry;
    entry.tie_group = slot.tie_group;
    entry.offset = slot.offset;
    try {
      const auto& input = in.slots[s];
      if (!(input.support > 0.0)) throw InsufficientData(slot_name(model, s) + " never votes");
      const auto agreement = estimate_slot_agreement(model, in, s, &diag.warnings);
      slot_agreement[s] = agreement.signed_mean;
      diag.slot_pinv_norm.push_back(agreement.pinv_norm);
      diag.m_pinv_norm = std::max(diag.m_pinv_norm, agreement.pinv_norm);
      diag.b_min = std::min(diag.b_min, std::abs(agreement.signed_mean));
      const Eigen::VectorXd r = assemble_r(product_probability(input.mean), input.p_positive,
                                           product_probability(agreement.signed_mean));
      const Eigen::VectorXd e = solve_joints(B2, r, &diag.warnings, slot_name(model, s));
      entry.vote = bayes_mu(e, input.p_positive);
      entry.abstain = 1.0 - input.vote_rate;
    } catch (const Error& err) {
      if (!first) first = std::current_exception();
      ++failures;
      diag.slot_pinv_norm.push_back(0.0);
    }
    params.mu.push_back(entry);
  }
  if (first) {
    try {
      std::rethrow_exception(first);
    } catch (const Error& err) {
      std::string detail = std::string(err.what()).substr(err.kind().size() + 2);
      if (failures > 1) detail += " (" + std::to_string(failures - 1) + " further slots failed)";
      throw Error(err.code(), err.kind(), detail);
    }
  }

  std::vector<double> agreements(model.units().size());
  for (std::size_t u = 0; u < agreements.size(); ++u) agreements[u] = slot_agreement[model.units()[u].slot];

  for (auto [j, k] : model.edges()) {
    if (model.edge_partner(j) != k) continue;
    for (int o = 0; o < model.sources()[j].size(); ++o) {
      try {
        params.phi.push_back(estimate_phi(model, stats, params, agreements, {j, k}, o, &diag.warnings));
      } catch (const Error& err) {
        PhiEntry fallback;
        fallback.edge = {j, k};
        fallback.offset = o;
        fallback.fallback = true;
        fallback.vote = independence_phi(params.mu_of_unit(model, model.unit_of(j, o)).vote,
                                         params.mu_of_unit(model, model.unit_of(k, o)).vote);
        fallback.both_vote = stats.n > 0.0 ? stats.support(make_key({model.unit_of(j, o), model.unit_of(k, o)})) / stats.n
                                           : 0.0;
        diag.warnings.warn("PhiFallback", edge_name({j, k}, o) + ": " + err.what());
        params.phi.push_back(fallback);
      }
    }
  }

  for (int j = 0; j < model.source_count(); ++j)
    if (model.uses_joint(j)) params.joint.push_back(estimate_joint(model, stats, agreements, j, &diag.warnings));
  return params;
}

LabelModelParams fit_closed_form(const ModelSpec& model, const VoteTensor& votes, int threads) {
  require_valid(model);
  if (votes.widths() != model.widths()) throw InvalidSpec("vote tensor does not match the source coverage sizes");
  const auto keys = plan_keys(model);
  return fit_closed_form(model, empirical_stats(votes, keys, threads));
}

}  // namespace seqlabel
