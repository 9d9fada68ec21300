#include "seqlabel/params.hpp"

#include <algorithm>
#include <cmath>

namespace seqlabel {

MuTable MuEntry::full() const {
  MuTable out;
  for (int i = 0; i < 4; ++i) out[i] = (1.0 - abstain) * vote[i];
  return out;
}

PhiTable PhiEntry::full() const {
  PhiTable out;
  for (int i = 0; i < 8; ++i) out[i] = both_vote * vote[i];
  return out;
}

const PhiEntry* LabelModelParams::phi_of(int j, int offset) const {
  for (const auto& p : phi)
    if ((p.edge.first == j || p.edge.second == j) && p.offset == offset) return &p;
  return nullptr;
}

const JointEntry* LabelModelParams::joint_of(int source) const {
  for (const auto& j : joint)
    if (j.source == source) return &j;
  return nullptr;
}

std::vector<double> stacked_mu(const ModelSpec& model, const LabelModelParams& params) {
  std::vector<double> out;
  out.reserve(model.units().size() * 4);
  for (std::size_t u = 0; u < model.units().size(); ++u) {
    const auto full = params.mu_of_unit(model, static_cast<int>(u)).full();
    out.insert(out.end(), full.begin(), full.end());
  }
  return out;
}

double mu_error_l2(const ModelSpec& model, const LabelModelParams& a, const LabelModelParams& b) {
  const auto x = stacked_mu(model, a), y = stacked_mu(model, b);
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - y[i]) * (x[i] - y[i]);
  return std::sqrt(s);
}

double mu_error_max(const ModelSpec& model, const LabelModelParams& a, const LabelModelParams& b) {
  const auto x = stacked_mu(model, a), y = stacked_mu(model, b);
  double m = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) m = std::max(m, std::abs(x[i] - y[i]));
  return m;
}

double phi_error_max(const LabelModelParams& a, const LabelModelParams& b) {
  if (a.phi.size() != b.phi.size()) throw InvalidSpec("phi tables differ in shape");
  double m = 0.0;
  for (std::size_t s = 0; s < a.phi.size(); ++s) {
    const auto x = a.phi[s].full(), y = b.phi[s].full();
    for (int i = 0; i < 8; ++i) m = std::max(m, std::abs(x[i] - y[i]));
  }
  return m;
}

void check_params(const ModelSpec& model, const LabelModelParams& params, double tol) {
  if (params.mu.size() != model.slots().size()) throw InvalidSpec("parameter file has a different slot count");
  auto in_range = [&](double p) { return p >= -tol && p <= 1.0 + tol && std::isfinite(p); };
  for (const auto& m : params.mu) {
    if (!in_range(m.abstain)) throw InvalidSpec("abstain rate outside [0,1]");
    const auto full = m.full();
    for (int w = 0; w < 2; ++w) {
      const double col = full[w] + full[2 + w] + m.abstain;
      if (std::abs(col - 1.0) > tol || !in_range(full[w]) || !in_range(full[2 + w]))
        throw InvalidSpec("mu column of tie group '" + m.tie_group + "' is not a distribution");
    }
  }
  for (const auto& p : params.phi) {
    const auto full = p.full();
    for (int w = 0; w < 2; ++w) {
      double slice = 1.0 - p.both_vote;
      for (int z = 0; z < 4; ++z) {
        if (!in_range(full[2 * z + w])) throw InvalidSpec("phi entry outside [0,1]");
        slice += full[2 * z + w];
      }
      if (std::abs(slice - 1.0) > tol) throw InvalidSpec("phi slice is not a distribution");
    }
  }
  for (const auto& j : params.joint) {
    const std::size_t S = std::size_t{1} << j.width;
    if (j.vote.size() != S * S) throw InvalidSpec("joint table has the wrong size");
    for (std::size_t w = 0; w < S; ++w) {
      double col = 0.0;
      for (std::size_t z = 0; z < S; ++z) col += j.vote[z * S + w];
      if (std::abs(col - 1.0) > tol) throw InvalidSpec("joint column is not a distribution");
    }
  }
}

PhiTable independence_phi(const MuTable& a, const MuTable& b) {
  PhiTable out{};
  for (int z1 : {1, -1})
    for (int z2 : {1, -1})
      for (int w : {1, -1}) out[phi_index(z1, z2, w)] = a[mu_index(z1, w)] * b[mu_index(z2, w)];
  return out;
}

}  // namespace seqlabel
